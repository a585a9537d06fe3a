"""Backend parity: the compiled kernels and the numpy reference must agree on
identical inputs (same noise, same thresholds) to rounding accuracy."""

import numpy as np
import pytest

from openqb import DickeConfig, build_dicke
from openqb._kernels import backend_name, get_backend, pyref


def _compiled_or_skip():
    try:
        return get_backend("compiled")
    except ImportError:
        pytest.skip("compiled kernels not built")


@pytest.fixture(scope="module")
def operators():
    m = build_dicke(DickeConfig(omega=1.0, lambda_bar=0.8, kappa=0.5, n_tls=2, n_ph=6))
    h = m.h_total.matrix
    c = m.jump_op.matrix
    a = np.ascontiguousarray(-1j * h - 0.5 * (c.conj().T @ c))
    return a, np.ascontiguousarray(c), m.initial_state.amplitudes


def test_backend_name_is_known():
    assert backend_name() in ("compiled", "python")


def test_rk4_advance_parity(operators):
    core = _compiled_or_skip()
    a, _, psi0 = operators
    d = psi0.shape[0]
    psi_c, psi_p = psi0.copy(), psi0.copy()
    scratch = np.empty((6, d), dtype=np.complex128)
    out_c = core.pd_interval(a, psi_c, 1e-3, 500, -1.0, scratch)
    out_p = pyref.pd_interval(a, psi_p, 1e-3, 500, -1.0, scratch.copy())
    assert out_c == (500, 0.0, False) and out_p == (500, 0.0, False)
    np.testing.assert_allclose(psi_c, psi_p, atol=1e-10)


def test_jump_localization_parity(operators):
    core = _compiled_or_skip()
    a, _, psi0 = operators
    d = psi0.shape[0]
    # pick a threshold the decaying norm will cross mid-interval
    r = 0.6
    psi_c, psi_p = psi0.copy(), psi0.copy()
    scratch = np.empty((6, d), dtype=np.complex128)
    n_c, s_c, j_c = core.pd_interval(a, psi_c, 1e-3, 4000, r, scratch)
    n_p, s_p, j_p = pyref.pd_interval(a, psi_p, 1e-3, 4000, r, scratch.copy())
    assert j_c and j_p
    assert n_c == n_p
    assert abs(s_c - s_p) < 1e-9
    np.testing.assert_allclose(psi_c, psi_p, atol=1e-9)
    # bisection landed on the threshold
    assert abs(np.vdot(psi_c, psi_c).real - r) < 1e-10


def test_hd_parity_same_noise(operators):
    core = _compiled_or_skip()
    a, c, psi0 = operators
    d = psi0.shape[0]
    rng = np.random.default_rng(7)
    h = 5e-4
    dw = rng.standard_normal(800) * np.sqrt(h)
    psi_c, psi_p = psi0.copy(), psi0.copy()
    dy_c, dy_p = np.empty(800), np.empty(800)
    scratch = np.empty((6, d), dtype=np.complex128)
    bad_c, dev_c = core.hd_interval(a, c, psi_c, h, dw, dy_c, scratch)
    bad_p, dev_p = pyref.hd_interval(a, c, psi_p, h, dw, dy_p, scratch.copy())
    assert bad_c == bad_p == -1
    assert abs(dev_c - dev_p) < 1e-10
    np.testing.assert_allclose(psi_c, psi_p, atol=1e-9)
    np.testing.assert_allclose(dy_c, dy_p, atol=1e-9)
    assert abs(np.linalg.norm(psi_c) - 1.0) < 1e-12


def test_hd_norm_guard_trips(operators):
    # an absurd step has to be rejected, not silently renormalized
    core = _compiled_or_skip()
    a, c, psi0 = operators
    d = psi0.shape[0]
    dw = np.full(10, 5.0)
    dy = np.empty(10)
    scratch = np.empty((6, d), dtype=np.complex128)
    bad, dev = core.hd_interval(a, c, psi0.copy(), 1.0, dw, dy, scratch)
    assert bad >= 0 and dev > pyref.HD_NORM_GUARD


def test_scratch_validation(operators):
    core = _compiled_or_skip()
    a, _, psi0 = operators
    with pytest.raises(ValueError):
        core.pd_interval(a, psi0.copy(), 1e-3, 10, -1.0,
                         np.empty((2, psi0.shape[0]), dtype=np.complex128))
