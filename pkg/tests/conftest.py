import numpy as np
import pytest

from openqb import DickeConfig, IntegratorOptions, SpinSpinConfig, build_dicke, build_spin_spin


def random_density(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return rho / rho.trace().real


def random_pure(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def haar_unitaries(rng, n, d):
    """Batch of Haar-random unitaries via QR of Ginibre matrices."""
    g = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    q, r = np.linalg.qr(g)
    phases = np.diagonal(r, axis1=-2, axis2=-1).copy()
    phases /= np.abs(phases)
    return q * phases[:, None, :].conj()


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture(scope="session")
def tiny_spin_spin():
    """Weak-coupling lossy spin-spin model small enough for fast ensembles."""
    return build_spin_spin(SpinSpinConfig(omega=1.0, g_b=0.1, g_c=0.1, gamma=0.2, n_ph=5))


@pytest.fixture(scope="session")
def tiny_dicke():
    return build_dicke(DickeConfig(omega=1.0, lambda_bar=0.8, kappa=0.4, n_tls=2, n_ph=8))


def grid(t_max, n_samples, dt):
    return IntegratorOptions.from_grid(t_max=t_max, n_samples=n_samples, dt=dt)
