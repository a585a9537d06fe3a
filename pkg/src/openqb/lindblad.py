"""Unconditional open-system evolution.

Fixed-step classical RK4 on the Markovian master equation

    d rho/dt = -i[H, rho] + c rho c† - {c†c, rho}/2,

integrated in matrix form (d^2 unknowns).  Fixed steps keep runs reproducible
and make the step-halving self-check meaningful; the sampling grid is
decoupled from the integration grid (each sampling interval is subdivided into
equal sub-steps no longer than ``dt``).

``evolve_closed`` is the cheap companion for the zero-dissipation baseline: it
propagates the pure state directly (c = 0 keeps purity exact), which is ~d
times cheaper than the density-matrix path and mathematically identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import DensityOp, LinearOp, SpaceLayout, purity, reduced_from_vector
from .models import ModelInstance

__all__ = [
    "IntegrationError",
    "IntegratorOptions",
    "UnconditionalSeries",
    "default_dt",
    "lindblad_rhs",
    "evolve_unconditional",
    "evolve_closed",
]

TRACE_RENORM_TOL = 1e-9
TRACE_ABORT_TOL = 1e-6
POSITIVITY_ABORT_TOL = -1e-6
CUTOFF_WARN_THRESHOLD = 1e-6


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorOptions:
    """Time-grid controls shared by the unconditional and trajectory solvers.

    ``dt`` is an upper bound on the integration step (units 1/omega);
    ``sampling_times`` must be strictly increasing and start at 0;
    ``tolerance`` is the target for the step-halving consistency check.
    """

    dt: float
    sampling_times: np.ndarray
    hermitize: bool = True
    tolerance: float = 1e-6

    def __post_init__(self):
        t = np.asarray(self.sampling_times, dtype=float)
        object.__setattr__(self, "sampling_times", t)
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if t.ndim != 1 or t.shape[0] < 1:
            raise ValueError("sampling_times must be a non-empty 1-D grid")
        if abs(t[0]) > 1e-15:
            raise ValueError(f"sampling_times must start at 0, got {t[0]}")
        if t.shape[0] > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("sampling_times must be strictly increasing")

    @classmethod
    def from_grid(cls, t_max: float, n_samples: int, dt: float, **kw) -> "IntegratorOptions":
        if t_max <= 0 or n_samples < 2:
            raise ValueError("need t_max > 0 and n_samples >= 2")
        return cls(dt=dt, sampling_times=np.linspace(0.0, t_max, n_samples), **kw)

    def halved(self) -> "IntegratorOptions":
        return IntegratorOptions(self.dt / 2.0, self.sampling_times,
                                 self.hermitize, self.tolerance)

    def substeps(self, t0: float, t1: float) -> tuple[int, float]:
        n = max(1, math.ceil((t1 - t0) / self.dt - 1e-12))
        return n, (t1 - t0) / n


@dataclass
class UnconditionalSeries:
    """Sampled master-equation solution with battery read-outs.

    ``states`` holds the full-system density matrices (may be None when the
    caller asked to drop them); ``observables`` carries named real series —
    energy and purity are filled here, ergotropy by the thermo layer.
    """

    times: np.ndarray
    states: list[DensityOp] | None
    reduced_battery: list[DensityOp]
    observables: dict[str, np.ndarray]
    min_eigenvalue: float
    max_trace_drift: float
    cutoff_max_population: float

    def battery_stack(self) -> np.ndarray:
        return np.stack([r.matrix for r in self.reduced_battery])


def default_dt(model: ModelInstance) -> float:
    """10^-3 over the fastest configured rate of the model."""
    cfg = model.config
    if model.label == "spin_spin":
        scale = max(cfg.omega, cfg.g_b, cfg.g_c, cfg.gamma)
    else:
        scale = max(cfg.omega, cfg.lambda_bar, 2.0 * cfg.kappa)
    return 1e-3 / scale


def lindblad_rhs(rho: DensityOp | np.ndarray, h: LinearOp | np.ndarray,
                 c: LinearOp | np.ndarray) -> np.ndarray:
    """Right-hand side -i[H,rho] + c rho c† - {c†c, rho}/2 (traceless)."""
    r = rho.matrix if isinstance(rho, DensityOp) else rho
    hm = h.matrix if isinstance(h, LinearOp) else h
    cm = c.matrix if isinstance(c, LinearOp) else c
    if r.shape != hm.shape or r.shape != cm.shape:
        raise ValueError(f"dimension mismatch: rho {r.shape}, H {hm.shape}, c {cm.shape}")
    return _rhs(r, hm, cm, cm.conj().T @ cm)


def _rhs(r, hm, cm, k):
    # for Hermitian rho: rho H = (H rho)†,  rho K = (K rho)† — saves two gemms
    hr = hm @ r
    kr = k @ r
    cr = cm @ r
    return -1j * (hr - hr.conj().T) + cr @ cm.conj().T - 0.5 * (kr + kr.conj().T)


def _rk4_matrix_step(r, hm, cm, k, h):
    k1 = _rhs(r, hm, cm, k)
    k2 = _rhs(r + (0.5 * h) * k1, hm, cm, k)
    k3 = _rhs(r + (0.5 * h) * k2, hm, cm, k)
    k4 = _rhs(r + h * k3, hm, cm, k)
    return r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _cutoff_population(probs_nd: np.ndarray, cavity_axis: int) -> float:
    p_cav = probs_nd.sum(axis=tuple(a for a in range(probs_nd.ndim) if a != cavity_axis))
    return float(p_cav[-1] + p_cav[-2]) if p_cav.shape[0] >= 2 else float(p_cav[-1])


def evolve_unconditional(model: ModelInstance, opts: IntegratorOptions,
                         keep_full_states: bool = True) -> UnconditionalSeries:
    """Integrate the master equation and sample it on ``opts.sampling_times``.

    After every step the state is re-Hermitized (if opts.hermitize) and the
    trace is renormalized once its drift exceeds 1e-9; drift beyond 1e-6 or a
    sampled eigenvalue below -1e-6 aborts with diagnostics.
    """
    hm = model.h_total.matrix
    cm = model.jump_op.matrix
    k = cm.conj().T @ cm
    psi0 = model.initial_state.amplitudes
    r = np.outer(psi0, psi0.conj())

    times = opts.sampling_times
    dims = model.layout.dims
    states: list[DensityOp] | None = [] if keep_full_states else None
    reduced = []
    energy = np.empty(times.shape[0])
    batt_purity = np.empty(times.shape[0])
    h_batt = model.h_battery.matrix
    batt_layout = SpaceLayout((model.battery_dim,))

    min_eig = np.inf
    max_drift = 0.0
    cutoff_max = 0.0

    def sample(idx, r):
        nonlocal min_eig, cutoff_max
        lo = float(np.linalg.eigvalsh(r)[0])
        min_eig = min(min_eig, lo)
        if lo < POSITIVITY_ABORT_TOL:
            raise IntegrationError(
                f"positivity breakdown at t = {times[idx]:.6g}: min eigenvalue {lo:.3e}; "
                "reduce dt"
            )
        if states is not None:
            states.append(DensityOp(r.copy(), model.layout))
        rho_b = _reduce(r, dims, model.battery_index)
        reduced.append(DensityOp(rho_b, batt_layout))
        energy[idx] = np.einsum("ij,ji->", h_batt, rho_b).real
        batt_purity[idx] = purity(rho_b)
        probs = np.abs(np.diag(r).real).reshape(dims)
        cutoff_max = max(cutoff_max, _cutoff_population(probs, model.cavity_index))

    sample(0, r)
    for i in range(times.shape[0] - 1):
        n_sub, h = opts.substeps(times[i], times[i + 1])
        for _ in range(n_sub):
            r = _rk4_matrix_step(r, hm, cm, k, h)
            if opts.hermitize:
                r = 0.5 * (r + r.conj().T)
            tr = r.trace().real
            drift = abs(tr - 1.0)
            max_drift = max(max_drift, drift)
            if drift > TRACE_ABORT_TOL:
                raise IntegrationError(
                    f"trace drift {drift:.3e} beyond {TRACE_ABORT_TOL} near "
                    f"t = {times[i]:.6g}: step too large"
                )
            if drift > TRACE_RENORM_TOL:
                r = r / tr
        sample(i + 1, r)

    return UnconditionalSeries(
        times=times.copy(),
        states=states,
        reduced_battery=reduced,
        observables={"energy": energy, "purity": batt_purity},
        min_eigenvalue=min_eig,
        max_trace_drift=max_drift,
        cutoff_max_population=cutoff_max,
    )


def _reduce(r: np.ndarray, dims: tuple[int, ...], keep: int) -> np.ndarray:
    n = len(dims)
    rest = [a for a in range(n) if a != keep]
    rr = r.reshape(dims + dims)
    perm = [keep, n + keep] + rest + [n + a for a in rest]
    d_keep = dims[keep]
    d_rest = int(np.prod([dims[a] for a in rest]))
    rr = rr.transpose(perm).reshape(d_keep, d_keep, d_rest, d_rest)
    return np.ascontiguousarray(np.einsum("ijkk->ij", rr))


def evolve_closed(model: ModelInstance, opts: IntegratorOptions) -> UnconditionalSeries:
    """Zero-dissipation baseline: RK4 on the Schrödinger equation for the pure
    global state, sampled like :func:`evolve_unconditional` (states=None)."""
    from threadpoolctl import threadpool_limits

    from ._kernels import get_backend

    kern = get_backend()
    a = (-1j * model.h_total.matrix).copy()
    psi = model.initial_state.amplitudes.copy()
    scratch = np.empty((6, psi.shape[0]), dtype=np.complex128)

    times = opts.sampling_times
    dims = model.layout.dims
    reduced = []
    energy = np.empty(times.shape[0])
    batt_purity = np.empty(times.shape[0])
    h_batt = model.h_battery.matrix
    batt_layout = SpaceLayout((model.battery_dim,))
    cutoff_max = 0.0

    def sample(idx, psi):
        nonlocal cutoff_max
        psi = psi / np.linalg.norm(psi)
        rho_b = reduced_from_vector(psi, dims, (model.battery_index,))
        reduced.append(DensityOp(rho_b, batt_layout))
        energy[idx] = np.einsum("ij,ji->", h_batt, rho_b).real
        batt_purity[idx] = purity(rho_b)
        probs = (np.abs(psi) ** 2).reshape(dims)
        cutoff_max = max(cutoff_max, _cutoff_population(probs, model.cavity_index))

    sample(0, psi)
    with threadpool_limits(limits=1):
        for i in range(times.shape[0] - 1):
            n_sub, h = opts.substeps(times[i], times[i + 1])
            kern.pd_interval(a, psi, h, n_sub, -1.0, scratch)
            sample(i + 1, psi)

    return UnconditionalSeries(
        times=times.copy(),
        states=None,
        reduced_battery=reduced,
        observables={"energy": energy, "purity": batt_purity},
        min_eigenvalue=0.0,
        max_trace_drift=0.0,
        cutoff_max_population=cutoff_max,
    )
