"""Conditional dynamics: stochastic Schrödinger equation unravelings.

Photodetection (PD) uses the waiting-time (Monte Carlo wavefunction)
algorithm: the unnormalized state evolves under -i(H - i c†c/2); when its
squared norm crosses a pre-drawn uniform threshold the jump time is localized
by bisection, c is applied, and the threshold is redrawn.  This is equivalent
in law to sampling the Poisson increment dN_t each step but has no O(dt) bias
in the jump times (a literal Euler-dN stepper is kept behind a debug flag for
cross-checks).

Homodyne (HD) uses Euler-Maruyama steps of the normalized diffusive SSE with
per-step renormalization; the local-oscillator phase theta enters through
c -> e^{-i theta} c in all measurement back-action terms, and the photocurrent
increment dy = <c_th + c_th†> dt + dw is recorded per step.

Trajectories are embarrassingly parallel.  Each owns an RNG stream seeded by
the counter-based Philox generator keyed with (master_seed, trajectory_index),
so the stream assignment cannot depend on scheduling; ensemble reductions run
in fixed trajectory-index order, making serial and parallel runs bitwise
identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from ._kernels import backend_name, get_backend
from .hilbert import DensityOp, SpaceLayout, reduced_from_vector
from .lindblad import CUTOFF_WARN_THRESHOLD, IntegratorOptions
from .models import ModelInstance
from .thermo import BatterySpectrum, ergotropy_from_populations

__all__ = [
    "TrajectoryError",
    "UnravelingKind",
    "TrajectoryRecord",
    "EnsembleSummary",
    "run_pd_trajectory",
    "run_hd_trajectory",
    "run_ensemble",
]

# ||c psi|| below this fraction of ||psi|| at a demanded jump signals an
# inconsistent state (probability-zero event)
_COLLAPSE_GUARD = 1e-14


class TrajectoryError(RuntimeError):
    pass


@dataclass(frozen=True)
class UnravelingKind:
    """Which detector monitors the leaked photons."""

    variant: str  # "photodetection" | "homodyne"
    theta: float = 0.0

    def __post_init__(self):
        if self.variant not in ("photodetection", "homodyne"):
            raise ValueError(f"unknown unraveling {self.variant!r}")
        if not 0.0 <= self.theta < 2.0 * math.pi:
            raise ValueError(f"theta must lie in [0, 2*pi), got {self.theta}")

    @classmethod
    def photodetection(cls) -> "UnravelingKind":
        return cls("photodetection")

    @classmethod
    def homodyne(cls, theta: float = 0.0) -> "UnravelingKind":
        return cls("homodyne", theta)

    @property
    def short(self) -> str:
        return "pd" if self.variant == "photodetection" else "hd"


@dataclass
class TrajectoryRecord:
    """One conditional evolution, sampled on the requested grid.

    ``record`` is the measurement record: jump times for PD, the per-step
    photocurrent increments dy for HD.  ``norms_check`` is the worst norm
    diagnostic encountered (pre-renormalization |norm-1| for HD, bisection
    residual |norm^2 - r| at jumps for PD).
    """

    seed: int
    kind: UnravelingKind
    times: np.ndarray
    battery_states: np.ndarray  # [n_times, d_B, d_B]
    record: np.ndarray
    norms_check: float
    energy: np.ndarray
    purity: np.ndarray
    ergotropy: np.ndarray
    n_jumps: int
    cutoff_max_population: float

    def conditional_battery_states(self) -> list[DensityOp]:
        layout = SpaceLayout((self.battery_states.shape[-1],))
        return [DensityOp(m, layout) for m in self.battery_states]

    def downsampled_record(self, bin_size: int) -> np.ndarray:
        """Coarse-grained homodyne record: dy summed over consecutive bins
        (the integrated photocurrent per bin).  PD records are jump times and
        are returned unchanged."""
        if self.kind.variant == "photodetection" or bin_size <= 1:
            return self.record
        n = (self.record.shape[0] // bin_size) * bin_size
        return self.record[:n].reshape(-1, bin_size).sum(axis=1)


@dataclass
class EnsembleSummary:
    """Per-time Monte Carlo statistics over an ensemble of trajectories."""

    kind: UnravelingKind
    n_traj: int
    master_seed: int
    times: np.ndarray
    ergotropy_mean: np.ndarray
    ergotropy_std: np.ndarray
    purity_mean: np.ndarray
    energy_mean: np.ndarray
    mean_battery_states: np.ndarray  # [n_times, d_B, d_B]
    mean_full_states: np.ndarray | None  # [n_times, d, d] when tracked
    n_jumps: np.ndarray  # per trajectory (all zeros for HD)
    dw_sum: float
    dw_sumsq: float
    dw_count: int
    norms_check_max: float
    cutoff_max_population: float
    backend: str = field(default_factory=backend_name)

    @property
    def cutoff_warning(self) -> bool:
        return self.cutoff_max_population > CUTOFF_WARN_THRESHOLD


@dataclass(frozen=True)
class _Context:
    """Picklable payload shared by all trajectory workers of one ensemble."""

    a_mat: np.ndarray
    c_raw: np.ndarray
    c_theta: np.ndarray
    h_mat: np.ndarray | None  # only for the Euler-dN debug stepper
    psi0: np.ndarray
    dims: tuple[int, ...]
    battery_index: int
    cavity_index: int
    h_batt: np.ndarray
    energies: np.ndarray
    times: np.ndarray
    dt: float
    variant: str
    master_seed: int
    track_psi: bool = False
    record_dy: bool = False
    euler_dn: bool = False


@dataclass
class _TrajResult:
    ergotropy: np.ndarray
    purity: np.ndarray
    energy: np.ndarray
    battery: np.ndarray
    psi: np.ndarray | None
    jump_times: np.ndarray
    dy: np.ndarray | None
    dw_sum: float
    dw_sumsq: float
    dw_count: int
    cutoff_max: float
    norms_check: float


def _substeps(t0: float, t1: float, dt: float) -> tuple[int, float]:
    n = max(1, math.ceil((t1 - t0) / dt - 1e-12))
    return n, (t1 - t0) / n


def _build_context(model: ModelInstance, opts: IntegratorOptions, kind: UnravelingKind,
                   master_seed: int, spectrum: BatterySpectrum, *,
                   track_psi: bool = False, record_dy: bool = False,
                   euler_dn: bool = False) -> _Context:
    h = model.h_total.matrix
    c = model.jump_op.matrix
    k = c.conj().T @ c
    a = -1j * h - 0.5 * k
    theta = kind.theta if kind.variant == "homodyne" else 0.0
    return _Context(
        a_mat=np.ascontiguousarray(a),
        c_raw=np.ascontiguousarray(c),
        c_theta=np.ascontiguousarray(np.exp(-1j * theta) * c),
        h_mat=np.ascontiguousarray(h) if euler_dn else None,
        psi0=model.initial_state.amplitudes.copy(),
        dims=model.layout.dims,
        battery_index=model.battery_index,
        cavity_index=model.cavity_index,
        h_batt=model.h_battery.matrix,
        energies=spectrum.expanded(),
        times=opts.sampling_times,
        dt=opts.dt,
        variant=kind.variant,
        master_seed=int(master_seed),
        track_psi=track_psi,
        record_dy=record_dy,
        euler_dn=euler_dn,
    )


def _trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    key = np.array([master_seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _collapse(c: np.ndarray, psi: np.ndarray) -> None:
    phi = c @ psi
    nrm = np.linalg.norm(phi)
    if nrm <= _COLLAPSE_GUARD * np.linalg.norm(psi):
        raise TrajectoryError("jump demanded but c|psi> = 0: inconsistent state")
    psi[:] = phi / nrm


def _advance_pd(kern, ctx: _Context, psi, t0, t1, r, rng, jump_times, scratch):
    """Waiting-time advance of the unnormalized state over [t0, t1].

    Returns (r, max_resid); appends jump times as they occur.  A jump splits
    the step it lands in: the remainder is integrated as one partial step so
    the grid realigns afterwards.
    """
    n_sub, h = _substeps(t0, t1, ctx.dt)
    steps_left = n_sub
    t_cur = t0
    partial_h = 0.0
    max_resid = 0.0
    while steps_left > 0 or partial_h > 0.0:
        if partial_h > 0.0:
            n_done, s_frac, jumped = kern.pd_interval(ctx.a_mat, psi, partial_h, 1, r, scratch)
            if not jumped:
                t_cur += partial_h
                partial_h = 0.0
                continue
            t_jump = t_cur + s_frac * partial_h
            partial_h = partial_h * (1.0 - s_frac)
        else:
            n_done, s_frac, jumped = kern.pd_interval(ctx.a_mat, psi, h, steps_left, r, scratch)
            if not jumped:
                break
            t_jump = t_cur + (n_done + s_frac) * h
            steps_left -= n_done + 1
            partial_h = h * (1.0 - s_frac)
        max_resid = max(max_resid, abs(np.vdot(psi, psi).real - r))
        _collapse(ctx.c_raw, psi)
        jump_times.append(t_jump)
        r = rng.random()
        t_cur = t_jump
    return r, max_resid


def _advance_pd_euler(ctx: _Context, psi, t0, t1, rng, jump_times):
    """Debug stepper: literal Euler sampling of the Poisson increment.

    O(dt)-biased but a direct transcription of the jump SSE; kept for
    statistical cross-checks against the waiting-time algorithm.
    """
    n_sub, h = _substeps(t0, t1, ctx.dt)
    k_mat = ctx.c_raw.conj().T @ ctx.c_raw
    t_cur = t0
    for _ in range(n_sub):
        kpsi = k_mat @ psi
        exp_cc = np.vdot(psi, kpsi).real
        dpsi = (-1j * (ctx.h_mat @ psi) + 0.5 * (exp_cc * psi - kpsi)) * h
        if rng.random() < exp_cc * h:
            dpsi += (ctx.c_raw @ psi) / math.sqrt(exp_cc) - psi
            jump_times.append(t_cur + h)
        psi += dpsi
        psi /= np.linalg.norm(psi)
        t_cur += h
    return 0.0


def _simulate_one(ctx: _Context, index: int) -> _TrajResult:
    kern = get_backend()
    rng = _trajectory_rng(ctx.master_seed, index)
    psi = ctx.psi0.copy()
    d = psi.shape[0]
    d_b = ctx.dims[ctx.battery_index]
    n_times = ctx.times.shape[0]
    scratch = np.empty((6, d), dtype=np.complex128)

    battery = np.empty((n_times, d_b, d_b), dtype=np.complex128)
    psis = np.empty((n_times, d), dtype=np.complex128) if ctx.track_psi else None
    energy = np.empty(n_times)
    purity = np.empty(n_times)
    cutoff_max = 0.0
    norms_check = 0.0

    pd = ctx.variant == "photodetection"
    jump_times: list[float] = []
    dy_chunks: list[np.ndarray] = []
    dw_sum = 0.0
    dw_sumsq = 0.0
    dw_count = 0
    r = rng.random() if pd else -1.0

    non_cavity = tuple(ax for ax in range(len(ctx.dims)) if ax != ctx.cavity_index)

    def sample(i: int) -> None:
        nonlocal cutoff_max
        psi_n = psi / np.linalg.norm(psi)
        if psis is not None:
            psis[i] = psi_n
        rho_b = reduced_from_vector(psi_n, ctx.dims, (ctx.battery_index,))
        battery[i] = rho_b
        energy[i] = np.einsum("ij,ji->", ctx.h_batt, rho_b).real
        purity[i] = np.vdot(rho_b, rho_b).real
        p_cav = (np.abs(psi_n) ** 2).reshape(ctx.dims).sum(axis=non_cavity)
        top = p_cav[-1] + (p_cav[-2] if p_cav.shape[0] >= 2 else 0.0)
        cutoff_max = max(cutoff_max, float(top))

    sample(0)
    for i in range(n_times - 1):
        t0, t1 = ctx.times[i], ctx.times[i + 1]
        if pd:
            if ctx.euler_dn:
                resid = _advance_pd_euler(ctx, psi, t0, t1, rng, jump_times)
            else:
                r, resid = _advance_pd(kern, ctx, psi, t0, t1, r, rng, jump_times, scratch)
            norms_check = max(norms_check, resid)
        else:
            n_sub, h = _substeps(t0, t1, ctx.dt)
            dw = rng.standard_normal(n_sub) * math.sqrt(h)
            dy = np.empty(n_sub)
            bad, dev = kern.hd_interval(ctx.a_mat, ctx.c_theta, psi, h, dw, dy, scratch)
            norms_check = max(norms_check, dev)
            if bad >= 0:
                raise TrajectoryError(
                    f"homodyne norm moved by {dev:.3e} in one step near t = "
                    f"{t0 + bad * h:.6g}: dt = {ctx.dt:.3e} too large"
                )
            dw_sum += dw.sum()
            dw_sumsq += float(dw @ dw)
            dw_count += n_sub
            if ctx.record_dy:
                dy_chunks.append(dy)
        sample(i + 1)

    pops = np.clip(np.linalg.eigvalsh(battery)[..., ::-1], 0.0, None)
    erg = ergotropy_from_populations(pops, ctx.energies, energy)

    return _TrajResult(
        ergotropy=erg,
        purity=purity,
        energy=energy,
        battery=battery,
        psi=psis,
        jump_times=np.asarray(jump_times, dtype=float),
        dy=np.concatenate(dy_chunks) if dy_chunks else None,
        dw_sum=dw_sum,
        dw_sumsq=dw_sumsq,
        dw_count=dw_count,
        cutoff_max=cutoff_max,
        norms_check=norms_check,
    )


def _spectrum_for(model: ModelInstance, spectrum: BatterySpectrum | None,
                  ergotropy_space: str) -> BatterySpectrum:
    if spectrum is not None:
        return spectrum
    return BatterySpectrum.from_levels(model.h_battery_spectrum, ergotropy_space)


def _single_record(model, opts, kind, seed, spectrum, ergotropy_space,
                   euler_dn=False) -> TrajectoryRecord:
    spec = _spectrum_for(model, spectrum, ergotropy_space)
    ctx = _build_context(model, opts, kind, seed, spec,
                         record_dy=(kind.variant == "homodyne"), euler_dn=euler_dn)
    # threaded BLAS is pure overhead on the kernel-sized matvecs, and pinning
    # it keeps serial and parallel runs on the same arithmetic
    with threadpool_limits(limits=1):
        res = _simulate_one(ctx, 0)
    record = res.jump_times if kind.variant == "photodetection" else res.dy
    return TrajectoryRecord(
        seed=int(seed),
        kind=kind,
        times=opts.sampling_times.copy(),
        battery_states=res.battery,
        record=record,
        norms_check=res.norms_check,
        energy=res.energy,
        purity=res.purity,
        ergotropy=res.ergotropy,
        n_jumps=int(res.jump_times.shape[0]),
        cutoff_max_population=res.cutoff_max,
    )


def run_pd_trajectory(model: ModelInstance, opts: IntegratorOptions, seed: int, *,
                      spectrum: BatterySpectrum | None = None,
                      ergotropy_space: str = "full",
                      euler_dn: bool = False) -> TrajectoryRecord:
    """One photodetection trajectory; ``record`` holds the jump times."""
    return _single_record(model, opts, UnravelingKind.photodetection(), seed,
                          spectrum, ergotropy_space, euler_dn=euler_dn)


def run_hd_trajectory(model: ModelInstance, opts: IntegratorOptions, theta: float,
                      seed: int, *, spectrum: BatterySpectrum | None = None,
                      ergotropy_space: str = "full") -> TrajectoryRecord:
    """One homodyne trajectory; ``record`` holds dy per integration step."""
    return _single_record(model, opts, UnravelingKind.homodyne(theta), seed,
                          spectrum, ergotropy_space)


# worker-process state for ProcessPoolExecutor (set once per worker by the
# initializer; fork + initargs keeps the payload pickling to one copy)
_WORKER_CTX: _Context | None = None


def _worker_init(ctx: _Context) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx
    threadpool_limits(limits=1)


def _worker_run(index: int) -> _TrajResult:
    return _simulate_one(_WORKER_CTX, index)


def run_ensemble(model: ModelInstance, opts: IntegratorOptions, kind: UnravelingKind,
                 n_traj: int, master_seed: int, *,
                 spectrum: BatterySpectrum | None = None,
                 ergotropy_space: str = "full",
                 workers: int | None = None,
                 track_full_average: bool = False) -> EnsembleSummary:
    """Run ``n_traj`` independent trajectories and aggregate per-time statistics.

    Results are bit-reproducible for fixed (master_seed, n_traj, dt): the
    per-trajectory streams are keyed by index and the reduction runs in index
    order whether the execution is serial (workers=1) or parallel.
    ``track_full_average`` accumulates the ensemble-averaged full-system
    density matrix (needed by the unraveling-consistency checks).
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    spec = _spectrum_for(model, spectrum, ergotropy_space)
    ctx = _build_context(model, opts, kind, master_seed, spec,
                         track_psi=track_full_average)

    n_times = opts.sampling_times.shape[0]
    d = model.dim
    d_b = model.battery_dim
    erg = np.empty((n_traj, n_times))
    pur = np.empty((n_traj, n_times))
    ene = np.empty((n_traj, n_times))
    batt_sum = np.zeros((n_times, d_b, d_b), dtype=np.complex128)
    full_sum = np.zeros((n_times, d, d), dtype=np.complex128) if track_full_average else None
    n_jumps = np.zeros(n_traj, dtype=np.int64)
    dw_sum = 0.0
    dw_sumsq = 0.0
    dw_count = 0
    norms_max = 0.0
    cutoff_max = 0.0

    def consume(index: int, res: _TrajResult) -> None:
        nonlocal dw_sum, dw_sumsq, dw_count, norms_max, cutoff_max
        erg[index] = res.ergotropy
        pur[index] = res.purity
        ene[index] = res.energy
        batt_sum[:] += res.battery
        if full_sum is not None:
            full_sum[:] += np.einsum("ti,tj->tij", res.psi, res.psi.conj())
        n_jumps[index] = res.jump_times.shape[0]
        dw_sum += res.dw_sum
        dw_sumsq += res.dw_sumsq
        dw_count += res.dw_count
        norms_max = max(norms_max, res.norms_check)
        cutoff_max = max(cutoff_max, res.cutoff_max)

    if workers is None:
        import os
        workers = os.cpu_count() or 1
    workers = max(1, min(int(workers), n_traj))

    if workers == 1:
        global _WORKER_CTX
        _WORKER_CTX = ctx
        with threadpool_limits(limits=1):
            for i in range(n_traj):
                try:
                    consume(i, _worker_run(i))
                except TrajectoryError as exc:
                    raise TrajectoryError(f"trajectory {i}: {exc}") from exc
    else:
        chunk = max(1, n_traj // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                                 initargs=(ctx,)) as pool:
            results = pool.map(_worker_run, range(n_traj), chunksize=chunk)
            for i in range(n_traj):
                try:
                    consume(i, next(results))
                except TrajectoryError as exc:
                    raise TrajectoryError(f"trajectory {i}: {exc}") from exc

    return EnsembleSummary(
        kind=kind,
        n_traj=n_traj,
        master_seed=int(master_seed),
        times=opts.sampling_times.copy(),
        ergotropy_mean=erg.mean(axis=0),
        ergotropy_std=erg.std(axis=0, ddof=1) if n_traj > 1 else np.zeros(n_times),
        purity_mean=pur.mean(axis=0),
        energy_mean=ene.mean(axis=0),
        mean_battery_states=batt_sum / n_traj,
        mean_full_states=(full_sum / n_traj) if full_sum is not None else None,
        n_jumps=n_jumps,
        dw_sum=dw_sum,
        dw_sumsq=dw_sumsq,
        dw_count=dw_count,
        norms_check_max=norms_max,
        cutoff_max_population=cutoff_max,
    )
