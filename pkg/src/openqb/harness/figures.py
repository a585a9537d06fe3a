"""Figure-reproduction presets.

Each preset binds the published parameter values (couplings, sizes, trajectory
counts) to runner calls, with grid resolutions and dissipation-rate lists
reduced to desk scale where the source leaves them unstated.  Presets emit
plot-ready CSV columns plus a metadata file recording all parameters and
seeds; plotting itself is out of scope.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from ..lindblad import IntegratorOptions, default_dt
from ..models import DickeConfig, SpinSpinConfig
from ..thermo import BatterySpectrum, enhancement_ratio
from ..trajectories import UnravelingKind, run_ensemble
from .config import ExperimentConfig, ScalingSpec, SweepSpec
from .io import environment_info, write_csv, write_meta
from .runner import run_experiment, run_scaling_study, run_sweep

__all__ = ["FIGURE_IDS", "reproduce_figure"]

FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4",
              "em_scaling", "em_efficiency", "em_quadratures")

_DEFAULT_SEED = 20260810


def _spin_spin_cfg(g_b, g_c, gamma, **kw) -> ExperimentConfig:
    base = dict(
        model_kind="spin_spin",
        model=SpinSpinConfig(omega=1.0, g_b=g_b, g_c=g_c, gamma=gamma),
        master_seed=_DEFAULT_SEED,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def _dicke_cfg(lambda_bar, kappa, n_tls, **kw) -> ExperimentConfig:
    base = dict(
        model_kind="dicke",
        model=DickeConfig(omega=1.0, lambda_bar=lambda_bar, kappa=kappa, n_tls=n_tls),
        master_seed=_DEFAULT_SEED,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def _fig1(out_dir: str, n_traj: int, seed: int, workers: int) -> list[Path]:
    """Spin-spin charging curves: weak (g_B = omega/10, g_C = omega/5) and
    strong (g_B = omega, g_C = 2 omega) coupling, homodyne monitoring,
    a desk-scale list of loss rates."""
    paths = []
    regimes = {"weak": (0.1, 0.2, 40.0), "strong": (1.0, 2.0, 15.0)}
    gammas = (0.0, 0.1, 0.5)
    for name, (g_b, g_c, t_max) in regimes.items():
        for gamma in gammas:
            cfg = _spin_spin_cfg(
                g_b, g_c, gamma,
                unraveling="none" if gamma == 0.0 else "hd",
                n_traj=n_traj, master_seed=seed, t_max=t_max, n_samples=401,
                out_dir=out_dir, label=f"fig1/{name}_gamma{gamma:g}",
                workers=workers,
            )
            res = run_experiment(cfg)
            paths += [res.csv_path, res.meta_path]
    return paths


def _fig2(out_dir: str, n_traj: int, seed: int, workers: int) -> list[Path]:
    """Collective-battery charging curves at lambda_bar = omega, N = 6, under
    photodetection, for a small and a moderate loss rate."""
    paths = []
    for kappa in (0.5, 2.0):
        cfg = _dicke_cfg(
            1.0, kappa, 6,
            unraveling="pd", n_traj=n_traj, master_seed=seed,
            t_max=5.0, n_samples=501,
            out_dir=out_dir, label=f"fig2/kappa{kappa:g}", workers=workers,
        )
        res = run_experiment(cfg)
        paths += [res.csv_path, res.meta_path]
    return paths


def _dicke_sweep(out_dir: str, label: str, n_traj: int, seed: int,
                 workers: int) -> list[Path]:
    """Shared coupling-vs-loss grid behind fig3, fig4 and em_efficiency:
    one sweep emits the ergotropy, enhancement-ratio and efficiency columns
    for both detection schemes."""
    template = _dicke_cfg(
        1.0, 0.5, 6,
        n_traj=n_traj, master_seed=seed, t_max=6.0, n_samples=241,
        out_dir=out_dir, label=label, workers=workers,
    )
    spec = SweepSpec(
        axis1_name="lambda_bar", axis1_values=(0.5, 1.0, 1.5, 2.0),
        axis2_name="kappa", axis2_values=(0.1, 0.5, 1.0, 2.0),
        template=template, unravelings=("hd", "pd"),
    )
    res = run_sweep(spec)
    return [res.csv_path, res.meta_path]


def _em_scaling(out_dir: str, n_traj: int, seed: int, workers: int) -> list[Path]:
    """Peak energy/power/ergotropy vs N under photodetection at moderate loss."""
    template = _dicke_cfg(
        1.0, 0.5, 2,
        unraveling="pd", n_traj=n_traj, master_seed=seed,
        t_max=4.0, n_samples=401,
        out_dir=out_dir, label="em_scaling", workers=workers,
    )
    res = run_scaling_study(ScalingSpec(n_values=(2, 3, 4, 6), template=template))
    return [res.csv_path, res.meta_path]


def _em_quadratures(out_dir: str, n_traj: int, seed: int, workers: int) -> list[Path]:
    """Homodyne quadrature comparison: ratio of the daemonic ergotropy measured
    at theta = pi/2 to theta = 0 over a desk-scale coupling-vs-loss grid, N = 6.

    Read-out times come from the ensemble-mean conditional energy (energy has
    the same expectation on conditional and unconditional states), so no
    density-matrix integration is needed per cell.
    """
    t_start = time.perf_counter()
    n_tls = 6
    lambdas = (0.5, 1.0, 2.0)
    kappas = (0.5, 1.0, 2.0)
    header = ["lambda_bar", "kappa", "t_star",
              "daemonic_ergotropy_theta0", "daemonic_ergotropy_theta90",
              "quadrature_ratio", "status"]
    rows: list[list] = []
    for lam in lambdas:
        for kap in kappas:
            try:
                cfg = _dicke_cfg(lam, kap, n_tls, n_traj=n_traj, master_seed=seed,
                                 t_max=5.0, n_samples=101, out_dir=out_dir,
                                 workers=workers)
                model = cfg.build_model()
                opts = IntegratorOptions.from_grid(
                    cfg.t_max, cfg.n_samples, default_dt(model))
                spectrum = BatterySpectrum.from_levels(model.h_battery_spectrum, "full")
                e0 = run_ensemble(model, opts, UnravelingKind.homodyne(0.0),
                                  n_traj, seed, spectrum=spectrum,
                                  workers=workers or None)
                e90 = run_ensemble(model, opts, UnravelingKind.homodyne(math.pi / 2),
                                   n_traj, seed, spectrum=spectrum,
                                   workers=workers or None)
                i_star = int(np.argmax(e0.energy_mean))
                a, b = float(e0.ergotropy_mean[i_star]), float(e90.ergotropy_mean[i_star])
                rows.append([lam, kap, float(opts.sampling_times[i_star]),
                             a, b, enhancement_ratio(b, a), "ok"])
            except Exception as exc:
                rows.append([lam, kap] + [float("nan")] * 4 + [f"error: {exc}"])
    out = Path(out_dir) / "em_quadratures"
    csv_path = write_csv(out / "quadratures.csv", header, rows)
    meta_path = write_meta(out / "meta.json", {
        "kind": "em_quadratures",
        "n_tls": n_tls,
        "lambda_bar_values": list(lambdas),
        "kappa_values": list(kappas),
        "n_traj": n_traj,
        "master_seed": seed,
        "environment": environment_info(),
        "wall_clock_seconds": time.perf_counter() - t_start,
    })
    return [csv_path, meta_path]


def reproduce_figure(figure_id: str, out_dir: str = "results", *,
                     n_traj: int | None = None, seed: int = _DEFAULT_SEED,
                     workers: int = 0) -> list[Path]:
    """Run one figure preset; returns the files written.

    fig3, fig4 and em_efficiency share one sweep execution (identical numbers,
    different columns of interest); running any one of them produces all the
    columns the three figures need.
    """
    if figure_id not in FIGURE_IDS:
        raise ValueError(f"unknown figure id {figure_id!r}; known: {FIGURE_IDS}")
    if figure_id == "fig1":
        return _fig1(out_dir, n_traj or 1000, seed, workers)
    if figure_id == "fig2":
        return _fig2(out_dir, n_traj or 1000, seed, workers)
    if figure_id in ("fig3", "fig4", "em_efficiency"):
        return _dicke_sweep(out_dir, figure_id, n_traj or 200, seed, workers)
    if figure_id == "em_scaling":
        return _em_scaling(out_dir, n_traj or 200, seed, workers)
    return _em_quadratures(out_dir, n_traj or 200, seed, workers)
