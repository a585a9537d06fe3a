"""Experiment orchestration: single runs, parameter sweeps, scaling studies.

Every run writes a CSV (series or grid) plus a JSON metadata sidecar carrying
the fully resolved configuration, seeds, warnings, wall-clock time and the
numeric-guard constants, so a result file is self-contained.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from ..lindblad import (
    CUTOFF_WARN_THRESHOLD,
    POSITIVITY_ABORT_TOL,
    TRACE_ABORT_TOL,
    TRACE_RENORM_TOL,
    IntegratorOptions,
    UnconditionalSeries,
    default_dt,
    evolve_closed,
    evolve_unconditional,
)
from ..hilbert import trace_distance
from ..models import ModelInstance, default_fock_cutoff
from ..thermo import (
    BatterySpectrum,
    DaemonicMetrics,
    WorkMetrics,
    charging_power,
    daemonic_efficiency,
    enhancement_ratio,
    ergotropy_from_populations,
)
from ..trajectories import EnsembleSummary, UnravelingKind, run_ensemble
from .config import ExperimentConfig, ScalingSpec, SweepSpec
from .io import environment_info, write_csv, write_meta, write_series_csv

__all__ = ["ExperimentResult", "SweepResult", "ScalingResult",
           "run_experiment", "run_sweep", "run_scaling_study"]

SERIES_COLUMNS = [
    "t",
    "energy",
    "power",
    "ergotropy_unconditional",
    "purity_unconditional",
    "daemonic_ergotropy",
    "daemonic_ergotropy_std",
    "conditional_purity_mean",
    "daemonic_efficiency",
    "ergotropy_ideal",
    "enhancement_ratio",
]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    model: ModelInstance
    times: np.ndarray
    columns: dict[str, np.ndarray]
    lindblad: UnconditionalSeries
    closed: UnconditionalSeries
    ensemble: EnsembleSummary | None
    work: WorkMetrics
    daemonic: DaemonicMetrics | None
    warnings: list[str]
    consistency_trace_distance: float | None
    csv_path: Path | None
    meta_path: Path | None

    @property
    def max_energy_index(self) -> int:
        return int(np.argmax(self.columns["energy"]))


def _series_ergotropy(series: UnconditionalSeries, spectrum: BatterySpectrum) -> np.ndarray:
    """Battery ergotropy per sampled time; also filled into the series'
    observables for downstream consumers."""
    batt = series.battery_stack()
    pops = np.clip(np.linalg.eigvalsh(batt)[..., ::-1], 0.0, None)
    eps = ergotropy_from_populations(pops, spectrum.expanded(),
                                     series.observables["energy"])
    series.observables["ergotropy"] = eps
    return eps


def _dissipation_free(cfg: ExperimentConfig) -> ExperimentConfig:
    off = "gamma" if cfg.model_kind == "spin_spin" else "kappa"
    return cfg.replace(model=dataclasses.replace(cfg.model, **{off: 0.0}))


def _kind_from_config(cfg: ExperimentConfig) -> UnravelingKind | None:
    if cfg.unraveling == "none":
        return None
    if cfg.unraveling == "pd":
        return UnravelingKind.photodetection()
    return UnravelingKind.homodyne(cfg.theta)


def _integrator_options(cfg: ExperimentConfig, model: ModelInstance) -> IntegratorOptions:
    dt = cfg.dt if cfg.dt > 0 else default_dt(model)
    return IntegratorOptions.from_grid(cfg.t_max, cfg.n_samples, dt)


def _guard_constants() -> dict:
    return {
        "trace_renorm_tol": TRACE_RENORM_TOL,
        "trace_abort_tol": TRACE_ABORT_TOL,
        "positivity_abort_tol": POSITIVITY_ABORT_TOL,
        "cutoff_warn_threshold": CUTOFF_WARN_THRESHOLD,
    }


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Lindblad baseline + zero-dissipation baseline + (optionally) the
    conditional ensemble; emits the time-series CSV and metadata sidecar."""
    t_start = time.perf_counter()
    model = cfg.build_model()
    opts = _integrator_options(cfg, model)
    spectrum = BatterySpectrum.from_levels(model.h_battery_spectrum, cfg.ergotropy_space)
    warnings: list[str] = []

    keep_states = cfg.keep_full_states or cfg.track_full_average
    lb = evolve_unconditional(model, opts, keep_full_states=keep_states)
    closed = evolve_closed(_dissipation_free(cfg).build_model(), opts)

    energy = lb.observables["energy"]
    eps = _series_ergotropy(lb, spectrum)
    eps0 = _series_ergotropy(closed, spectrum)
    n = opts.sampling_times.shape[0]
    work = WorkMetrics(
        times=opts.sampling_times,
        energy=energy,
        ergotropy=eps,
        power=charging_power(energy, opts.sampling_times),
        purity=lb.observables["purity"],
    )

    columns: dict[str, np.ndarray] = {
        "t": opts.sampling_times,
        "energy": work.energy,
        "power": work.power,
        "ergotropy_unconditional": work.ergotropy,
        "purity_unconditional": work.purity,
        "daemonic_ergotropy": np.full(n, np.nan),
        "daemonic_ergotropy_std": np.full(n, np.nan),
        "conditional_purity_mean": np.full(n, np.nan),
        "daemonic_efficiency": np.full(n, np.nan),
        "ergotropy_ideal": eps0,
        "enhancement_ratio": np.full(n, np.nan),
    }

    ensemble = None
    daemonic = None
    consistency_td = None
    kind = _kind_from_config(cfg)
    if kind is not None:
        ensemble = run_ensemble(
            model, opts, kind, cfg.n_traj, cfg.master_seed,
            spectrum=spectrum, workers=cfg.workers or None,
            track_full_average=cfg.track_full_average,
        )
        daemonic = DaemonicMetrics(
            times=opts.sampling_times,
            daemonic_ergotropy=ensemble.ergotropy_mean,
            std=ensemble.ergotropy_std,
            unconditional_ergotropy=eps,
            unconditional_energy=energy,
            efficiency=daemonic_efficiency(ensemble.ergotropy_mean, eps, energy),
            n_traj=ensemble.n_traj,
            enhancement_ratio=enhancement_ratio(ensemble.ergotropy_mean, eps0),
        )
        columns["daemonic_ergotropy"] = daemonic.daemonic_ergotropy
        columns["daemonic_ergotropy_std"] = daemonic.std
        columns["conditional_purity_mean"] = ensemble.purity_mean
        columns["daemonic_efficiency"] = daemonic.efficiency
        columns["enhancement_ratio"] = daemonic.enhancement_ratio
        if cfg.track_full_average and lb.states is not None:
            consistency_td = max(
                trace_distance(ensemble.mean_full_states[i], lb.states[i].matrix)
                for i in range(n)
            )

    cutoff = max(lb.cutoff_max_population, closed.cutoff_max_population,
                 ensemble.cutoff_max_population if ensemble else 0.0)
    if cutoff > CUTOFF_WARN_THRESHOLD:
        warnings.append(
            f"top-two Fock-level population reached {cutoff:.3e} "
            f"(> {CUTOFF_WARN_THRESHOLD}); increase n_ph"
        )

    csv_path = meta_path = None
    if write:
        out = cfg.resolved_out_dir() / cfg.label
        csv_path = write_series_csv(out / "series.csv",
                                    {k: columns[k] for k in SERIES_COLUMNS})
        meta = {
            "kind": "experiment",
            "config": cfg.to_dict(),
            "dt_effective": opts.dt,
            "environment": environment_info(),
            "guards": _guard_constants(),
            "warnings": warnings,
            "cutoff_max_population": cutoff,
            "lindblad_min_eigenvalue": lb.min_eigenvalue,
            "lindblad_max_trace_drift": lb.max_trace_drift,
            "consistency_trace_distance": consistency_td,
            "ensemble_norms_check_max": ensemble.norms_check_max if ensemble else None,
            "wall_clock_seconds": time.perf_counter() - t_start,
        }
        meta_path = write_meta(out / "meta.json", meta)

    return ExperimentResult(
        config=cfg, model=model, times=opts.sampling_times, columns=columns,
        lindblad=lb, closed=closed, ensemble=ensemble, warnings=warnings,
        consistency_trace_distance=consistency_td,
        csv_path=csv_path, meta_path=meta_path,
    )


@dataclass
class SweepResult:
    spec: SweepSpec
    header: list[str]
    rows: list[list]
    csv_path: Path | None
    meta_path: Path | None

    def column(self, name: str) -> np.ndarray:
        j = self.header.index(name)
        return np.asarray([row[j] for row in self.rows])


def _sweep_header(spec: SweepSpec) -> list[str]:
    header = [spec.axis1_name, spec.axis2_name, "t_star", "energy",
              "ergotropy_unconditional", "ergotropy_ideal", "t_star_ideal"]
    for u in spec.unravelings:
        header += [
            f"daemonic_ergotropy_{u}",
            f"daemonic_ergotropy_{u}_std",
            f"enhancement_ratio_{u}",
            f"daemonic_efficiency_{u}",
        ]
    header.append("status")
    return header


def run_sweep(spec: SweepSpec, write: bool = True) -> SweepResult:
    """Grid of experiments over two model parameters.

    Per cell, every quantity is read at its own dynamics' maximum-stored-energy
    time: eps and the daemonic ergotropies at the dissipative run's argmax;
    the ideal benchmark eps0 at the closed run's own argmax (it depends only
    on the coupling axis).  Cell failures land in the status column and the
    sweep continues.
    """
    t_start = time.perf_counter()
    template = spec.template
    header = _sweep_header(spec)
    rows: list[list] = []
    closed_cache: dict[tuple, tuple[float, float]] = {}
    warnings: list[str] = []

    for v1 in spec.axis1_values:
        for v2 in spec.axis2_values:
            row: list = [v1, v2]
            try:
                cfg = template.with_model_params(**{spec.axis1_name: v1,
                                                    spec.axis2_name: v2})
                cfg = cfg.replace(unraveling="none", track_full_average=False,
                                  keep_full_states=False)
                model = cfg.build_model()
                opts = _integrator_options(cfg, model)
                spectrum = BatterySpectrum.from_levels(model.h_battery_spectrum,
                                                       cfg.ergotropy_space)

                lb = evolve_unconditional(model, opts, keep_full_states=False)
                energy = lb.observables["energy"]
                eps = _series_ergotropy(lb, spectrum)
                if spec.readout == "max_energy_time":
                    i_star = int(np.argmax(energy))
                else:
                    i_star = int(np.argmin(np.abs(opts.sampling_times - spec.fixed_time)))
                t_star = float(opts.sampling_times[i_star])

                closed_cfg = _dissipation_free(cfg)
                key = (closed_cfg.model, cfg.t_max, cfg.n_samples, cfg.dt)
                if key not in closed_cache:
                    # the closed baseline gets its own step rule, so its value
                    # cannot depend on which dissipative cell ran it first
                    closed_model = closed_cfg.build_model()
                    opts0 = _integrator_options(closed_cfg, closed_model)
                    closed = evolve_closed(closed_model, opts0)
                    eps0_series = _series_ergotropy(closed, spectrum)
                    if spec.readout == "max_energy_time":
                        i0 = int(np.argmax(closed.observables["energy"]))
                    else:
                        i0 = i_star
                    closed_cache[key] = (float(eps0_series[i0]),
                                         float(opts0.sampling_times[i0]))
                eps0_star, t0_star = closed_cache[key]

                row += [t_star, float(energy[i_star]), float(eps[i_star]),
                        eps0_star, t0_star]

                cutoff = max(lb.cutoff_max_population, 0.0)
                for u in spec.unravelings:
                    kind = (UnravelingKind.photodetection() if u == "pd"
                            else UnravelingKind.homodyne(template.theta))
                    ens = run_ensemble(model, opts, kind, template.n_traj,
                                       template.master_seed, spectrum=spectrum,
                                       workers=template.workers or None)
                    e_bar = float(ens.ergotropy_mean[i_star])
                    e_std = float(ens.ergotropy_std[i_star])
                    row += [
                        e_bar,
                        e_std,
                        enhancement_ratio(e_bar, eps0_star),
                        daemonic_efficiency(e_bar, float(eps[i_star]),
                                            float(energy[i_star])),
                    ]
                    cutoff = max(cutoff, ens.cutoff_max_population)
                if cutoff > CUTOFF_WARN_THRESHOLD:
                    warnings.append(
                        f"cell ({v1}, {v2}): top-two Fock population {cutoff:.3e}")
                row.append("ok")
            except Exception as exc:  # per-cell failure: record and continue
                row += [float("nan")] * (len(header) - len(row) - 1)
                row.append(f"error: {exc}")
            rows.append(row)

    csv_path = meta_path = None
    if write:
        out = template.resolved_out_dir() / template.label
        csv_path = write_csv(out / "sweep.csv", header, rows)
        meta_path = write_meta(out / "meta.json", {
            "kind": "sweep",
            "axis1": {"name": spec.axis1_name, "values": list(spec.axis1_values)},
            "axis2": {"name": spec.axis2_name, "values": list(spec.axis2_values)},
            "unravelings": list(spec.unravelings),
            "readout": spec.readout,
            "fixed_time": spec.fixed_time,
            "template": template.to_dict(),
            "environment": environment_info(),
            "guards": _guard_constants(),
            "warnings": warnings,
            "wall_clock_seconds": time.perf_counter() - t_start,
        })
    return SweepResult(spec=spec, header=header, rows=rows,
                       csv_path=csv_path, meta_path=meta_path)


@dataclass
class ScalingResult:
    spec: ScalingSpec
    header: list[str]
    rows: list[list]
    fits: dict[str, dict[str, float]]
    csv_path: Path | None
    meta_path: Path | None


def _loglog_fit(n_values, peaks) -> dict[str, float]:
    n = np.asarray(n_values, dtype=float)
    p = np.asarray(peaks, dtype=float)
    ok = np.isfinite(p) & (p > 0)
    if ok.sum() < 2:
        return {"exponent": float("nan"), "stderr": float("nan")}
    fit = stats.linregress(np.log(n[ok]), np.log(p[ok]))
    return {"exponent": float(fit.slope), "stderr": float(fit.stderr)}


def run_scaling_study(spec: ScalingSpec, write: bool = True) -> ScalingResult:
    """Peak energy/power/ergotropy versus the number of battery qubits, with
    log-log least-squares exponents (needs >= 2 sizes for a fit)."""
    t_start = time.perf_counter()
    template = spec.template
    header = ["n_tls", "n_ph", "peak_energy", "peak_power",
              "peak_ergotropy", "peak_ergotropy_ideal",
              "peak_daemonic_ergotropy", "status"]
    rows: list[list] = []
    for n in spec.n_values:
        try:
            cfg = template.with_model_params(n_tls=n, n_ph=default_fock_cutoff(n))
            cfg = cfg.replace(label=f"{template.label}_n{n}")
            res = run_experiment(cfg, write=False)
            c = res.columns
            daemonic = (float(np.nanmax(c["daemonic_ergotropy"]))
                        if cfg.unraveling != "none" else float("nan"))
            rows.append([n, cfg.model.n_ph,
                         float(c["energy"].max()), float(c["power"].max()),
                         float(c["ergotropy_unconditional"].max()),
                         float(c["ergotropy_ideal"].max()),
                         daemonic, "ok"])
        except Exception as exc:
            rows.append([n, float("nan")] + [float("nan")] * 5 + [f"error: {exc}"])

    fits = {}
    if len(spec.n_values) >= 2:
        ok_rows = [r for r in rows if r[-1] == "ok"]
        ns = [r[0] for r in ok_rows]
        for j, name in ((2, "energy"), (3, "power"), (4, "ergotropy"),
                        (5, "ergotropy_ideal"), (6, "daemonic_ergotropy")):
            fits[name] = _loglog_fit(ns, [r[j] for r in ok_rows])

    csv_path = meta_path = None
    if write:
        out = template.resolved_out_dir() / template.label
        csv_path = write_csv(out / "scaling.csv", header, rows)
        meta_path = write_meta(out / "meta.json", {
            "kind": "scaling",
            "n_values": list(spec.n_values),
            "template": template.to_dict(),
            "fits": fits,
            "environment": environment_info(),
            "wall_clock_seconds": time.perf_counter() - t_start,
        })
    return ScalingResult(spec=spec, header=header, rows=rows, fits=fits,
                         csv_path=csv_path, meta_path=meta_path)
