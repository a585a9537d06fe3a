"""Experiment configuration: YAML schema, validation, CLI overrides.

A config file is a mapping with nested sections (all optional unless noted):

    model:                       # required
      kind: spin_spin | dicke    # required
      omega: 1.0
      g_b: 0.1   g_c: 0.2   gamma: 0.1   n_ph: 20        # spin_spin
      lambda_bar: 1.0   kappa: 0.5   n_tls: 6   n_ph: 24  # dicke
    monitoring:
      unraveling: none | pd | hd
      theta: 0.0
      n_traj: 1000
      master_seed: 20260810
    time:
      t_max: 20.0                # required
      dt: 0.0                    # 0 -> 1e-3 / fastest configured rate
      n_samples: 201
    ergotropy:
      space: full | symmetric
    output:
      directory: results
      label: run
      track_full_average: false
      keep_full_states: false
    run:
      workers: 0                 # 0 -> all cores

Sweep files add a ``sweep`` section and use ``template`` instead of the
top-level experiment sections; scaling files add a ``scaling`` section.
Every CLI flag overrides its config field; the output directory can also be
overridden by the OPENQB_OUT_DIR environment variable.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..models import (
    DickeConfig,
    ModelError,
    ModelInstance,
    SpinSpinConfig,
    build_dicke,
    build_spin_spin,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepSpec",
    "ScalingSpec",
    "load_config_file",
    "experiment_from_dict",
    "sweep_from_dict",
    "scaling_from_dict",
]

OUT_DIR_ENV = "OPENQB_OUT_DIR"

_UNRAVELINGS = ("none", "pd", "hd")
_SPACES = ("full", "symmetric")
_AXIS_FIELDS = {
    "spin_spin": ("omega", "g_b", "g_c", "gamma"),
    "dicke": ("omega", "lambda_bar", "kappa"),
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, fld: str, message: str):
        self.field = fld
        super().__init__(f"{fld}: {message}")


def _get(section: dict, fld: str, default, kind, path: str):
    value = section.get(fld, default)
    if value is None:
        return None
    try:
        if kind is bool and not isinstance(value, bool):
            raise TypeError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{fld}", f"expected {kind.__name__}, got {value!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved single-experiment configuration."""

    model_kind: str
    model: SpinSpinConfig | DickeConfig
    unraveling: str = "none"
    theta: float = 0.0
    n_traj: int = 1000
    master_seed: int = 20260810
    t_max: float = 10.0
    dt: float = 0.0  # 0 -> default rule
    n_samples: int = 201
    ergotropy_space: str = "full"
    out_dir: str = "results"
    label: str = "run"
    track_full_average: bool = False
    keep_full_states: bool = False
    workers: int = 0

    def __post_init__(self):
        if self.model_kind not in ("spin_spin", "dicke"):
            raise ConfigError("model.kind", f"must be spin_spin or dicke, got {self.model_kind!r}")
        if self.unraveling not in _UNRAVELINGS:
            raise ConfigError("monitoring.unraveling",
                              f"must be one of {_UNRAVELINGS}, got {self.unraveling!r}")
        if self.unraveling != "none" and self.n_traj < 1:
            raise ConfigError("monitoring.n_traj", f"must be >= 1, got {self.n_traj}")
        if self.master_seed < 0 or self.master_seed > 2**64 - 1:
            raise ConfigError("monitoring.master_seed", "must fit in 64 bits")
        if self.t_max <= 0:
            raise ConfigError("time.t_max", f"must be positive, got {self.t_max}")
        if self.dt < 0:
            raise ConfigError("time.dt", f"must be >= 0, got {self.dt}")
        if self.n_samples < 2:
            raise ConfigError("time.n_samples", f"must be >= 2, got {self.n_samples}")
        if self.ergotropy_space not in _SPACES:
            raise ConfigError("ergotropy.space",
                              f"must be one of {_SPACES}, got {self.ergotropy_space!r}")
        if self.workers < 0:
            raise ConfigError("run.workers", f"must be >= 0, got {self.workers}")

    def build_model(self) -> ModelInstance:
        return build_spin_spin(self.model) if self.model_kind == "spin_spin" \
            else build_dicke(self.model)

    def resolved_out_dir(self) -> Path:
        return Path(os.environ.get(OUT_DIR_ENV, self.out_dir))

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def with_model_params(self, **params) -> "ExperimentConfig":
        for name in params:
            if name not in _AXIS_FIELDS[self.model_kind] + ("n_ph", "n_tls"):
                raise ConfigError(f"model.{name}",
                                  f"not a sweepable parameter of {self.model_kind}")
        return self.replace(model=dataclasses.replace(self.model, **params))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["model"] = dataclasses.asdict(self.model)
        return d


def _model_from_section(section: dict) -> tuple[str, SpinSpinConfig | DickeConfig]:
    if not isinstance(section, dict):
        raise ConfigError("model", "missing or not a mapping")
    kind = section.get("kind")
    if kind not in ("spin_spin", "dicke"):
        raise ConfigError("model.kind", f"must be spin_spin or dicke, got {kind!r}")
    try:
        if kind == "spin_spin":
            cfg = SpinSpinConfig(
                omega=_get(section, "omega", 1.0, float, "model"),
                g_b=_get(section, "g_b", 0.1, float, "model"),
                g_c=_get(section, "g_c", 0.2, float, "model"),
                gamma=_get(section, "gamma", 0.0, float, "model"),
                n_ph=_get(section, "n_ph", 20, int, "model"),
            )
        else:
            cfg = DickeConfig(
                omega=_get(section, "omega", 1.0, float, "model"),
                lambda_bar=_get(section, "lambda_bar", 1.0, float, "model"),
                kappa=_get(section, "kappa", 0.0, float, "model"),
                n_tls=_get(section, "n_tls", 4, int, "model"),
                n_ph=_get(section, "n_ph", None, int, "model"),
            )
    except ModelError as exc:
        raise ConfigError("model", str(exc)) from exc
    return kind, cfg


def experiment_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    kind, model = _model_from_section(data.get("model"))
    mon = data.get("monitoring", {}) or {}
    tim = data.get("time", {}) or {}
    erg = data.get("ergotropy", {}) or {}
    out = data.get("output", {}) or {}
    run = data.get("run", {}) or {}
    if "t_max" not in tim:
        raise ConfigError("time.t_max", "required")
    return ExperimentConfig(
        model_kind=kind,
        model=model,
        unraveling=str(mon.get("unraveling", "none")),
        theta=_get(mon, "theta", 0.0, float, "monitoring"),
        n_traj=_get(mon, "n_traj", 1000, int, "monitoring"),
        master_seed=_get(mon, "master_seed", 20260810, int, "monitoring"),
        t_max=_get(tim, "t_max", None, float, "time"),
        dt=_get(tim, "dt", 0.0, float, "time"),
        n_samples=_get(tim, "n_samples", 201, int, "time"),
        ergotropy_space=str(erg.get("space", "full")),
        out_dir=str(out.get("directory", "results")),
        label=str(out.get("label", "run")),
        track_full_average=_get(out, "track_full_average", False, bool, "output"),
        keep_full_states=_get(out, "keep_full_states", False, bool, "output"),
        workers=_get(run, "workers", 0, int, "run"),
    )


@dataclass(frozen=True)
class SweepSpec:
    """Two-axis parameter sweep over model parameters of a template run."""

    axis1_name: str
    axis1_values: tuple[float, ...]
    axis2_name: str
    axis2_values: tuple[float, ...]
    template: ExperimentConfig
    unravelings: tuple[str, ...] = ("hd",)
    readout: str = "max_energy_time"
    fixed_time: float | None = None

    def __post_init__(self):
        for name, values in (("axis1", self.axis1_values), ("axis2", self.axis2_values)):
            if len(values) == 0:
                raise ConfigError(f"sweep.{name}.values", "must be non-empty")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError(f"sweep.{name}.values", "must be strictly increasing")
        allowed = _AXIS_FIELDS[self.template.model_kind]
        for name, axis in (("axis1", self.axis1_name), ("axis2", self.axis2_name)):
            if axis not in allowed:
                raise ConfigError(f"sweep.{name}.name",
                                  f"must be one of {allowed} for {self.template.model_kind}")
        if self.axis1_name == self.axis2_name:
            raise ConfigError("sweep.axis2.name", "axes must differ")
        for u in self.unravelings:
            if u not in ("pd", "hd"):
                raise ConfigError("sweep.unravelings", f"must be subsets of (pd, hd), got {u!r}")
        if not self.unravelings:
            raise ConfigError("sweep.unravelings", "must list at least one unraveling")
        if self.readout not in ("max_energy_time", "fixed_time"):
            raise ConfigError("sweep.readout", f"unknown readout {self.readout!r}")
        if self.readout == "fixed_time" and self.fixed_time is None:
            raise ConfigError("sweep.fixed_time", "required when readout = fixed_time")


def _axis(section: dict, which: str) -> tuple[str, tuple[float, ...]]:
    ax = section.get(which)
    if not isinstance(ax, dict) or "name" not in ax or "values" not in ax:
        raise ConfigError(f"sweep.{which}", "needs 'name' and 'values'")
    try:
        values = tuple(float(v) for v in ax["values"])
    except (TypeError, ValueError):
        raise ConfigError(f"sweep.{which}.values", "must be a list of numbers") from None
    return str(ax["name"]), values


def sweep_from_dict(data: dict) -> SweepSpec:
    sweep = data.get("sweep")
    if not isinstance(sweep, dict):
        raise ConfigError("sweep", "missing or not a mapping")
    template = experiment_from_dict(data.get("template", {}))
    a1, v1 = _axis(sweep, "axis1")
    a2, v2 = _axis(sweep, "axis2")
    unr = tuple(sweep.get("unravelings", ["hd"]))
    fixed = sweep.get("fixed_time")
    return SweepSpec(
        axis1_name=a1, axis1_values=v1, axis2_name=a2, axis2_values=v2,
        template=template, unravelings=unr,
        readout=str(sweep.get("readout", "max_energy_time")),
        fixed_time=None if fixed is None else float(fixed),
    )


@dataclass(frozen=True)
class ScalingSpec:
    """System-size study over the number of battery qubits of a Dicke template."""

    n_values: tuple[int, ...]
    template: ExperimentConfig

    def __post_init__(self):
        if self.template.model_kind != "dicke":
            raise ConfigError("template.model.kind", "scaling study needs a dicke template")
        if len(self.n_values) == 0:
            raise ConfigError("scaling.n_values", "must be non-empty")
        if any(n < 2 for n in self.n_values):
            raise ConfigError("scaling.n_values", "every N must be >= 2")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ConfigError("scaling.n_values", "must be ascending")


def scaling_from_dict(data: dict) -> ScalingSpec:
    scaling = data.get("scaling")
    if not isinstance(scaling, dict) or "n_values" not in scaling:
        raise ConfigError("scaling.n_values", "required")
    try:
        n_values = tuple(int(n) for n in scaling["n_values"])
    except (TypeError, ValueError):
        raise ConfigError("scaling.n_values", "must be a list of integers") from None
    template = experiment_from_dict(data.get("template", {}))
    return ScalingSpec(n_values=n_values, template=template)


def load_config_file(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError("<root>", f"{path} did not parse to a mapping")
    return data
