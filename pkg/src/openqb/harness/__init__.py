"""Experiment orchestration: configuration, CLI, sweeps, figure presets."""

from .config import (
    ConfigError,
    ExperimentConfig,
    ScalingSpec,
    SweepSpec,
    experiment_from_dict,
    load_config_file,
    scaling_from_dict,
    sweep_from_dict,
)
from .figures import FIGURE_IDS, reproduce_figure
from .runner import (
    ExperimentResult,
    ScalingResult,
    SweepResult,
    run_experiment,
    run_scaling_study,
    run_sweep,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepSpec",
    "ScalingSpec",
    "ExperimentResult",
    "SweepResult",
    "ScalingResult",
    "experiment_from_dict",
    "sweep_from_dict",
    "scaling_from_dict",
    "load_config_file",
    "run_experiment",
    "run_sweep",
    "run_scaling_study",
    "reproduce_figure",
    "FIGURE_IDS",
]
