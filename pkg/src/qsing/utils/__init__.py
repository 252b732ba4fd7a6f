"""Experiment harness and output writers."""

from .experiment import (
    ConfigError,
    ExperimentConfig,
    ExperimentError,
    TrueStateSpec,
    aggregate,
    derive_child_seed,
    load_experiment_config,
    run_experiment,
    run_repetition,
    scaling_exponent,
)
from .run_publisher import RunPublisher, UnknownMetricError, plot_table, read_runs, write_outputs

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentError",
    "RunPublisher",
    "TrueStateSpec",
    "UnknownMetricError",
    "aggregate",
    "derive_child_seed",
    "load_experiment_config",
    "plot_table",
    "read_runs",
    "run_experiment",
    "run_repetition",
    "scaling_exponent",
    "write_outputs",
]
