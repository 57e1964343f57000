"""Experiment orchestration: splits, metrics, input pipeline, protocols, config."""
from .config import ExperimentConfig, desk_config, light_config, load_config
from .experiments import (
    DriftResult,
    StageCell,
    StaticResult,
    run_drift_protocol,
    run_static_experiment,
    write_drift_outputs,
    write_static_outputs,
)
from .metrics import MetricsReport, evaluate, logit_histogram, roc_auc
from .pipeline import AdcpmPipeline
from .splits import STAGE_TIMES, STAGE_SPLITS, EmptySplitError, SplitSpec, composite, split, split_by_ratio, split_by_time

__all__ = [
    "AdcpmPipeline", "DriftResult", "EmptySplitError", "ExperimentConfig", "MetricsReport", "STAGE_TIMES",
    "SplitSpec", "StageCell", "StaticResult", "STAGE_SPLITS", "composite", "desk_config", "evaluate", "light_config",
    "load_config", "logit_histogram", "roc_auc", "run_drift_protocol", "run_static_experiment", "split",
    "split_by_ratio", "split_by_time", "write_drift_outputs", "write_static_outputs",
]
