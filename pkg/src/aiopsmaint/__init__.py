"""Replay-based evaluation of maintenance policies for failure-prediction models.

Time-ordered data is cut into periods; a policy (never retrain, retrain every
period, retrain on detected drift, time-based ensembles, online learning or
a hindsight-informed oracle) is replayed over the second half of the periods
and scored on each following period.
"""
from .data import (
    DatasetSchema,
    Granularity,
    Period,
    PeriodizedDataset,
    SyntheticStreamSpec,
    generate_synthetic,
    load_csv,
    partition_periods,
    undersample,
)
from .engine import PeriodRecord, PolicyConfig, PolicyKind, RunResult, run_policy

__version__ = "0.1.0"

__all__ = [
    "DatasetSchema",
    "Granularity",
    "Period",
    "PeriodRecord",
    "PeriodizedDataset",
    "PolicyConfig",
    "PolicyKind",
    "RunResult",
    "SyntheticStreamSpec",
    "generate_synthetic",
    "load_csv",
    "partition_periods",
    "run_policy",
    "undersample",
]
