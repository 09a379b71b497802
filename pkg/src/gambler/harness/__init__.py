"""Experiment orchestration: run configs, training runs, sweeps, reports."""

from .config import DatasetConfig, LossSettings, ModelSettings, RunConfig, StoppingConfig
from .report import run_report
from .runner import run_sweep, run_train
from .verify import VerifyReport, run_verify_theory

__all__ = [
    "DatasetConfig",
    "LossSettings",
    "ModelSettings",
    "RunConfig",
    "StoppingConfig",
    "VerifyReport",
    "run_report",
    "run_sweep",
    "run_train",
    "run_verify_theory",
]
