"""Data generation, repeated-trial sweeps and result emission."""

from .config import ExperimentConfig, apply_overrides, load_config
from .data import (
    Dataset,
    gen_fourier_dataset,
    gen_sphere_dataset,
    load_csv_dataset,
    split_fold,
    write_csv_dataset,
)
from .report import SWEEP_HEADER, emit_outputs
from .sweeps import SweepResult, SweepRow, run_conditioning_cost, run_k_sweep, run_lambda_sweep

__all__ = [
    "Dataset",
    "ExperimentConfig",
    "SweepResult",
    "SweepRow",
    "SWEEP_HEADER",
    "apply_overrides",
    "emit_outputs",
    "gen_fourier_dataset",
    "gen_sphere_dataset",
    "load_config",
    "load_csv_dataset",
    "run_conditioning_cost",
    "run_k_sweep",
    "run_lambda_sweep",
    "split_fold",
    "write_csv_dataset",
]
