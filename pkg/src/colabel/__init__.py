"""Trustable co-label learning from multiple noisy annotators."""

from .core import MISSING, TrustedDataset, UntrustedDataset, estimate_class_prior, validate_dataset
from .trainer import TrainConfig, run_baseline_mv, run_tcl, run_tcls

__all__ = [
    "MISSING",
    "TrainConfig",
    "TrustedDataset",
    "UntrustedDataset",
    "estimate_class_prior",
    "run_baseline_mv",
    "run_tcl",
    "run_tcls",
    "validate_dataset",
]
