"""Signed Granger causality for multi-agent trajectories with an augmented behavioural model."""
from .core import CausalGraph, Rng, SeriesKind, TrajectorySeries
from .inference import GCMatrix, aggregate, binarize, effect_trace, signmax
from .metrics import MetricReport, auprc, auroc, evaluate
from .training import TrainConfig, train

__all__ = [
    "CausalGraph", "GCMatrix", "MetricReport", "Rng", "SeriesKind", "TrainConfig",
    "TrajectorySeries", "aggregate", "auprc", "auroc", "binarize", "effect_trace",
    "evaluate", "signmax", "train",
]
__version__ = "0.1.0"
