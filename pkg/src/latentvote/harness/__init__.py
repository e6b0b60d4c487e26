"""Training loop and evaluation/calibration analytics."""

from .config import RunConfig, apply_overrides, load_config
from .evaluate import (
    CalibrationReport,
    calibration_from_pairs,
    calibration_report,
    confidence_trace,
    evaluate,
    gather_position_logits,
    seed_sweep,
)
from .optim import Adam, Ema, clip_global_norm
from .train import cross_entropy_loss, train_run, train_step

__all__ = [
    "Adam",
    "CalibrationReport",
    "Ema",
    "RunConfig",
    "apply_overrides",
    "calibration_from_pairs",
    "calibration_report",
    "clip_global_norm",
    "confidence_trace",
    "cross_entropy_loss",
    "evaluate",
    "gather_position_logits",
    "load_config",
    "seed_sweep",
    "train_run",
    "train_step",
]
