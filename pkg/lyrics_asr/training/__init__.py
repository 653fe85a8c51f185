"""Training harness: schedule, batching, trainer."""

from lyrics_asr.training.data import Example, TrainingData, make_batches, make_examples
from lyrics_asr.training.schedule import WarmupScheduler, lr_scale_for_peak, lr_schedule, peak_lr
from lyrics_asr.training.trainer import (
    EarlyStopping,
    EpochRecord,
    SelectMode,
    TrainConfig,
    TrainResult,
    average_state_dicts,
    evaluate_loss,
    train,
)

__all__ = [
    "EarlyStopping",
    "EpochRecord",
    "Example",
    "SelectMode",
    "TrainConfig",
    "TrainResult",
    "TrainingData",
    "WarmupScheduler",
    "average_state_dicts",
    "evaluate_loss",
    "lr_scale_for_peak",
    "lr_schedule",
    "make_batches",
    "make_examples",
    "peak_lr",
    "train",
]
