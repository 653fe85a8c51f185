"""Encoder-decoder recognizers, losses and checkpoints."""

from lyrics_asr.models.checkpoint import load_checkpoint, load_model, save_checkpoint, save_model
from lyrics_asr.models.config import (
    CTCLengthPolicy,
    DecoderConfig,
    DecoderKind,
    EncoderConfig,
    EncoderKind,
    LossSpec,
    ModelConfig,
)
from lyrics_asr.models.loss import LabelSmoothingLoss, smoothed_target_entropy
from lyrics_asr.models.recognizer import (
    Batch,
    LossOutput,
    RecognizerModel,
    build_model,
    compute_loss,
    make_probe_bilstm,
    model_summary,
)

__all__ = [
    "Batch",
    "CTCLengthPolicy",
    "DecoderConfig",
    "DecoderKind",
    "EncoderConfig",
    "EncoderKind",
    "LabelSmoothingLoss",
    "LossOutput",
    "LossSpec",
    "ModelConfig",
    "RecognizerModel",
    "build_model",
    "compute_loss",
    "load_checkpoint",
    "load_model",
    "make_probe_bilstm",
    "model_summary",
    "save_checkpoint",
    "save_model",
    "smoothed_target_entropy",
]
