"""Preset tables for models, training runs and language models."""

import copy
from typing import Any, Dict, List, Optional

from lyrics_asr.exceptions import ConfigError
from lyrics_asr.models.config import LossSpec, ModelConfig
from lyrics_asr.utils.config_loader import merge_config, validate_config

# ============================================================================
# RECOGNIZER PRESETS
# ============================================================================

MODEL_PRESETS: Dict[str, Dict[str, Any]] = {
    "baseline-transformer": {
        "encoder": {"kind": "transformer", "num_blocks": 12, "attention_heads": 4, "model_dim": 256,
                    "ff_units": 2048, "dropout": 0.1},
        "decoder": {"kind": "transformer", "num_blocks": 6, "attention_heads": 4, "model_dim": 256,
                    "ff_units": 2048, "dropout": 0.1},
        "ctc": True,
    },
    "conformer-downstream": {
        "encoder": {"kind": "conformer", "num_blocks": 12, "attention_heads": 8, "model_dim": 256,
                    "ff_units": 2048, "dropout": 0.1, "conv_kernel": 15},
        "decoder": {"kind": "transformer", "num_blocks": 8, "attention_heads": 4, "model_dim": 256,
                    "ff_units": 2048, "dropout": 0.1},
        "ctc": True,
    },
    "probe-bilstm": {
        "encoder": {"kind": "bilstm", "num_blocks": 4, "attention_heads": 1, "model_dim": 512,
                    "ff_units": 512, "dropout": 0.1},
        "decoder": {"kind": "lstm", "num_blocks": 1, "attention_heads": 1, "model_dim": 512,
                    "ff_units": 512, "dropout": 0.1},
        "ctc": False,
    },
    "desk-transformer": {
        "encoder": {"kind": "transformer", "num_blocks": 2, "attention_heads": 4, "model_dim": 64,
                    "ff_units": 256, "dropout": 0.0},
        "decoder": {"kind": "transformer", "num_blocks": 2, "attention_heads": 4, "model_dim": 64,
                    "ff_units": 256, "dropout": 0.0},
        "ctc": True,
    },
    "desk-conformer": {
        "encoder": {"kind": "conformer", "num_blocks": 2, "attention_heads": 4, "model_dim": 64,
                    "ff_units": 256, "dropout": 0.0, "conv_kernel": 7},
        "decoder": {"kind": "transformer", "num_blocks": 2, "attention_heads": 4, "model_dim": 64,
                    "ff_units": 256, "dropout": 0.0},
        "ctc": True,
    },
    "desk-probe": {
        "encoder": {"kind": "bilstm", "num_blocks": 2, "attention_heads": 1, "model_dim": 64,
                    "ff_units": 64, "dropout": 0.0},
        "decoder": {"kind": "lstm", "num_blocks": 1, "attention_heads": 1, "model_dim": 64,
                    "ff_units": 64, "dropout": 0.0},
        "ctc": False,
    },
}

# Fields no published description pins down; reports list them as assumptions
ASSUMED_FIELDS: Dict[str, List[str]] = {
    "baseline-transformer": ["encoder.model_dim", "decoder.model_dim", "decoder.attention_heads", "ctc",
                             "loss.ctc_weight", "loss.label_smoothing"],
    "conformer-downstream": ["encoder.model_dim", "decoder.model_dim", "decoder.attention_heads",
                             "encoder.conv_kernel", "ctc", "loss.ctc_weight", "loss.label_smoothing"],
    "probe-bilstm": ["loss.label_smoothing"],
    "desk-transformer": ["*"],
    "desk-conformer": ["*"],
    "desk-probe": ["*"],
}

DEFAULT_CTC_WEIGHT: float = 0.3
DEFAULT_LABEL_SMOOTHING: float = 0.1

# ============================================================================
# TRAINING PRESETS
# ============================================================================

TRAIN_PRESETS: Dict[str, Dict[str, Any]] = {
    "baseline": {"lr_scale": 1.0, "warmup_steps": 25000, "max_epochs": 100, "patience": 0,
                 "avg_top_k": 10, "select": "average"},
    "ssl-downstream": {"peak_lr": 0.0025, "warmup_steps": 40000, "max_epochs": 50, "patience": 3,
                       "avg_top_k": 10, "select": "average"},
    "probe": {"lr_scale": 1.0, "warmup_steps": 25000, "max_epochs": 100, "patience": 0,
              "avg_top_k": 5, "select": "average"},
    "desk-transformer": {"peak_lr": 0.003, "warmup_steps": 50, "max_epochs": 200, "patience": 0,
                         "avg_top_k": 1, "select": "best", "batch_frames": 4000},
    "desk-conformer": {"peak_lr": 0.002, "warmup_steps": 50, "max_epochs": 200, "patience": 0,
                       "avg_top_k": 1, "select": "best", "batch_frames": 4000},
    "desk-probe": {"peak_lr": 0.003, "warmup_steps": 50, "max_epochs": 100, "patience": 0,
                   "avg_top_k": 1, "select": "best", "batch_frames": 4000},
}

# Recognizer preset each training preset pairs with by default
TRAIN_MODEL_PAIRING: Dict[str, str] = {
    "baseline": "baseline-transformer",
    "ssl-downstream": "conformer-downstream",
    "probe": "probe-bilstm",
    "desk-transformer": "desk-transformer",
    "desk-conformer": "desk-conformer",
    "desk-probe": "desk-probe",
}

# ============================================================================
# LANGUAGE MODEL PRESETS
# ============================================================================

LM_PRESETS: Dict[str, Dict[str, Any]] = {
    "recurrent": {"kind": "recurrent", "num_layers": 2, "hidden": 650, "dropout": 0.0},
    "transformer": {"kind": "transformer", "num_layers": 8, "attention_heads": 4, "hidden": 1024,
                    "attention_dim": 256, "dropout": 0.0},
    "desk-recurrent": {"kind": "recurrent", "num_layers": 1, "hidden": 64, "dropout": 0.0},
    "desk-transformer": {"kind": "transformer", "num_layers": 2, "attention_heads": 4, "hidden": 128,
                         "attention_dim": 64, "dropout": 0.0},
}

NGRAM_ORDER: int = 4
NGRAM_DISCOUNT: float = 0.5

# Shallow-fusion weight applied to every LM kind
LM_WEIGHT: float = 0.3

# Mixing levels (dB) for the background-music study
MUSIC_ABLATION_SNRS: List[float] = [60.0, 10.0, 0.0, -5.0]


def _lookup(table: Dict[str, Dict[str, Any]], name: str, kind: str) -> Dict[str, Any]:
    if name not in table:
        raise ConfigError(f"Unknown {kind} preset '{name}'; choose from: {', '.join(sorted(table))}")
    return copy.deepcopy(table[name])


def model_config_for(
    preset: str,
    input_dim: int,
    vocab_size: int,
    num_layers: int = 1,
    seed: int = 0,
    overrides: Optional[Dict[str, Any]] = None,
) -> ModelConfig:
    """
    Build a ModelConfig from a recognizer preset.

    Args:
        preset: Name in MODEL_PRESETS
        input_dim: Feature dimension D
        vocab_size: Vocabulary size
        num_layers: Feature-stack layers K
        seed: Initialization seed
        overrides: Nested values applied on top of the preset

    Returns:
        Validated ModelConfig
    """
    base = _lookup(MODEL_PRESETS, preset, "model")
    base.update({"input_dim": input_dim, "vocab_size": vocab_size, "num_layers": num_layers, "seed": seed})
    return validate_config(ModelConfig, merge_config(base, overrides or {}))


def loss_spec_for(config: ModelConfig, overrides: Optional[Dict[str, Any]] = None) -> LossSpec:
    """Default joint loss for a model (attention-only when it has no CTC head)."""
    base = {
        "ctc_weight": DEFAULT_CTC_WEIGHT if config.ctc else 0.0,
        "label_smoothing": DEFAULT_LABEL_SMOOTHING,
    }
    return validate_config(LossSpec, merge_config(base, overrides or {}))


def train_preset(name: str) -> Dict[str, Any]:
    values = _lookup(TRAIN_PRESETS, name, "training")
    values["preset"] = name
    return values


def lm_preset(name: str) -> Dict[str, Any]:
    return _lookup(LM_PRESETS, name, "language model")
