"""Versioned checkpoint container for recognizers and neural LMs."""

import logging
import os
from typing import Any, Dict, Optional, Tuple

import torch

from lyrics_asr.exceptions import CheckpointError
from lyrics_asr.models.config import ModelConfig
from lyrics_asr.models.recognizer import RecognizerModel

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "lyrics-asr-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str,
    state_dict: Dict[str, torch.Tensor],
    model_config: Dict[str, Any],
    optimizer_state: Optional[Dict[str, Any]] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> None:
    """
    Write parameters, the config snapshot and optional optimizer state.

    Args:
        path: Output file
        state_dict: Named parameter tensors
        model_config: JSON-compatible config snapshot
        optimizer_state: Optimizer state dict
        metadata: Free-form JSON-compatible values (epoch, dev loss, ...)
    """
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    container = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": model_config,
        "state_dict": {name: tensor.detach().cpu().clone() for name, tensor in state_dict.items()},
        "optimizer_state": optimizer_state,
        "metadata": metadata or {},
    }
    torch.save(container, path)
    logger.info(f"Saved checkpoint to {path}")


def load_checkpoint(path: str) -> Dict[str, Any]:
    """
    Read and validate a checkpoint container.

    Raises:
        CheckpointError: Missing file, unreadable payload, wrong format or version
    """
    if not os.path.exists(path):
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        container = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        logger.error(f"Error reading checkpoint {path}: {e}")
        raise CheckpointError(f"Unreadable checkpoint {path}: {e}") from e
    if not isinstance(container, dict) or container.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if container.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path} has checkpoint version {container.get('version')}, expected {CHECKPOINT_VERSION}"
        )
    for key in ("model_config", "state_dict"):
        if key not in container:
            raise CheckpointError(f"{path} is missing '{key}'")
    return container


def save_model(path: str, model: RecognizerModel, optimizer_state: Optional[Dict[str, Any]] = None,
               metadata: Optional[Dict[str, Any]] = None) -> None:
    save_checkpoint(path, model.state_dict(), model.config.model_dump(mode="json"), optimizer_state, metadata)


def load_model(path: str) -> Tuple[RecognizerModel, Dict[str, Any]]:
    """
    Rebuild a recognizer from a checkpoint, in eval mode.

    Returns:
        (model, metadata)
    """
    container = load_checkpoint(path)
    try:
        config = ModelConfig.model_validate(container["model_config"])
        model = RecognizerModel(config)
        model.load_state_dict(container["state_dict"])
    except (ValueError, RuntimeError) as e:
        logger.error(f"Checkpoint {path} does not match its config: {e}")
        raise CheckpointError(f"Checkpoint {path} does not match its config: {e}") from e
    model.eval()
    return model, dict(container.get("metadata") or {})
