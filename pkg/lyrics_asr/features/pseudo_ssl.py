"""Deterministic stand-in for a frozen multi-layer upstream.

Layer 0 is the log mel-spectrogram; layer ``i`` applies a frozen,
seed-derived random projection and ``tanh`` to the layer-normalized layer
``i - 1``.
"""

import logging
from typing import Optional

import numpy as np

from lyrics_asr.corpus.audio import AudioSegment
from lyrics_asr.exceptions import ConfigError
from lyrics_asr.features.mel import MelConfig, mel_spectrogram
from lyrics_asr.features.stack import FeatureStack
from lyrics_asr.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

LAYER_NORM_EPS = 1e-5


def layer_projection(seed: int, layer: int, dim: int) -> np.ndarray:
    """Frozen ``dim x dim`` projection for ``layer``, scaled by 1/sqrt(dim)."""
    rng = np.random.default_rng(derive_seed(seed, "pseudo-ssl", layer))
    return rng.standard_normal((dim, dim)) / np.sqrt(dim)


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LAYER_NORM_EPS)


def pseudo_ssl_extract(
    audio: AudioSegment,
    n_layers: int,
    seed: int,
    mel_config: Optional[MelConfig] = None,
) -> FeatureStack:
    """
    Extract a K-layer pseudo upstream stack.

    Args:
        audio: Input audio
        n_layers: Number of layers K (>= 1)
        seed: Seed of the frozen projections
        mel_config: Front-end settings for layer 0

    Returns:
        FeatureStack with K=n_layers, D=n_mels
    """
    if n_layers < 1:
        raise ConfigError(f"n_layers must be >= 1, got {n_layers}")
    mel = mel_spectrogram(audio, mel_config or MelConfig())
    layers = [mel.layer(0).astype(np.float64)]
    for index in range(1, n_layers):
        projection = layer_projection(seed, index, mel.D)
        layers.append(np.tanh(_layer_norm(layers[-1]) @ projection))
    return FeatureStack(np.stack(layers), mel.frame_rate, source_tag=f"pseudo-ssl-{n_layers}")
