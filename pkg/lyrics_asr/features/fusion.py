"""Learnable weighted-sum fusion of feature-stack layers."""

import logging
from typing import Union

import torch
from torch import nn

from lyrics_asr.exceptions import DimensionMismatchError, NumericError
from lyrics_asr.features.stack import FeatureStack

logger = logging.getLogger(__name__)


class FusionWeights(nn.Module):
    """Softmax-normalized layer weights over ``num_layers`` trainable logits."""

    def __init__(self, num_layers: int):
        super().__init__()
        if num_layers < 1:
            raise DimensionMismatchError(f"FusionWeights needs at least one layer, got {num_layers}")
        self.logits = nn.Parameter(torch.zeros(num_layers))

    @property
    def num_layers(self) -> int:
        return int(self.logits.shape[0])

    def weights(self) -> torch.Tensor:
        return torch.softmax(self.logits, dim=0)

    def forward(self, layers: torch.Tensor) -> torch.Tensor:
        return fuse_layers(layers, self)

    def extra_repr(self) -> str:
        return f"num_layers={self.num_layers}"


def fuse_layers(stack: Union[FeatureStack, torch.Tensor], weights: FusionWeights) -> torch.Tensor:
    """
    Weighted sum of layers: ``F[t, d] = sum_i w_i * F_i[t, d]``.

    Args:
        stack: FeatureStack, (K, T, D) tensor or batched (B, K, T, D) tensor
        weights: Fusion weights with matching K

    Returns:
        (T, D) or (B, T, D) tensor, differentiable with respect to the logits
    """
    layers = stack.to_tensor() if isinstance(stack, FeatureStack) else stack
    if layers.dim() not in (3, 4):
        raise DimensionMismatchError(f"Expected (K, T, D) or (B, K, T, D) layers, got {tuple(layers.shape)}")
    k_axis = layers.dim() - 3
    if layers.shape[k_axis] != weights.num_layers:
        raise DimensionMismatchError(
            f"Stack has K={layers.shape[k_axis]} layers but fusion weights have K={weights.num_layers}"
        )
    w = weights.weights().to(layers.dtype)
    return torch.tensordot(w, layers.movedim(k_axis, 0), dims=1)


def check_convex(weights: FusionWeights, tolerance: float = 1e-6) -> None:
    """Raise NumericError unless the weights are positive and sum to one."""
    with torch.no_grad():
        w = weights.weights().double()
        if not torch.isfinite(w).all() or (w <= 0).any() or abs(float(w.sum()) - 1.0) > tolerance:
            raise NumericError(f"Fusion weights are not a convex combination: {w.tolist()}")
