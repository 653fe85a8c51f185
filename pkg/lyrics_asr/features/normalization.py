"""Global mean/variance normalization estimated on the train split."""

import logging
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from lyrics_asr.exceptions import DimensionMismatchError, StackFormatError
from lyrics_asr.features.stack import FeatureStack

logger = logging.getLogger(__name__)


class GlobalCMVN:
    """Per-layer, per-dimension statistics applied to every split."""

    def __init__(self, mean: np.ndarray, std: np.ndarray, frames: int = 0):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        self.frames = int(frames)
        if self.mean.shape != self.std.shape or self.mean.ndim != 2:
            raise DimensionMismatchError(f"CMVN mean {self.mean.shape} and std {self.std.shape} must both be (K, D)")

    @classmethod
    def fit(cls, stacks: Iterable[FeatureStack], min_std: float = 1e-5) -> "GlobalCMVN":
        """Accumulate statistics over ``stacks`` (train split only)."""
        total: Optional[np.ndarray] = None
        total_sq: Optional[np.ndarray] = None
        frames = 0
        for stack in stacks:
            layers = stack.layers.astype(np.float64)
            if total is None:
                total = np.zeros((stack.K, stack.D))
                total_sq = np.zeros((stack.K, stack.D))
            elif total.shape != (stack.K, stack.D):
                raise DimensionMismatchError(f"Stack shape (K={stack.K}, D={stack.D}) differs from {total.shape}")
            total += layers.sum(axis=1)
            total_sq += np.square(layers).sum(axis=1)
            frames += stack.T
        if total is None or total_sq is None:
            raise StackFormatError("Cannot estimate CMVN statistics from zero stacks")
        mean = total / frames
        variance = np.maximum(total_sq / frames - np.square(mean), 0.0)
        logger.info(f"Estimated CMVN over {frames} frames")
        return cls(mean, np.maximum(np.sqrt(variance), min_std), frames)

    def apply(self, stack: FeatureStack) -> FeatureStack:
        if (stack.K, stack.D) != self.mean.shape:
            raise DimensionMismatchError(f"Stack (K={stack.K}, D={stack.D}) does not match CMVN {self.mean.shape}")
        normalized = (stack.layers - self.mean[:, None, :]) / self.std[:, None, :]
        return stack.with_layers(normalized)

    def save(self, path: Union[str, Path]) -> Path:
        cmvn_path = Path(path)
        cmvn_path.parent.mkdir(parents=True, exist_ok=True)
        with open(cmvn_path, "wb") as handle:
            np.savez(handle, mean=self.mean, std=self.std, frames=np.array(self.frames))
        return cmvn_path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GlobalCMVN":
        try:
            with np.load(Path(path)) as data:
                return cls(data["mean"], data["std"], int(data["frames"]))
        except (OSError, KeyError, ValueError) as e:
            raise StackFormatError(f"Cannot read CMVN statistics from {path}: {e}") from e
