"""Inverse square-root learning-rate schedule with linear warmup."""

import math
from typing import List

import torch

from lyrics_asr.exceptions import ConfigError


def lr_schedule(step: int, d_model: int, lr_scale: float, warmup: int) -> float:
    """
    ``lr_scale * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)``.

    Rises linearly to its peak at ``step == warmup`` and decays as
    ``step^-0.5`` afterwards.
    """
    if step < 1:
        raise ConfigError(f"Schedule steps start at 1, got {step}")
    if warmup < 1:
        raise ConfigError(f"warmup must be at least 1, got {warmup}")
    return lr_scale * d_model ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


def peak_lr(d_model: int, lr_scale: float, warmup: int) -> float:
    return lr_schedule(warmup, d_model, lr_scale, warmup)


def lr_scale_for_peak(target_peak: float, d_model: int, warmup: int) -> float:
    """Scale that makes the schedule peak at ``target_peak``."""
    return target_peak * math.sqrt(d_model * warmup)


class WarmupScheduler:
    """
    Sets the learning rate of every parameter group before each step.

    Groups may carry an ``lr_multiplier`` applied on top of the schedule.
    """

    def __init__(self, optimizer: torch.optim.Optimizer, d_model: int, lr_scale: float, warmup: int):
        self.optimizer = optimizer
        self.d_model = d_model
        self.lr_scale = lr_scale
        self.warmup = warmup
        self._step = 0
        self._rate = 0.0

    @property
    def step_num(self) -> int:
        return self._step

    @property
    def rate(self) -> float:
        return self._rate

    def step(self) -> float:
        """Advance one step and update the optimizer's learning rates."""
        self._step += 1
        self._rate = lr_schedule(self._step, self.d_model, self.lr_scale, self.warmup)
        for group in self.optimizer.param_groups:
            group["lr"] = self._rate * group.get("lr_multiplier", 1.0)
        return self._rate

    def group_rates(self) -> List[float]:
        return [group["lr"] for group in self.optimizer.param_groups]
