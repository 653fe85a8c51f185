"""Seed control for reproducible runs."""

import logging
import random

import numpy as np
import torch

logger = logging.getLogger(__name__)


def set_seed(seed: int, deterministic: bool = True) -> None:
    """
    Seed every random stream used by the toolkit.

    Args:
        seed: Run seed
        deterministic: Also force deterministic torch kernels
    """
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)
    logger.debug(f"Seeded run with {seed} (deterministic={deterministic})")


def derive_seed(seed: int, *tags: object) -> int:
    """Derive a stable child seed from a parent seed and string tags."""
    sequence = np.random.SeedSequence([seed] + [_tag_to_int(t) for t in tags])
    return int(sequence.generate_state(1)[0])


def _tag_to_int(tag: object) -> int:
    value = 0
    for char in str(tag):
        value = (value * 131 + ord(char)) % (2 ** 31 - 1)
    return value
