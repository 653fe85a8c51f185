"""Attention masks."""

from typing import Optional

import torch


def length_mask(lengths: torch.Tensor, max_len: Optional[int] = None) -> torch.Tensor:
    """(B, T) bool mask, True on valid frames."""
    max_len = int(lengths.max()) if max_len is None else max_len
    steps = torch.arange(max_len, device=lengths.device)
    return steps.unsqueeze(0) < lengths.unsqueeze(1)


def subsequent_mask(size: int, device: Optional[torch.device] = None) -> torch.Tensor:
    """(size, size) lower-triangular bool mask for causal self-attention."""
    return torch.tril(torch.ones(size, size, dtype=torch.bool, device=device))
