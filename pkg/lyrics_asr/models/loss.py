"""Training objectives: label-smoothed cross-entropy and CTC."""

import logging
import math
from typing import List, Sequence, Tuple

import torch
from torch import nn

logger = logging.getLogger(__name__)

IGNORE_ID = -1


class LabelSmoothingLoss(nn.Module):
    """
    Cross-entropy against the smoothed target distribution.

    The target puts ``1 - smoothing`` on the reference token and spreads
    ``smoothing`` evenly over the other ``size - 1`` tokens. Positions equal
    to ``padding_idx`` are ignored. The sum is divided by the number of
    tokens when ``normalize_length`` is set, otherwise by the batch size.
    """

    def __init__(self, size: int, padding_idx: int = IGNORE_ID, smoothing: float = 0.0,
                 normalize_length: bool = False):
        super().__init__()
        self.size = size
        self.padding_idx = padding_idx
        self.smoothing = smoothing
        self.confidence = 1.0 - smoothing
        self.normalize_length = normalize_length

    def forward(self, logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        """
        Args:
            logits: (B, L, size)
            target: (B, L) token ids, ``padding_idx`` where ignored

        Returns:
            Scalar loss
        """
        batch_size = logits.size(0)
        logits = logits.reshape(-1, self.size)
        target = target.reshape(-1)
        ignore = target == self.padding_idx
        total = int((~ignore).sum())
        log_probs = torch.log_softmax(logits, dim=-1)
        true_dist = torch.full_like(log_probs, self.smoothing / (self.size - 1))
        true_dist.scatter_(1, target.masked_fill(ignore, 0).unsqueeze(1), self.confidence)
        # 0 * log(0) terms vanish when smoothing is zero
        cross_entropy = -(true_dist * log_probs.masked_fill(true_dist == 0, 0.0)).sum(dim=1)
        cross_entropy = cross_entropy.masked_fill(ignore, 0.0)
        denom = total if self.normalize_length else batch_size
        return cross_entropy.sum() / max(denom, 1)


def smoothed_target_entropy(size: int, smoothing: float) -> float:
    """Per-token loss floor: entropy of the smoothed target distribution."""
    if smoothing == 0.0:
        return 0.0
    return -(1.0 - smoothing) * math.log(1.0 - smoothing) - smoothing * math.log(smoothing / (size - 1))


def ctc_required_frames(target: Sequence[int]) -> int:
    """Minimum encoder frames for a CTC path: length plus repeated neighbours."""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def ctc_loss(log_probs: torch.Tensor, enc_lengths: torch.Tensor, targets: List[List[int]],
             blank: int) -> torch.Tensor:
    """
    CTC negative log-likelihood summed over the batch and divided by its size.

    Args:
        log_probs: (B, H, vocab) log-softmax outputs
        enc_lengths: (B,) valid frames
        targets: token sequences (no sos/eos)
        blank: blank id

    Returns:
        Scalar loss
    """
    flat = torch.tensor([token for target in targets for token in target], dtype=torch.long)
    target_lengths = torch.tensor([len(target) for target in targets], dtype=torch.long)
    loss = nn.functional.ctc_loss(
        log_probs.transpose(0, 1),
        flat,
        enc_lengths.cpu(),
        target_lengths,
        blank=blank,
        reduction="sum",
        zero_infinity=False,
    )
    return loss / len(targets)


def accuracy(logits: torch.Tensor, target: torch.Tensor, ignore_id: int = IGNORE_ID) -> float:
    """Token accuracy of argmax predictions over non-ignored positions."""
    mask = target != ignore_id
    if not bool(mask.any()):
        return 0.0
    predictions = logits.argmax(dim=-1)
    return float((predictions[mask] == target[mask]).float().mean())


def add_sos_eos(targets: List[List[int]], sos: int, eos: int, pad: int
                ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Decoder inputs ``[sos] + y`` (padded with ``pad``), outputs ``y + [eos]``
    (padded with IGNORE_ID), and their lengths.
    """
    max_len = max(len(target) for target in targets) + 1
    ys_in = torch.full((len(targets), max_len), pad, dtype=torch.long)
    ys_out = torch.full((len(targets), max_len), IGNORE_ID, dtype=torch.long)
    for i, target in enumerate(targets):
        ys_in[i, : len(target) + 1] = torch.tensor([sos] + list(target), dtype=torch.long)
        ys_out[i, : len(target) + 1] = torch.tensor(list(target) + [eos], dtype=torch.long)
    lengths = torch.tensor([len(target) + 1 for target in targets], dtype=torch.long)
    return ys_in, ys_out, lengths
