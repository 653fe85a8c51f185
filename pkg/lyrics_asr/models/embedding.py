"""Positional encodings and the convolutional front end."""

import math
from typing import Tuple

import torch
from torch import nn


class PositionalEncoding(nn.Module):
    """Absolute sinusoidal encoding; inputs are scaled by sqrt(d_model)."""

    def __init__(self, d_model: int, dropout: float, max_len: int = 5000):
        super().__init__()
        self.d_model = d_model
        self.xscale = math.sqrt(d_model)
        self.dropout = nn.Dropout(p=dropout)
        self.register_buffer("pe", self._table(max_len), persistent=False)

    def _table(self, length: int) -> torch.Tensor:
        pe = torch.zeros(length, self.d_model)
        position = torch.arange(0, length, dtype=torch.float32).unsqueeze(1)
        div_term = torch.exp(torch.arange(0, self.d_model, 2, dtype=torch.float32) * -(math.log(10000.0) / self.d_model))
        pe[:, 0::2] = torch.sin(position * div_term)
        pe[:, 1::2] = torch.cos(position * div_term[: self.d_model // 2])
        return pe.unsqueeze(0)

    def forward(self, x: torch.Tensor, offset: int = 0) -> torch.Tensor:
        if offset + x.size(1) > self.pe.size(1):
            self.pe = self._table(offset + x.size(1)).to(device=x.device)
        pe = self.pe[:, offset: offset + x.size(1)].to(dtype=x.dtype, device=x.device)
        return self.dropout(x * self.xscale + pe)


class RelPositionalEncoding(nn.Module):
    """
    Relative encoding over the 2T-1 offsets T-1 .. -(T-1).

    Returns the scaled input and a separate (1, 2T-1, d_model) position
    embedding consumed by relative self-attention.
    """

    def __init__(self, d_model: int, dropout: float, max_len: int = 5000):
        super().__init__()
        self.d_model = d_model
        self.xscale = math.sqrt(d_model)
        self.dropout = nn.Dropout(p=dropout)
        self.register_buffer("pe", self._table(max_len), persistent=False)

    def _table(self, length: int) -> torch.Tensor:
        position = torch.arange(0, length, dtype=torch.float32).unsqueeze(1)
        div_term = torch.exp(torch.arange(0, self.d_model, 2, dtype=torch.float32) * -(math.log(10000.0) / self.d_model))
        pe_positive = torch.zeros(length, self.d_model)
        pe_negative = torch.zeros(length, self.d_model)
        pe_positive[:, 0::2] = torch.sin(position * div_term)
        pe_positive[:, 1::2] = torch.cos(position * div_term[: self.d_model // 2])
        pe_negative[:, 0::2] = torch.sin(-1 * position * div_term)
        pe_negative[:, 1::2] = torch.cos(-1 * position * div_term[: self.d_model // 2])
        pe_positive = torch.flip(pe_positive, [0])
        return torch.cat([pe_positive, pe_negative[1:]], dim=0).unsqueeze(0)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        length = x.size(1)
        if length > (self.pe.size(1) + 1) // 2:
            self.pe = self._table(length).to(device=x.device)
        center = self.pe.size(1) // 2
        pos_emb = self.pe[:, center - length + 1: center + length].to(dtype=x.dtype, device=x.device)
        return self.dropout(x * self.xscale), self.dropout(pos_emb)


def subsampled_lengths(lengths: torch.Tensor) -> torch.Tensor:
    """Frame counts after the factor-4 front end: ceil(ceil(T / 2) / 2)."""
    return ((lengths + 1) // 2 + 1) // 2


class Conv2dSubsampling(nn.Module):
    """
    Two 3x3 stride-2 convolutions (padding 1), factor 4 in time.

    Padded frames are zeroed before each convolution so a padded batch gives
    the same states as each utterance alone.
    """

    def __init__(self, idim: int, odim: int, channels: int = 0):
        super().__init__()
        channels = channels or odim
        self.conv1 = nn.Conv2d(1, channels, kernel_size=3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, kernel_size=3, stride=2, padding=1)
        freq = ((idim + 1) // 2 + 1) // 2
        self.out = nn.Linear(channels * freq, odim)
        self.subsampling_factor = 4

    @staticmethod
    def _mask(x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        # x: (B, C, T, F)
        steps = torch.arange(x.size(2), device=x.device)
        valid = steps.unsqueeze(0) < lengths.unsqueeze(1)
        return x * valid[:, None, :, None].to(x.dtype)

    def forward(self, x: torch.Tensor, lengths: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            x: (B, T, idim) features
            lengths: (B,) valid frame counts

        Returns:
            (B, ceil(T/4), odim) states and their lengths
        """
        x = self._mask(x.unsqueeze(1), lengths)
        x = torch.relu(self.conv1(x))
        lengths = (lengths + 1) // 2
        x = self._mask(x, lengths)
        x = torch.relu(self.conv2(x))
        lengths = (lengths + 1) // 2
        x = self._mask(x, lengths)
        batch, channels, time, freq = x.size()
        x = self.out(x.transpose(1, 2).contiguous().view(batch, time, channels * freq))
        return x, lengths
