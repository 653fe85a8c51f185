"""Transformer and conformer encoders."""

import logging
from typing import Optional, Tuple

import torch
from torch import nn

from lyrics_asr.models.attention import MultiHeadedAttention, RelPositionMultiHeadedAttention
from lyrics_asr.models.config import EncoderConfig, EncoderKind
from lyrics_asr.models.embedding import Conv2dSubsampling, PositionalEncoding, RelPositionalEncoding
from lyrics_asr.models.mask import length_mask
from lyrics_asr.models.rnn import BiLSTMEncoder

logger = logging.getLogger(__name__)


class PositionwiseFeedForward(nn.Module):
    def __init__(self, idim: int, hidden_units: int, dropout: float, activation: Optional[nn.Module] = None):
        super().__init__()
        self.w_1 = nn.Linear(idim, hidden_units)
        self.w_2 = nn.Linear(hidden_units, idim)
        self.dropout = nn.Dropout(dropout)
        self.activation = activation if activation is not None else nn.ReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.w_2(self.dropout(self.activation(self.w_1(x))))


class ConvolutionModule(nn.Module):
    """Pointwise conv + GLU, depthwise conv, BatchNorm, Swish, pointwise conv."""

    def __init__(self, channels: int, kernel_size: int):
        super().__init__()
        self.pointwise_conv1 = nn.Conv1d(channels, 2 * channels, kernel_size=1)
        self.depthwise_conv = nn.Conv1d(
            channels, channels, kernel_size, padding=(kernel_size - 1) // 2, groups=channels
        )
        self.norm = nn.BatchNorm1d(channels)
        self.pointwise_conv2 = nn.Conv1d(channels, channels, kernel_size=1)
        self.activation = nn.SiLU()

    def forward(self, x: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
        # x: (B, T, C); valid: (B, T)
        keep = valid.unsqueeze(1).to(x.dtype)
        x = x.transpose(1, 2)
        x = nn.functional.glu(self.pointwise_conv1(x), dim=1)
        x = self.depthwise_conv(x * keep)
        x = self.activation(self.norm(x))
        x = self.pointwise_conv2(x) * keep
        return x.transpose(1, 2)


class TransformerEncoderLayer(nn.Module):
    """Pre-norm self-attention + feed-forward block."""

    def __init__(self, size: int, heads: int, ff_units: int, dropout: float):
        super().__init__()
        self.self_attn = MultiHeadedAttention(heads, size, dropout)
        self.feed_forward = PositionwiseFeedForward(size, ff_units, dropout)
        self.norm1 = nn.LayerNorm(size)
        self.norm2 = nn.LayerNorm(size)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        y = self.norm1(x)
        x = x + self.dropout(self.self_attn(y, y, y, mask))
        return x + self.dropout(self.feed_forward(self.norm2(x)))


class ConformerLayer(nn.Module):
    """Macaron feed-forward halves around relative self-attention and convolution."""

    def __init__(self, size: int, heads: int, ff_units: int, dropout: float, kernel_size: int):
        super().__init__()
        self.feed_forward_macaron = PositionwiseFeedForward(size, ff_units, dropout, nn.SiLU())
        self.self_attn = RelPositionMultiHeadedAttention(heads, size, dropout)
        self.conv_module = ConvolutionModule(size, kernel_size)
        self.feed_forward = PositionwiseFeedForward(size, ff_units, dropout, nn.SiLU())
        self.norm_ff_macaron = nn.LayerNorm(size)
        self.norm_mha = nn.LayerNorm(size)
        self.norm_conv = nn.LayerNorm(size)
        self.norm_ff = nn.LayerNorm(size)
        self.norm_final = nn.LayerNorm(size)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, pos_emb: torch.Tensor, mask: torch.Tensor,
                valid: torch.Tensor) -> torch.Tensor:
        x = x + 0.5 * self.dropout(self.feed_forward_macaron(self.norm_ff_macaron(x)))
        y = self.norm_mha(x)
        x = x + self.dropout(self.self_attn(y, y, y, mask, pos_emb))
        x = x + self.dropout(self.conv_module(self.norm_conv(x), valid))
        x = x + 0.5 * self.dropout(self.feed_forward(self.norm_ff(x)))
        return self.norm_final(x)


class TransformerEncoder(nn.Module):
    """Conv2d subsampling, absolute positions, transformer blocks."""

    def __init__(self, idim: int, cfg: EncoderConfig):
        super().__init__()
        self.embed = Conv2dSubsampling(idim, cfg.model_dim, cfg.subsampling_channels)
        self.pos_enc = PositionalEncoding(cfg.model_dim, cfg.dropout)
        self.encoders = nn.ModuleList(
            TransformerEncoderLayer(cfg.model_dim, cfg.attention_heads, cfg.ff_units, cfg.dropout)
            for _ in range(cfg.num_blocks)
        )
        self.after_norm = nn.LayerNorm(cfg.model_dim)

    def forward(self, xs: torch.Tensor, lengths: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        xs, lengths = self.embed(xs, lengths)
        xs = self.pos_enc(xs)
        mask = length_mask(lengths, xs.size(1)).unsqueeze(1)
        for layer in self.encoders:
            xs = layer(xs, mask)
        return self.after_norm(xs), lengths


class ConformerEncoder(nn.Module):
    """Conv2d subsampling, relative positions, conformer blocks."""

    def __init__(self, idim: int, cfg: EncoderConfig):
        super().__init__()
        self.embed = Conv2dSubsampling(idim, cfg.model_dim, cfg.subsampling_channels)
        self.pos_enc = RelPositionalEncoding(cfg.model_dim, cfg.dropout)
        self.encoders = nn.ModuleList(
            ConformerLayer(cfg.model_dim, cfg.attention_heads, cfg.ff_units, cfg.dropout, cfg.conv_kernel)
            for _ in range(cfg.num_blocks)
        )
        self.after_norm = nn.LayerNorm(cfg.model_dim)

    def forward(self, xs: torch.Tensor, lengths: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        xs, lengths = self.embed(xs, lengths)
        xs, pos_emb = self.pos_enc(xs)
        valid = length_mask(lengths, xs.size(1))
        mask = valid.unsqueeze(1)
        for layer in self.encoders:
            xs = layer(xs, pos_emb, mask, valid)
        return self.after_norm(xs), lengths


def build_encoder(idim: int, cfg: EncoderConfig, output_dim: int) -> nn.Module:
    """Encoder for ``cfg.kind``; every encoder maps (B, T, idim) to (B, ceil(T/4), output_dim)."""
    if cfg.kind == EncoderKind.TRANSFORMER:
        return TransformerEncoder(idim, cfg)
    if cfg.kind == EncoderKind.CONFORMER:
        return ConformerEncoder(idim, cfg)
    return BiLSTMEncoder(idim, cfg, output_dim)
