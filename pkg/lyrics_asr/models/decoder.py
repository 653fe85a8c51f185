"""Transformer decoder with cached incremental decoding."""

import logging
from typing import List, Optional, Tuple

import torch
from torch import nn

from lyrics_asr.models.attention import MultiHeadedAttention
from lyrics_asr.models.config import DecoderConfig
from lyrics_asr.models.embedding import PositionalEncoding
from lyrics_asr.models.encoder import PositionwiseFeedForward
from lyrics_asr.models.mask import subsequent_mask

logger = logging.getLogger(__name__)


class DecoderLayer(nn.Module):
    """Pre-norm causal self-attention, source attention and feed-forward."""

    def __init__(self, size: int, heads: int, ff_units: int, dropout: float):
        super().__init__()
        self.self_attn = MultiHeadedAttention(heads, size, dropout)
        self.src_attn = MultiHeadedAttention(heads, size, dropout)
        self.feed_forward = PositionwiseFeedForward(size, ff_units, dropout)
        self.norm1 = nn.LayerNorm(size)
        self.norm2 = nn.LayerNorm(size)
        self.norm3 = nn.LayerNorm(size)
        self.dropout = nn.Dropout(dropout)

    def forward(self, tgt: torch.Tensor, tgt_mask: torch.Tensor, memory: torch.Tensor,
                memory_mask: Optional[torch.Tensor], cache: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        Args:
            tgt: (B, L, size) inputs
            tgt_mask: (B, L, L) causal mask
            memory: (B, H, size) encoder states
            memory_mask: (B, 1, H)
            cache: (B, L-1, size) outputs of this layer for the first L-1 positions

        Returns:
            (B, L, size) outputs
        """
        residual = tgt
        tgt = self.norm1(tgt)
        if cache is None:
            tgt_q, tgt_q_mask = tgt, tgt_mask
        else:
            tgt_q = tgt[:, -1:, :]
            residual = residual[:, -1:, :]
            tgt_q_mask = tgt_mask[:, -1:, :]
        x = residual + self.dropout(self.self_attn(tgt_q, tgt, tgt, tgt_q_mask))
        x = x + self.dropout(self.src_attn(self.norm2(x), memory, memory, memory_mask))
        x = x + self.dropout(self.feed_forward(self.norm3(x)))
        if cache is not None:
            x = torch.cat([cache, x], dim=1)
        return x


class TransformerDecoder(nn.Module):
    """Token embedding + absolute positions, decoder blocks, output projection."""

    def __init__(self, vocab_size: int, cfg: DecoderConfig):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, cfg.model_dim)
        self.pos_enc = PositionalEncoding(cfg.model_dim, cfg.dropout)
        self.decoders = nn.ModuleList(
            DecoderLayer(cfg.model_dim, cfg.attention_heads, cfg.ff_units, cfg.dropout)
            for _ in range(cfg.num_blocks)
        )
        self.after_norm = nn.LayerNorm(cfg.model_dim)
        self.output_layer = nn.Linear(cfg.model_dim, vocab_size)

    def forward(self, ys_in: torch.Tensor, ys_lengths: torch.Tensor, memory: torch.Tensor,
                memory_mask: torch.Tensor) -> torch.Tensor:
        """
        Teacher-forced decoding.

        Args:
            ys_in: (B, L) input tokens starting with sos
            ys_lengths: (B,) valid input lengths
            memory: (B, H, size)
            memory_mask: (B, 1, H)

        Returns:
            (B, L, vocab) logits
        """
        length = ys_in.size(1)
        valid = torch.arange(length, device=ys_in.device).unsqueeze(0) < ys_lengths.unsqueeze(1)
        tgt_mask = valid.unsqueeze(1) & subsequent_mask(length, ys_in.device).unsqueeze(0)
        x = self.pos_enc(self.embed(ys_in))
        for layer in self.decoders:
            x = layer(x, tgt_mask, memory, memory_mask)
        return self.output_layer(self.after_norm(x))

    def forward_one_step(self, tgt: torch.Tensor, memory: torch.Tensor, memory_mask: Optional[torch.Tensor],
                         cache: Optional[List[torch.Tensor]] = None
                         ) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        """
        Log-probabilities of the token following ``tgt``.

        Args:
            tgt: (B, L) prefix tokens
            memory: (B, H, size)
            memory_mask: (B, 1, H) or None
            cache: per-layer outputs for the first L-1 positions

        Returns:
            ((B, vocab) log-probabilities, per-layer outputs for all L positions)
        """
        length = tgt.size(1)
        tgt_mask = subsequent_mask(length, tgt.device).unsqueeze(0)
        x = self.pos_enc(self.embed(tgt))
        if cache is None:
            cache = [None] * len(self.decoders)
        new_cache = []
        for layer_cache, layer in zip(cache, self.decoders):
            x = layer(x, tgt_mask, memory, memory_mask, cache=layer_cache)
            new_cache.append(x)
        y = self.after_norm(x[:, -1])
        return torch.log_softmax(self.output_layer(y), dim=-1), new_cache

    def source_attention(self) -> torch.Tensor:
        """(layers, B, heads, L, H) source-attention probabilities of the last call."""
        return torch.stack([layer.src_attn.attn for layer in self.decoders])
