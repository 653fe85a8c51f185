"""Recurrent probe: bidirectional LSTM encoder and an attention LSTM decoder."""

import logging
from typing import Dict, List, Optional, Tuple

import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from lyrics_asr.models.config import DecoderConfig, EncoderConfig
from lyrics_asr.models.embedding import Conv2dSubsampling

logger = logging.getLogger(__name__)

State = Tuple[List[torch.Tensor], List[torch.Tensor], torch.Tensor]


class BiLSTMEncoder(nn.Module):
    """Conv2d subsampling followed by a stacked bidirectional LSTM."""

    def __init__(self, idim: int, cfg: EncoderConfig, output_dim: int):
        super().__init__()
        hidden = cfg.model_dim
        self.embed = Conv2dSubsampling(idim, hidden, cfg.subsampling_channels)
        self.lstm = nn.LSTM(
            hidden,
            hidden,
            num_layers=cfg.num_blocks,
            bidirectional=True,
            batch_first=True,
            dropout=cfg.dropout if cfg.num_blocks > 1 else 0.0,
        )
        self.projection = nn.Linear(2 * hidden, output_dim)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, xs: torch.Tensor, lengths: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        xs, lengths = self.embed(xs, lengths)
        total = xs.size(1)
        packed = pack_padded_sequence(self.dropout(xs), lengths.cpu(), batch_first=True, enforce_sorted=False)
        output, _ = self.lstm(packed)
        output, _ = pad_packed_sequence(output, batch_first=True, total_length=total)
        return self.projection(output), lengths


class LSTMAttentionDecoder(nn.Module):
    """
    Recurrent decoder with dot-product attention over encoder states.

    At every step the previous token embedding and previous context feed the
    LSTM; the new hidden state attends to the memory and the output layer
    reads the hidden state and the new context.
    """

    def __init__(self, vocab_size: int, cfg: DecoderConfig, memory_dim: int):
        super().__init__()
        hidden = cfg.model_dim
        self.hidden = hidden
        self.memory_dim = memory_dim
        self.embed = nn.Embedding(vocab_size, hidden)
        self.cells = nn.ModuleList(
            nn.LSTMCell((hidden + memory_dim) if i == 0 else hidden, hidden) for i in range(cfg.num_blocks)
        )
        self.att_proj = nn.Linear(hidden, memory_dim, bias=False)
        self.output_layer = nn.Linear(hidden + memory_dim, vocab_size)
        self.dropout = nn.Dropout(cfg.dropout)
        self.attn: Optional[torch.Tensor] = None

    def zero_state(self, memory: torch.Tensor) -> State:
        batch = memory.size(0)
        zeros = memory.new_zeros(batch, self.hidden)
        return [zeros] * len(self.cells), [zeros] * len(self.cells), memory.new_zeros(batch, self.memory_dim)

    def step(self, tokens: torch.Tensor, state: State, memory: torch.Tensor,
             memory_mask: Optional[torch.Tensor]) -> Tuple[torch.Tensor, State, torch.Tensor]:
        """One decoder step: (B, vocab) logits, new state, (B, H) attention."""
        hs, cs, context = state
        x = torch.cat([self.dropout(self.embed(tokens)), context], dim=-1)
        new_hs, new_cs = [], []
        for cell, h, c in zip(self.cells, hs, cs):
            h, c = cell(x, (h, c))
            new_hs.append(h)
            new_cs.append(c)
            x = self.dropout(h)
        scores = torch.bmm(memory, self.att_proj(new_hs[-1]).unsqueeze(2)).squeeze(2)
        if memory_mask is not None:
            valid = memory_mask[:, 0, :]
            scores = scores.masked_fill(~valid, torch.finfo(scores.dtype).min)
        attn = torch.softmax(scores, dim=-1)
        if memory_mask is not None:
            attn = attn.masked_fill(~memory_mask[:, 0, :], 0.0)
        context = torch.bmm(attn.unsqueeze(1), memory).squeeze(1)
        logits = self.output_layer(torch.cat([self.dropout(new_hs[-1]), context], dim=-1))
        return logits, (new_hs, new_cs, context), attn

    def forward(self, ys_in: torch.Tensor, ys_lengths: torch.Tensor, memory: torch.Tensor,
                memory_mask: torch.Tensor) -> torch.Tensor:
        """Teacher-forced (B, L, vocab) logits; attention kept in ``self.attn``."""
        state = self.zero_state(memory)
        outputs, weights = [], []
        for t in range(ys_in.size(1)):
            logits, state, attn = self.step(ys_in[:, t], state, memory, memory_mask)
            outputs.append(logits)
            weights.append(attn)
        # (layers=1, B, heads=1, L, H)
        self.attn = torch.stack(weights, dim=1).detach().unsqueeze(1).unsqueeze(0)
        return torch.stack(outputs, dim=1)

    def forward_one_step(self, tgt: torch.Tensor, memory: torch.Tensor, memory_mask: Optional[torch.Tensor],
                         cache: Optional[Dict[str, object]] = None
                         ) -> Tuple[torch.Tensor, Dict[str, object]]:
        """
        Log-probabilities of the token following ``tgt``.

        ``cache`` holds the state after the first L-1 tokens; the returned
        cache holds the state after all L tokens.
        """
        if cache is None:
            state = self.zero_state(memory)
            pending = range(tgt.size(1))
        else:
            state = cache["state"]
            pending = range(tgt.size(1) - 1, tgt.size(1))
        logits = None
        for t in pending:
            logits, state, _ = self.step(tgt[:, t], state, memory, memory_mask)
        return torch.log_softmax(logits, dim=-1), {"state": state}

    def source_attention(self) -> torch.Tensor:
        """(layers, B, heads, L, H) attention of the last teacher-forced call."""
        return self.attn
