"""Recurrent and transformer language models for shallow fusion."""

import logging
import math
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import BaseModel, Field, model_validator
from torch import nn

from lyrics_asr.corpus.vocabulary import BLANK_ID, EOS_ID, PAD_ID, SOS_ID
from lyrics_asr.exceptions import CheckpointError, DataError, DecodingError, NaNLossError
from lyrics_asr.models.checkpoint import load_checkpoint, save_checkpoint
from lyrics_asr.models.embedding import PositionalEncoding
from lyrics_asr.models.encoder import TransformerEncoderLayer
from lyrics_asr.models.loss import IGNORE_ID
from lyrics_asr.models.mask import subsequent_mask

logger = logging.getLogger(__name__)


class NeuralLMKind(str, Enum):
    """Neural language model architectures."""
    RECURRENT = "recurrent"
    TRANSFORMER = "transformer"


class NeuralLMConfig(BaseModel):
    """Neural LM hyperparameters."""

    kind: NeuralLMKind = Field(NeuralLMKind.RECURRENT, description="recurrent or transformer")
    num_layers: int = Field(2, ge=1, description="LSTM layers or transformer blocks")
    hidden: int = Field(650, ge=1, description="LSTM hidden size or transformer feed-forward units")
    attention_heads: int = Field(4, ge=1, description="Transformer attention heads")
    attention_dim: int = Field(256, ge=1, description="Transformer model width")
    dropout: float = Field(0.0, ge=0.0, lt=1.0, description="Dropout probability")
    seed: int = Field(0, description="Initialization seed")

    @model_validator(mode="after")
    def _check(self) -> "NeuralLMConfig":
        if self.kind == NeuralLMKind.TRANSFORMER and self.attention_dim % self.attention_heads:
            raise ValueError(f"attention_dim {self.attention_dim} is not divisible by {self.attention_heads} heads")
        return self


class RecurrentLM(nn.Module):
    """Embedding, stacked LSTM, output projection."""

    def __init__(self, vocab_size: int, num_layers: int, hidden: int, dropout: float = 0.0):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, hidden)
        self.lstm = nn.LSTM(hidden, hidden, num_layers=num_layers, batch_first=True,
                            dropout=dropout if num_layers > 1 else 0.0)
        self.dropout = nn.Dropout(dropout)
        self.output_layer = nn.Linear(hidden, vocab_size)

    def forward(self, tokens: torch.Tensor, state: Optional[Tuple[torch.Tensor, torch.Tensor]] = None
                ) -> Tuple[torch.Tensor, Tuple[torch.Tensor, torch.Tensor]]:
        """(B, L) tokens to (B, L, vocab) logits and the final LSTM state."""
        output, state = self.lstm(self.dropout(self.embed(tokens)), state)
        return self.output_layer(self.dropout(output)), state


class TransformerLM(nn.Module):
    """Causal self-attention blocks over token embeddings."""

    def __init__(self, vocab_size: int, num_layers: int, attention_heads: int, hidden: int,
                 attention_dim: int, dropout: float = 0.0):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, attention_dim)
        self.pos_enc = PositionalEncoding(attention_dim, dropout)
        self.encoders = nn.ModuleList(
            TransformerEncoderLayer(attention_dim, attention_heads, hidden, dropout) for _ in range(num_layers)
        )
        self.after_norm = nn.LayerNorm(attention_dim)
        self.output_layer = nn.Linear(attention_dim, vocab_size)

    def forward(self, tokens: torch.Tensor, state: Any = None) -> Tuple[torch.Tensor, None]:
        mask = subsequent_mask(tokens.size(1), tokens.device).unsqueeze(0)
        x = self.pos_enc(self.embed(tokens))
        for layer in self.encoders:
            x = layer(x, mask)
        return self.output_layer(self.after_norm(x)), None


def build_neural_lm(config: NeuralLMConfig, vocab_size: int) -> nn.Module:
    """Construct a neural LM with seeded initialization."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        if config.kind == NeuralLMKind.RECURRENT:
            module: nn.Module = RecurrentLM(vocab_size, config.num_layers, config.hidden, config.dropout)
        else:
            module = TransformerLM(vocab_size, config.num_layers, config.attention_heads, config.hidden,
                                   config.attention_dim, config.dropout)
    logger.debug(f"Built {config.kind.value} LM with {sum(p.numel() for p in module.parameters())} parameters")
    return module


class NeuralLanguageModel:
    """
    Scoring wrapper: eval mode, no gradients, memoized prefixes.

    Non-predictable ids are masked before the softmax so every returned
    vector is a normalized distribution over the predictable tokens.
    """

    def __init__(self, module: nn.Module, vocab_size: int, sos_id: int = SOS_ID, eos_id: int = EOS_ID,
                 non_predictable: Iterable[int] = (BLANK_ID, SOS_ID, PAD_ID), cache_size: int = 65536):
        self.module = module.eval()
        self.vocab_size = vocab_size
        self.sos_id = sos_id
        self.eos_id = eos_id
        self._mask = torch.zeros(vocab_size, dtype=torch.bool)
        self._mask[list(non_predictable)] = True
        self._step = lru_cache(maxsize=cache_size)(self._compute_step)

    def _normalize(self, logits: torch.Tensor) -> np.ndarray:
        logits = logits.double().masked_fill(self._mask, -math.inf)
        return torch.log_softmax(logits, dim=-1).numpy()

    def _compute_step(self, prefix: Tuple[int, ...]) -> Tuple[np.ndarray, Any]:
        with torch.no_grad():
            if isinstance(self.module, RecurrentLM):
                # Extend the cached state of the shorter prefix by one token
                state = self._step(prefix[:-1])[1] if len(prefix) > 1 else None
                logits, state = self.module(torch.tensor([[prefix[-1]]]), state)
                return self._normalize(logits[0, -1]), state
            logits, _ = self.module(torch.tensor([list(prefix)]))
            return self._normalize(logits[0, -1]), None

    def next_log_probs(self, prefix: Sequence[int]) -> np.ndarray:
        if not prefix or prefix[0] != self.sos_id:
            raise DecodingError("LM prefix must start with sos")
        return self._step(tuple(prefix))[0].copy()


def _teacher_forcing_batch(sequences: Sequence[Sequence[int]], sos_id: int, eos_id: int,
                           pad_id: int) -> Tuple[torch.Tensor, torch.Tensor]:
    length = max(len(sequence) for sequence in sequences) + 1
    inputs = torch.full((len(sequences), length), pad_id, dtype=torch.long)
    targets = torch.full((len(sequences), length), IGNORE_ID, dtype=torch.long)
    for i, sequence in enumerate(sequences):
        inputs[i, : len(sequence) + 1] = torch.tensor([sos_id] + list(sequence))
        targets[i, : len(sequence) + 1] = torch.tensor(list(sequence) + [eos_id])
    return inputs, targets


def train_neural_lm(
    module: nn.Module,
    sequences: Sequence[Sequence[int]],
    steps: int = 600,
    lr: float = 0.01,
    seed: int = 0,
    sos_id: int = SOS_ID,
    eos_id: int = EOS_ID,
    pad_id: int = PAD_ID,
) -> List[float]:
    """
    Full-batch teacher-forced training with Adam.

    Args:
        module: RecurrentLM or TransformerLM
        sequences: Training token sequences without sos/eos
        steps: Optimizer steps
        lr: Adam learning rate
        seed: Seed for dropout
        sos_id: Start token
        eos_id: End token appended to every target
        pad_id: Input padding token

    Returns:
        Per-step mean token cross-entropy
    """
    if not sequences:
        raise DataError("Cannot train a language model on an empty corpus")
    inputs, targets = _teacher_forcing_batch(sequences, sos_id, eos_id, pad_id)
    optimizer = torch.optim.Adam(module.parameters(), lr=lr)
    losses: List[float] = []
    module.train()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        for step in range(1, steps + 1):
            logits, _ = module(inputs)
            loss = nn.functional.cross_entropy(logits.reshape(-1, logits.size(-1)), targets.reshape(-1),
                                               ignore_index=IGNORE_ID)
            if not torch.isfinite(loss):
                raise NaNLossError(step, "lm-full-batch", float(loss))
            optimizer.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(module.parameters(), 5.0)
            optimizer.step()
            losses.append(float(loss))
            if step % 100 == 0:
                logger.debug(f"LM step {step}: loss {losses[-1]:.4f}")
    module.eval()
    logger.info(f"Trained neural LM for {steps} steps, final loss {losses[-1]:.4f}")
    return losses


def save_neural_lm(path: str, module: nn.Module, config: NeuralLMConfig, vocab_size: int,
                   metadata: Optional[Dict[str, Any]] = None) -> None:
    snapshot = {"lm": config.model_dump(mode="json"), "vocab_size": vocab_size}
    save_checkpoint(path, module.state_dict(), snapshot, None, metadata)


def load_neural_lm(path: str) -> Tuple[nn.Module, NeuralLMConfig, int]:
    """
    Returns:
        (module in eval mode, config, vocab size)
    """
    container = load_checkpoint(path)
    snapshot = container["model_config"]
    if "lm" not in snapshot:
        raise CheckpointError(f"{path} does not hold a language model")
    try:
        config = NeuralLMConfig.model_validate(snapshot["lm"])
        vocab_size = int(snapshot["vocab_size"])
        module = build_neural_lm(config, vocab_size)
        module.load_state_dict(container["state_dict"])
    except (ValueError, KeyError, RuntimeError) as e:
        raise CheckpointError(f"Language model checkpoint {path} is inconsistent: {e}") from e
    return module.eval(), config, vocab_size
