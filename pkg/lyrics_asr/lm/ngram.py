"""Count-based n-gram language model with interpolated absolute discounting."""

import logging
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np

from lyrics_asr.corpus.vocabulary import BLANK_ID, EOS_ID, PAD_ID, SOS_ID
from lyrics_asr.exceptions import ConfigError, DataError

logger = logging.getLogger(__name__)

Context = Tuple[int, ...]


class NGramLM:
    """
    Interpolated absolute discounting.

    For a context ``h`` seen ``c(h)`` times with ``N1+(h)`` distinct
    continuations::

        P(w | h) = max(c(h, w) - d, 0) / c(h) + d * N1+(h) / c(h) * P(w | h')

    where ``h'`` drops the oldest token. Unseen contexts defer to ``h'``; the
    chain ends at a uniform floor over the predictable tokens.
    """

    def __init__(
        self,
        order: int,
        discount: float,
        vocab_size: int,
        counts: List[Dict[Context, Dict[int, int]]],
        sos_id: int = SOS_ID,
        eos_id: int = EOS_ID,
        non_predictable: Iterable[int] = (BLANK_ID, SOS_ID, PAD_ID),
    ):
        self.order = order
        self.discount = discount
        self.vocab_size = vocab_size
        self.sos_id = sos_id
        self.eos_id = eos_id
        self.non_predictable: FrozenSet[int] = frozenset(non_predictable)
        self.predictable = np.array([i for i in range(vocab_size) if i not in self.non_predictable])
        self._counts = counts
        self._totals = [{context: sum(nexts.values()) for context, nexts in level.items()} for level in counts]
        self._distribution = lru_cache(maxsize=65536)(self._compute_distribution)

    @property
    def counts(self) -> List[Dict[Context, Dict[int, int]]]:
        """Continuation counts indexed by context length."""
        return self._counts

    def context_of(self, prefix: Sequence[int]) -> Context:
        """The last ``order - 1`` tokens of a prefix."""
        if self.order == 1:
            return ()
        return tuple(prefix[-(self.order - 1):])

    def backoff_mass(self, context: Context) -> float:
        """Weight ``d * N1+(h) / c(h)`` given to the lower order (1.0 for unseen contexts)."""
        level = len(context)
        total = self._totals[level].get(context)
        if not total:
            return 1.0
        return self.discount * len(self._counts[level][context]) / total

    def _compute_distribution(self, context: Context) -> np.ndarray:
        dist = np.zeros(self.vocab_size)
        dist[self.predictable] = 1.0 / len(self.predictable)
        for k in range(len(context) + 1):
            history = context[len(context) - k:] if k else ()
            nexts = self._counts[k].get(history)
            if not nexts:
                continue
            total = self._totals[k][history]
            dist = dist * (self.discount * len(nexts) / total)
            for token, count in nexts.items():
                dist[token] += max(count - self.discount, 0.0) / total
        return dist

    def distribution(self, context: Context) -> np.ndarray:
        """Probabilities (not logs) over the full vocabulary for a context tuple."""
        return self._distribution(tuple(context))

    def prob(self, token: int, context: Sequence[int]) -> float:
        return float(self.distribution(self.context_of(context))[token])

    def next_log_probs(self, prefix: Sequence[int]) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.distribution(self.context_of(prefix)))

    def seen_ngrams(self, length: int) -> Dict[Context, int]:
        """Every n-gram of ``length`` tokens observed in training with its count."""
        grams: Dict[Context, int] = {}
        for context, nexts in self._counts[length - 1].items():
            for token, count in nexts.items():
                grams[context + (token,)] = count
        return grams

    def __repr__(self) -> str:
        return f"NGramLM(order={self.order}, discount={self.discount}, vocab_size={self.vocab_size})"


def train_ngram(
    corpus: Sequence[Sequence[int]],
    vocab_size: int,
    order: int = 4,
    discount: float = 0.5,
    sos_id: int = SOS_ID,
    eos_id: int = EOS_ID,
    non_predictable: Iterable[int] = (BLANK_ID, SOS_ID, PAD_ID),
) -> NGramLM:
    """
    Count n-grams over ``[sos] + sequence + [eos]`` for every training sequence.

    Args:
        corpus: Token sequences without sos/eos
        vocab_size: Size of the token space
        order: n (4 for the default model)
        discount: Absolute discount d in (0, 1)
        sos_id: Start token (only ever a context)
        eos_id: End token (predicted after every sequence)
        non_predictable: Ids that never receive probability mass

    Returns:
        Trained NGramLM
    """
    if order < 1:
        raise ConfigError(f"n-gram order must be at least 1, got {order}")
    if not 0.0 < discount < 1.0:
        raise ConfigError(f"Discount must lie in (0, 1), got {discount}")
    if not corpus:
        raise DataError("Cannot train an n-gram model on an empty corpus")
    excluded = set(non_predictable)
    counts: List[Dict[Context, Dict[int, int]]] = [{} for _ in range(order)]
    for sequence in corpus:
        history = [sos_id]
        for token in list(sequence) + [eos_id]:
            if not 0 <= token < vocab_size or token in excluded:
                raise DataError(f"Token {token} cannot be modelled (vocab size {vocab_size})")
            for k in range(min(order - 1, len(history)) + 1):
                context = tuple(history[len(history) - k:]) if k else ()
                nexts = counts[k].setdefault(context, {})
                nexts[token] = nexts.get(token, 0) + 1
            history.append(token)
    # Deterministic iteration order for serialization
    counts = [
        {context: dict(sorted(nexts.items())) for context, nexts in sorted(level.items())}
        for level in counts
    ]
    n_tokens = sum(counts[0][()].values())
    logger.info(f"Trained {order}-gram model on {len(corpus)} sequences ({n_tokens} tokens, d={discount})")
    return NGramLM(order, discount, vocab_size, counts, sos_id, eos_id, excluded)
