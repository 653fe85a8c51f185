"""Language-model protocol and scoring helpers."""

import logging
import math
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from lyrics_asr.corpus.vocabulary import EOS_ID, SOS_ID
from lyrics_asr.exceptions import DataError

logger = logging.getLogger(__name__)


@runtime_checkable
class LanguageModel(Protocol):
    """Next-token distributions over a recognizer vocabulary."""

    vocab_size: int
    sos_id: int
    eos_id: int

    def next_log_probs(self, prefix: Sequence[int]) -> np.ndarray:
        """Natural-log distribution (float64, length vocab_size) after ``prefix``, which starts with sos."""
        ...


class UniformLM:
    """Uniform distribution over every id not listed as non-predictable."""

    def __init__(self, vocab_size: int, sos_id: int = SOS_ID, eos_id: int = EOS_ID,
                 non_predictable: Iterable[int] = ()):
        self.vocab_size = vocab_size
        self.sos_id = sos_id
        self.eos_id = eos_id
        excluded = set(non_predictable)
        self._log_probs = np.full(vocab_size, -np.inf)
        predictable = [i for i in range(vocab_size) if i not in excluded]
        self._log_probs[predictable] = -math.log(len(predictable))

    def next_log_probs(self, prefix: Sequence[int]) -> np.ndarray:
        return self._log_probs.copy()


def lm_score(lm: LanguageModel, tokens: Sequence[int]) -> float:
    """
    Total natural-log probability of ``tokens`` after sos.

    Nothing is appended: pass the final eos explicitly to score it.
    """
    prefix = [lm.sos_id]
    total = 0.0
    for token in tokens:
        total += float(lm.next_log_probs(prefix)[token])
        prefix.append(token)
    return total


def perplexity(lm: LanguageModel, corpus: Sequence[Sequence[int]]) -> float:
    """
    ``exp(-(1/N) * sum log P)`` with eos appended to every sequence and counted in N.

    Raises:
        DataError: Empty corpus
    """
    if not corpus:
        raise DataError("Perplexity needs a nonempty corpus")
    total = 0.0
    count = 0
    for sequence in corpus:
        total += lm_score(lm, list(sequence) + [lm.eos_id])
        count += len(sequence) + 1
    return math.exp(-total / count)
