"""Language models for shallow fusion and perplexity reporting."""

import logging
from typing import Sequence

from lyrics_asr.lm.arpa import BackoffNGramLM, read_arpa, write_arpa
from lyrics_asr.lm.base import LanguageModel, UniformLM, lm_score, perplexity
from lyrics_asr.lm.neural import (
    NeuralLanguageModel,
    NeuralLMConfig,
    NeuralLMKind,
    RecurrentLM,
    TransformerLM,
    build_neural_lm,
    load_neural_lm,
    save_neural_lm,
    train_neural_lm,
)
from lyrics_asr.lm.ngram import NGramLM, train_ngram

logger = logging.getLogger(__name__)


def load_language_model(path: str, symbols: Sequence[str]) -> LanguageModel:
    """Open an ARPA file (``.arpa``) or a neural LM checkpoint."""
    if path.endswith(".arpa"):
        return read_arpa(path, symbols)
    module, _, vocab_size = load_neural_lm(path)
    return NeuralLanguageModel(module, vocab_size)


__all__ = [
    "BackoffNGramLM",
    "LanguageModel",
    "NGramLM",
    "NeuralLMConfig",
    "NeuralLMKind",
    "NeuralLanguageModel",
    "RecurrentLM",
    "TransformerLM",
    "UniformLM",
    "build_neural_lm",
    "lm_score",
    "load_language_model",
    "load_neural_lm",
    "perplexity",
    "read_arpa",
    "save_neural_lm",
    "train_neural_lm",
    "train_ngram",
    "write_arpa",
]
