"""Test configuration and fixtures for the lyrics recognition toolkit."""

import os
from typing import Any, Dict, FrozenSet, Optional, Sequence, Tuple

import numpy as np
import pytest

# Set test environment variables before any toolkit import reads them
os.environ["LYRICS_ASR_LOG_LEVEL"] = "WARNING"
os.environ["LYRICS_ASR_ENABLE_METRICS"] = "false"
os.environ["LYRICS_ASR_DETERMINISTIC"] = "true"

from lyrics_asr.corpus import Vocabulary, generate_synthetic_corpus
from lyrics_asr.corpus.synthetic import SyntheticConfig
from lyrics_asr.models import ModelConfig, build_model
from lyrics_asr.presets import model_config_for

# Short tokens keep the synthetic audio and the models small
FAST_SYNTH = SyntheticConfig(token_duration=0.04, max_words=2, max_word_len=3)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end training runs (deselect with '-m \"not slow\"')")


class ToyDecoder:
    """
    Step decoder over a four-token vocabulary with pseudo-random, prefix-keyed
    log-probabilities.

    Token 3 is eos; sos (4) lies outside the vocabulary so every token can be
    emitted. The same (seed, prefix) always yields the same distribution.
    """

    vocab_size = 4
    eos_id = 3
    sos_id = 4
    non_emitting_ids: FrozenSet[int] = frozenset()

    def __init__(self, seed: int = 0, scale: float = 2.0):
        self.seed = seed
        self.scale = scale
        self.calls = 0

    def log_probs(self, prefix: Sequence[int]) -> np.ndarray:
        rng = np.random.default_rng([self.seed] + [int(token) for token in prefix])
        logits = self.scale * rng.standard_normal(self.vocab_size)
        return logits - np.logaddexp.reduce(logits)

    def decoder_step_cached(self, prefix: Sequence[int], enc_states: Any,
                            cache: Any = None) -> Tuple[np.ndarray, Any]:
        self.calls += 1
        return self.log_probs(prefix), None


class ScriptedDecoder(ToyDecoder):
    """Emits a fixed token script with probability close to one."""

    def __init__(self, script: Sequence[int]):
        super().__init__()
        self.script = list(script)

    def log_probs(self, prefix: Sequence[int]) -> np.ndarray:
        position = len(prefix) - 1
        target = self.script[position] if position < len(self.script) else self.eos_id
        probs = np.full(self.vocab_size, 1e-4)
        probs[target] = 1.0
        return np.log(probs / probs.sum())


@pytest.fixture
def toy_decoder():
    """Random toy decoder with a fixed seed."""
    return ToyDecoder(seed=11)


@pytest.fixture
def char_vocab():
    """Character vocabulary over a, b, c and the space."""
    return Vocabulary(["<space>", "a", "b", "c"])


@pytest.fixture
def synthetic_corpus():
    """Twelve-utterance synthetic corpus with train/dev/test splits, kept in memory."""
    return generate_synthetic_corpus(12, 3, seed=7, dev_fraction=0.25, test_fraction=0.25, config=FAST_SYNTH)


@pytest.fixture
def saved_corpus(tmp_path, synthetic_corpus):
    """The synthetic corpus written to disk; returns the rooted manifest."""
    manifest, store = synthetic_corpus
    return store.save(tmp_path / "corpus", manifest)


def tiny_model_config(preset: str = "desk-transformer", input_dim: int = 16, vocab_size: int = 8,
                      num_layers: int = 1, seed: int = 0,
                      overrides: Optional[Dict[str, Any]] = None) -> ModelConfig:
    """Desk preset shrunk to one block per side and width 32."""
    shrink: Dict[str, Any] = {
        "encoder": {"num_blocks": 1, "model_dim": 32, "ff_units": 64},
        "decoder": {"num_blocks": 1, "model_dim": 32, "ff_units": 64},
    }
    if preset == "desk-probe":
        shrink = {
            "encoder": {"num_blocks": 1, "model_dim": 16, "ff_units": 16},
            "decoder": {"num_blocks": 1, "model_dim": 16, "ff_units": 16},
        }
    for section, values in (overrides or {}).items():
        if isinstance(values, dict):
            shrink.setdefault(section, {}).update(values)
        else:
            shrink[section] = values
    return model_config_for(preset, input_dim, vocab_size, num_layers, seed, shrink)


@pytest.fixture
def tiny_transformer():
    """One-block transformer recognizer on 16-dim features, eight tokens."""
    return build_model(tiny_model_config()).eval()


@pytest.fixture
def tiny_conformer():
    """One-block conformer recognizer with a two-layer fusion front end."""
    return build_model(tiny_model_config("desk-conformer", num_layers=2)).eval()


@pytest.fixture
def tiny_probe():
    """One-layer BiLSTM probe."""
    return build_model(tiny_model_config("desk-probe")).eval()
