"""Tests for n-gram, ARPA and neural language models."""

import math
import random

import numpy as np
import pytest

from lyrics_asr.exceptions import ConfigError, DataError, DecodingError, LMFormatError
from lyrics_asr.lm import (
    NeuralLanguageModel,
    NeuralLMConfig,
    UniformLM,
    build_neural_lm,
    lm_score,
    load_language_model,
    perplexity,
    read_arpa,
    save_neural_lm,
    train_neural_lm,
    train_ngram,
    write_arpa,
)
from lyrics_asr.presets import lm_preset

# Reserved ids 0..4, then word units a=5, b=6, c=7
VOCAB_SIZE = 8
A, B, C = 5, 6, 7
EOS = 2
SYMBOLS = ["<blank>", "<sos>", "<eos>", "<unk>", "<pad>", "a", "b", "c"]
NON_PREDICTABLE = (0, 1, 4)


def _lyric_corpus():
    rng = random.Random(3)
    return [[rng.choice([A, B, C]) for _ in range(rng.randint(1, 8))] for _ in range(30)]


class TestUniformAndScoring:
    """Test the uniform model and scoring helpers."""

    def test_uniform_perplexity_is_vocab_size(self):
        """Test that a uniform model over V tokens has perplexity V."""
        # Arrange
        lm = UniformLM(VOCAB_SIZE)

        # Act
        value = perplexity(lm, _lyric_corpus())

        # Assert
        assert value == pytest.approx(VOCAB_SIZE, abs=1e-6)

    def test_uniform_excludes_non_predictable(self):
        """Test that excluded ids get no mass."""
        # Act
        probs = np.exp(UniformLM(VOCAB_SIZE, non_predictable=NON_PREDICTABLE).next_log_probs([1]))

        # Assert
        assert probs[list(NON_PREDICTABLE)].sum() == 0.0
        assert probs.sum() == pytest.approx(1.0)

    def test_lm_score_appends_nothing(self):
        """Test that lm_score sums exactly the given tokens."""
        # Arrange
        lm = UniformLM(4, non_predictable=())

        # Act & Assert
        assert lm_score(lm, [0, 1]) == pytest.approx(2 * math.log(0.25))
        assert lm_score(lm, []) == 0.0

    def test_empty_corpus(self):
        """Test that perplexity needs data."""
        # Act & Assert
        with pytest.raises(DataError):
            perplexity(UniformLM(4), [])


class TestNGram:
    """Test the absolute-discounting count model."""

    def test_distributions_sum_to_one(self):
        """Test that every context yields a normalized distribution with zero on excluded ids."""
        # Arrange
        lm = train_ngram(_lyric_corpus(), VOCAB_SIZE, order=4, discount=0.5)

        # Act & Assert
        for prefix in ([1], [1, A], [1, A, B, C], [1, C, C, C, C], [1, B, A, A]):
            probs = np.exp(lm.next_log_probs(prefix))
            assert probs.sum() == pytest.approx(1.0, abs=1e-12)
            assert probs[list(NON_PREDICTABLE)].sum() == 0.0
            assert np.all(probs[[2, 3, A, B, C]] > 0)

    def test_symmetric_bigram(self):
        """Test P(b|a) = P(c|a) = 0.5 with a vanishing discount."""
        # Arrange
        lm = train_ngram([[A, B], [A, C]], VOCAB_SIZE, order=2, discount=1e-6)

        # Act
        probs = np.exp(lm.next_log_probs([1, A]))

        # Assert
        assert probs[B] == pytest.approx(0.5, abs=1e-5)
        assert probs[C] == pytest.approx(0.5, abs=1e-5)

    def test_repeated_token(self):
        """Test P(a | a a a) > 0.9 on a single repeated token with d=0.1."""
        # Arrange
        lm = train_ngram([[A] * 40], VOCAB_SIZE, order=4, discount=0.1)

        # Act
        prob = lm.prob(A, [A, A, A])

        # Assert
        assert prob > 0.9

    def test_periodic_corpus_perplexity(self):
        """Test that a 2-gram on 'a b a b ...' with d=0.01 has perplexity <= 1.1."""
        # Arrange
        corpus = [[A, B] * 30 for _ in range(3)]
        lm = train_ngram(corpus, VOCAB_SIZE, order=2, discount=0.01)

        # Act
        value = perplexity(lm, corpus)

        # Assert
        assert value <= 1.1

    def test_shuffle_invariance(self):
        """Test that sequence order does not change counts or perplexity."""
        # Arrange
        corpus = _lyric_corpus()
        shuffled = list(corpus)
        random.Random(0).shuffle(shuffled)

        # Act
        first = train_ngram(corpus, VOCAB_SIZE, order=3)
        second = train_ngram(shuffled, VOCAB_SIZE, order=3)

        # Assert
        assert first.counts == second.counts
        assert perplexity(first, corpus) == pytest.approx(perplexity(second, shuffled), rel=1e-12)

    def test_unseen_context_backs_off(self):
        """Test that an unseen context reuses the shorter context's distribution."""
        # Arrange
        lm = train_ngram([[A, B], [B, C]], VOCAB_SIZE, order=3, discount=0.5)

        # Act
        probs = np.exp(lm.next_log_probs([1, C, A]))

        # Assert
        np.testing.assert_allclose(probs, lm.distribution((A,)))
        assert lm.backoff_mass((C, A)) == 1.0

    @pytest.mark.parametrize("order", [2, 4])
    def test_adding_sequence_never_lowers_its_score(self, order):
        """Test that training on one more copy of a sequence does not lower that sequence's score."""
        for seed in range(10):
            # Arrange
            rng = random.Random(seed)
            corpus = [[rng.choice([A, B, C]) for _ in range(rng.randint(1, 6))] for _ in range(rng.randint(2, 6))]
            added = [rng.choice([A, B, C]) for _ in range(rng.randint(1, 6))]

            # Act
            before = lm_score(train_ngram(corpus, VOCAB_SIZE, order=order, discount=0.5), added + [EOS])
            after = lm_score(train_ngram(corpus + [added], VOCAB_SIZE, order=order, discount=0.5), added + [EOS])

            # Assert
            assert after >= before - 1e-12, f"seed {seed}: {after} < {before}"

    @pytest.mark.parametrize("kwargs", [{"order": 0}, {"discount": 0.0}, {"discount": 1.0}])
    def test_invalid_hyperparameters(self, kwargs):
        """Test order and discount validation."""
        # Act & Assert
        with pytest.raises(ConfigError):
            train_ngram(_lyric_corpus(), VOCAB_SIZE, **kwargs)

    def test_non_predictable_token_in_corpus(self):
        """Test that training data may not contain excluded ids."""
        # Act & Assert
        with pytest.raises(DataError):
            train_ngram([[A, 0]], VOCAB_SIZE)


class TestArpa:
    """Test the ARPA text format."""

    def test_round_trip_probabilities(self, tmp_path):
        """Test that the back-off reader reproduces the interpolated model's distributions."""
        # Arrange
        lm = train_ngram(_lyric_corpus(), VOCAB_SIZE, order=3, discount=0.5)
        path = str(tmp_path / "lm.arpa")

        # Act
        write_arpa(lm, path, SYMBOLS)
        loaded = read_arpa(path, SYMBOLS)

        # Assert
        assert loaded.order == 3
        for prefix in ([1], [1, A], [1, A, B], [1, C, C, C], [1, B, B, A]):
            np.testing.assert_allclose(np.exp(loaded.next_log_probs(prefix)),
                                       np.exp(lm.next_log_probs(prefix)), rtol=1e-6, atol=1e-9)

    def test_load_language_model_dispatch(self, tmp_path):
        """Test that .arpa paths open the back-off reader."""
        # Arrange
        path = str(tmp_path / "lm.arpa")
        write_arpa(train_ngram(_lyric_corpus(), VOCAB_SIZE, order=2), path, SYMBOLS)

        # Act
        lm = load_language_model(path, SYMBOLS)

        # Assert
        assert lm.vocab_size == VOCAB_SIZE
        assert lm.next_log_probs([1]).shape == (VOCAB_SIZE,)

    def test_symbols_with_whitespace_rejected(self, tmp_path):
        """Test that symbols must be single words."""
        # Arrange
        lm = train_ngram(_lyric_corpus(), VOCAB_SIZE, order=2)
        symbols = SYMBOLS[:-1] + ["c c"]

        # Act & Assert
        with pytest.raises(LMFormatError):
            write_arpa(lm, str(tmp_path / "lm.arpa"), symbols)

    def test_count_mismatch(self, tmp_path):
        """Test that declared counts must match the sections."""
        # Arrange
        path = tmp_path / "bad.arpa"
        path.write_text("\\data\\\nngram 1=3\n\n\\1-grams:\n-0.3\ta\n-0.3\tb\n\n\\end\\\n", encoding="utf-8")

        # Act & Assert
        with pytest.raises(LMFormatError, match="declared 3"):
            read_arpa(str(path), SYMBOLS)

    def test_unknown_symbol(self, tmp_path):
        """Test that n-grams over unknown symbols are rejected."""
        # Arrange
        path = tmp_path / "bad.arpa"
        path.write_text("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.3\tzz\n\n\\end\\\n", encoding="utf-8")

        # Act & Assert
        with pytest.raises(LMFormatError, match="unknown symbols"):
            read_arpa(str(path), SYMBOLS)

    def test_missing_end_marker(self, tmp_path):
        """Test that a truncated file is rejected."""
        # Arrange
        path = tmp_path / "bad.arpa"
        path.write_text("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.3\ta\n", encoding="utf-8")

        # Act & Assert
        with pytest.raises(LMFormatError, match="end"):
            read_arpa(str(path), SYMBOLS)


class TestNeuralLM:
    """Test recurrent and transformer language models."""

    @pytest.mark.parametrize("preset", ["desk-recurrent", "desk-transformer"])
    def test_untrained_distributions_normalized(self, preset):
        """Test that scoring returns normalized distributions with excluded ids masked."""
        # Arrange
        config = NeuralLMConfig(**lm_preset(preset))
        lm = NeuralLanguageModel(build_neural_lm(config, VOCAB_SIZE), VOCAB_SIZE)

        # Act
        probs = np.exp(lm.next_log_probs([1, A, B]))

        # Assert
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert probs[list(NON_PREDICTABLE)].sum() == 0.0

    def test_recurrent_cache_matches_full_pass(self):
        """Test that incremental recurrent scoring equals scoring a fresh prefix."""
        # Arrange
        module = build_neural_lm(NeuralLMConfig(**lm_preset("desk-recurrent")), VOCAB_SIZE)
        incremental = NeuralLanguageModel(module, VOCAB_SIZE)
        fresh = NeuralLanguageModel(module, VOCAB_SIZE)
        for length in range(1, 4):
            incremental.next_log_probs([1, A, B, C][:length])

        # Act & Assert
        np.testing.assert_allclose(incremental.next_log_probs([1, A, B, C]),
                                   fresh.next_log_probs([1, A, B, C]), atol=1e-6)

    def test_prefix_needs_sos(self):
        """Test that prefixes must start with sos."""
        # Arrange
        lm = NeuralLanguageModel(build_neural_lm(NeuralLMConfig(**lm_preset("desk-recurrent")), VOCAB_SIZE),
                                 VOCAB_SIZE)

        # Act & Assert
        with pytest.raises(DecodingError):
            lm.next_log_probs([A])

    def test_same_seed_same_parameters(self):
        """Test seeded construction."""
        # Arrange
        config = NeuralLMConfig(**lm_preset("desk-transformer"), seed=4)

        # Act
        first = build_neural_lm(config, VOCAB_SIZE).state_dict()
        second = build_neural_lm(config, VOCAB_SIZE).state_dict()

        # Assert
        assert all(np.array_equal(first[name].numpy(), second[name].numpy()) for name in first)

    def test_save_load(self, tmp_path):
        """Test that a saved LM scores identically after loading through the dispatcher."""
        # Arrange
        config = NeuralLMConfig(**lm_preset("desk-recurrent"))
        module = build_neural_lm(config, VOCAB_SIZE)
        path = str(tmp_path / "lm.pt")

        # Act
        save_neural_lm(path, module, config, VOCAB_SIZE)
        loaded = load_language_model(path, SYMBOLS)

        # Assert
        np.testing.assert_allclose(loaded.next_log_probs([1, B]),
                                   NeuralLanguageModel(module, VOCAB_SIZE).next_log_probs([1, B]), atol=1e-9)

    def test_empty_corpus(self):
        """Test that training needs sequences."""
        # Arrange
        module = build_neural_lm(NeuralLMConfig(**lm_preset("desk-recurrent")), VOCAB_SIZE)

        # Act & Assert
        with pytest.raises(DataError):
            train_neural_lm(module, [], steps=1)

    @pytest.mark.slow
    @pytest.mark.parametrize("preset", ["desk-recurrent", "desk-transformer"])
    def test_overfits_small_corpus(self, preset):
        """Test that a desk-size LM reaches perplexity <= 1.5 on 20 training sentences."""
        # Arrange
        corpus = [[A + (i + j) % 3 for j in range(12)] for i in range(20)]
        config = NeuralLMConfig(**lm_preset(preset))
        module = build_neural_lm(config, VOCAB_SIZE)

        # Act
        losses = train_neural_lm(module, corpus, steps=400, lr=0.005, seed=0)
        value = perplexity(NeuralLanguageModel(module, VOCAB_SIZE), corpus)

        # Assert
        assert losses[-1] < losses[0]
        assert value <= 1.5
