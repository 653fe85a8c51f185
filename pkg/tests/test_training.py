"""Tests for the learning-rate schedule, checkpoint selection, batching and the training loop."""

import json
import math
from typing import List

import numpy as np
import pytest
import torch

from evaluation.scoring import score_corpus
from lyrics_asr.corpus import build_vocabulary, generate_synthetic_corpus
from lyrics_asr.decoding import BeamConfig, decode_corpus
from lyrics_asr.exceptions import ConfigError, DataError
from lyrics_asr.features import FeatureConfig, FeatureExtractor, FeatureStack, MelConfig
from lyrics_asr.models import build_model, load_model
from lyrics_asr.presets import TRAIN_MODEL_PAIRING, TRAIN_PRESETS, loss_spec_for, model_config_for, train_preset
from lyrics_asr.training import (
    EarlyStopping,
    Example,
    TrainConfig,
    TrainingData,
    WarmupScheduler,
    average_state_dicts,
    lr_scale_for_peak,
    lr_schedule,
    make_batches,
    make_examples,
    peak_lr,
    train,
)
from lyrics_asr.utils.config_loader import validate_config
from tests.conftest import tiny_model_config


def _example(utt_id: str, frames: int) -> Example:
    return Example(utt_id, FeatureStack(np.zeros((1, frames, 4), dtype=np.float32), 100.0), [5, 6])


def _layer_task(n_utts: int, seed: int) -> List[Example]:
    """Four-layer stacks where only layer 2 identifies the tokens; layers 0, 1 and 3 are noise."""
    patterns = np.random.default_rng(99).standard_normal((8, 16))
    rng = np.random.default_rng(seed)
    examples = []
    for index in range(n_utts):
        tokens = [int(token) for token in rng.integers(5, 8, size=int(rng.integers(2, 5)))]
        frames = 8 * len(tokens)
        layers = rng.standard_normal((4, frames, 16))
        layers[2] = np.repeat(patterns[tokens], 8, axis=0) + 0.1 * rng.standard_normal((frames, 16))
        examples.append(Example(f"s{seed}u{index:02d}", FeatureStack(layers.astype(np.float32), 100.0), tokens))
    return examples


class TestSchedule:
    """Test the warmup and inverse square-root decay."""

    def test_closed_form(self):
        """Test the schedule against its formula at random steps."""
        # Arrange
        rng = np.random.default_rng(0)
        steps = rng.integers(1, 200000, size=1000)

        # Act & Assert
        for step in steps:
            step = int(step)
            expected = 2.0 * 256 ** -0.5 * min(step ** -0.5, step * 25000 ** -1.5)
            assert lr_schedule(step, 256, 2.0, 25000) == pytest.approx(expected, rel=1e-12)

    def test_half_warmup_is_half_peak(self):
        """Test the linear rise: halfway through warmup gives half the peak."""
        # Arrange
        warmup = 4000

        # Act & Assert
        assert lr_schedule(warmup // 2, 256, 1.0, warmup) == pytest.approx(0.5 * lr_schedule(warmup, 256, 1.0, warmup))

    def test_decay_after_peak(self):
        """Test that four times the warmup gives half the peak."""
        # Arrange
        warmup = 4000

        # Act & Assert
        assert lr_schedule(4 * warmup, 256, 1.0, warmup) == pytest.approx(0.5 * peak_lr(256, 1.0, warmup))

    def test_peak_at_warmup(self):
        """Test that the maximum over steps sits at the warmup step."""
        # Act
        rates = [lr_schedule(step, 144, 1.0, 50) for step in range(1, 500)]

        # Assert
        assert int(np.argmax(rates)) + 1 == 50

    def test_step_zero_rejected(self):
        """Test that steps start at one."""
        # Act & Assert
        with pytest.raises(ConfigError):
            lr_schedule(0, 256, 1.0, 100)

    def test_scale_for_target_peak(self):
        """Test that the derived scale peaks at the requested rate."""
        # Act
        scale = lr_scale_for_peak(0.0025, 256, 40000)

        # Assert
        assert peak_lr(256, scale, 40000) == pytest.approx(0.0025)
        assert TrainConfig(peak_lr=0.0025, warmup_steps=40000).resolved_lr_scale(256) == pytest.approx(scale)

    def test_scheduler_sets_group_rates(self):
        """Test that every parameter group follows the schedule times its multiplier."""
        # Arrange
        a, b = torch.nn.Parameter(torch.zeros(2)), torch.nn.Parameter(torch.zeros(2))
        optimizer = torch.optim.Adam([{"params": [a], "lr_multiplier": 1.0},
                                      {"params": [b], "lr_multiplier": 10.0}], lr=0.0)
        scheduler = WarmupScheduler(optimizer, 64, 1.0, 10)

        # Act
        for _ in range(3):
            rate = scheduler.step()

        # Assert
        assert scheduler.step_num == 3
        assert rate == pytest.approx(lr_schedule(3, 64, 1.0, 10))
        assert scheduler.group_rates() == pytest.approx([rate, 10 * rate])


class TestModelSelection:
    """Test early stopping, checkpoint averaging and training presets."""

    def test_early_stopping(self):
        """Test that patience 2 stops after two non-improving epochs."""
        # Arrange
        stopper = EarlyStopping(patience=2)

        # Act
        decisions = [stopper.update(value) for value in [3.0, 2.0, 2.5, 2.6]]

        # Assert
        assert decisions == [False, False, False, True]
        assert (stopper.best, stopper.best_epoch) == (2.0, 2)

    def test_zero_patience_never_stops(self):
        """Test that patience 0 disables early stopping."""
        # Arrange
        stopper = EarlyStopping(patience=0)

        # Act & Assert
        assert not any(stopper.update(float(epoch)) for epoch in range(20))

    def test_average_of_identical_states(self):
        """Test that averaging copies of one state returns that state."""
        # Arrange
        state = {"w": torch.randn(3, 4), "steps": torch.tensor(7)}

        # Act
        averaged = average_state_dicts([state, state, state])

        # Assert
        torch.testing.assert_close(averaged["w"], state["w"])
        assert averaged["steps"].item() == 7

    def test_average_of_different_states(self):
        """Test the parameter-wise mean and that dtypes are preserved."""
        # Arrange
        states = [{"w": torch.full((2,), value)} for value in (1.0, 2.0, 6.0)]

        # Act
        averaged = average_state_dicts(states)

        # Assert
        torch.testing.assert_close(averaged["w"], torch.full((2,), 3.0))
        assert averaged["w"].dtype == torch.float32

    def test_average_of_nothing(self):
        """Test that an empty checkpoint list is an error."""
        # Act & Assert
        with pytest.raises(ValueError):
            average_state_dicts([])

    def test_best_mode_keeps_one(self):
        """Test that selecting the best checkpoint retains a single one."""
        # Act & Assert
        assert TrainConfig(select="best", avg_top_k=10).avg_top_k == 1

    def test_default_patience(self):
        """Test that early stopping is on by default with patience 3."""
        # Act
        cfg = TrainConfig()
        stopper = EarlyStopping(cfg.patience)

        # Assert
        assert cfg.patience == 3
        assert [stopper.update(value) for value in [2.0, 2.1, 2.2, 2.3]] == [False, False, False, True]

    def test_pinned_presets(self):
        """Test the values the published recipes pin."""
        # Act
        baseline = validate_config(TrainConfig, train_preset("baseline"))
        downstream = validate_config(TrainConfig, train_preset("ssl-downstream"))

        # Assert
        assert (baseline.lr_scale, baseline.warmup_steps, baseline.max_epochs) == (1.0, 25000, 100)
        assert (downstream.peak_lr, downstream.warmup_steps, downstream.max_epochs) == (0.0025, 40000, 50)
        assert downstream.patience > 0
        assert baseline.preset == "baseline"
        assert set(TRAIN_MODEL_PAIRING) == set(TRAIN_PRESETS)

    def test_unknown_preset(self):
        """Test that an unknown preset lists the choices."""
        # Act & Assert
        with pytest.raises(ConfigError, match="baseline"):
            train_preset("nope")


class TestBatching:
    """Test frame-budget batching."""

    def test_budget_respected(self):
        """Test that batch size times the longest utterance stays within the budget."""
        # Arrange
        examples = [_example(f"u{i:02d}", frames) for i, frames in enumerate([10, 40, 25, 30, 5, 40, 12, 18])]

        # Act
        batches = make_batches(examples, batch_frames=80)

        # Assert
        assert sorted(utt for batch in batches for utt in batch.ids) == sorted(ex.utt_id for ex in examples)
        for batch in batches:
            assert len(batch) * int(batch.feature_lengths.max()) <= 80

    def test_oversized_example_alone(self):
        """Test that an utterance longer than the budget forms its own batch."""
        # Act
        batches = make_batches([_example("long", 100), _example("short", 5)], batch_frames=50)

        # Assert
        assert [batch.ids for batch in batches] == [["long"], ["short"]]

    def test_seeded_shuffle_is_deterministic(self):
        """Test that the same seed gives the same batch order."""
        # Arrange
        examples = [_example(f"u{i:02d}", 10 + i) for i in range(20)]

        # Act
        first = [batch.ids for batch in make_batches(examples, 30, seed=3)]
        second = [batch.ids for batch in make_batches(examples, 30, seed=3)]

        # Assert
        assert first == second

    def test_training_data_needs_both_splits(self):
        """Test that an empty dev split is rejected."""
        # Act & Assert
        with pytest.raises(DataError, match="nonempty"):
            TrainingData([_example("u", 10)], [])


class TestTrainLoop:
    """Test the trainer on the synthetic corpus."""

    def setup_method(self):
        self.feature_config = FeatureConfig(mel=MelConfig(n_mels=16))

    def _data(self, synthetic_corpus):
        manifest, store = synthetic_corpus
        vocab = build_vocabulary(manifest)
        extractor = FeatureExtractor(self.feature_config, store)
        extractor.fit_cmvn(manifest.ids("train"))
        data = TrainingData(make_examples(manifest, "train", vocab, extractor),
                            make_examples(manifest, "dev", vocab, extractor))
        return vocab, data

    def test_short_run_writes_outputs(self, synthetic_corpus, tmp_path):
        """Test that a short run logs every epoch and saves a loadable model."""
        # Arrange
        vocab, data = self._data(synthetic_corpus)
        config = tiny_model_config(vocab_size=len(vocab))
        model = build_model(config)
        cfg = TrainConfig(peak_lr=0.002, warmup_steps=5, max_epochs=3, avg_top_k=2, batch_frames=2000)

        # Act
        result = train(model, data, cfg, loss_spec_for(config), output_dir=str(tmp_path))

        # Assert
        assert [record.epoch for record in result.history] == [1, 2, 3]
        assert all(math.isfinite(record.dev_loss) for record in result.history)
        assert len(result.retained_epochs) == 2
        assert result.best_dev_loss == min(record.dev_loss for record in result.history)
        log = json.loads((tmp_path / "train_log.json").read_text(encoding="utf-8"))
        assert log["best_epoch"] == result.best_epoch
        loaded, metadata = load_model(str(tmp_path / "model.pt"))
        assert metadata["retained_epochs"] == result.retained_epochs
        assert not loaded.training

    def test_deterministic(self, synthetic_corpus):
        """Test that two runs with one seed give identical losses."""
        # Arrange
        vocab, data = self._data(synthetic_corpus)
        config = tiny_model_config(vocab_size=len(vocab))
        cfg = TrainConfig(peak_lr=0.002, warmup_steps=5, max_epochs=2, batch_frames=2000, seed=5)

        # Act
        first = train(build_model(config), data, cfg, loss_spec_for(config))
        second = train(build_model(config), data, cfg, loss_spec_for(config))

        # Assert
        assert [r.train_loss for r in first.history] == [r.train_loss for r in second.history]
        assert first.final_dev_loss == second.final_dev_loss

    def test_fusion_weights_recorded(self, synthetic_corpus):
        """Test that a multi-layer front end reports convex weights per epoch."""
        # Arrange
        manifest, store = synthetic_corpus
        vocab = build_vocabulary(manifest)
        extractor = FeatureExtractor(FeatureConfig(source="pseudo-ssl", n_layers=3, mel=MelConfig(n_mels=16)), store)
        data = TrainingData(make_examples(manifest, "train", vocab, extractor),
                            make_examples(manifest, "dev", vocab, extractor))
        config = tiny_model_config(input_dim=extractor.feature_dim, vocab_size=len(vocab), num_layers=3)
        cfg = TrainConfig(peak_lr=0.002, warmup_steps=5, max_epochs=2, batch_frames=2000)

        # Act
        result = train(build_model(config), data, cfg, loss_spec_for(config))

        # Assert
        for record in result.history:
            assert len(record.fusion_weights) == 3
            assert sum(record.fusion_weights) == pytest.approx(1.0, abs=1e-6)
            assert min(record.fusion_weights) > 0.0

    @pytest.mark.slow
    def test_fusion_learns_informative_layer(self):
        """Test that fusion puts most weight on the only layer carrying token identity."""
        # Arrange
        data = TrainingData(_layer_task(24, seed=1), _layer_task(6, seed=2))
        config = tiny_model_config(input_dim=16, vocab_size=8, num_layers=4)
        model = build_model(config)
        cfg = TrainConfig(peak_lr=0.003, warmup_steps=20, max_epochs=150, patience=0, select="best",
                          batch_frames=400)

        # Act
        result = train(model, data, cfg, loss_spec_for(config))

        # Assert
        weights = model.fusion.weights().detach().numpy()
        assert weights[2] > 0.5
        assert int(np.argmax(weights)) == 2
        assert result.history[0].fusion_weights[2] < weights[2]

    def test_early_stop_flag(self, synthetic_corpus, mocker):
        """Test that patience 2 ends training two epochs after the best dev loss."""
        # Arrange
        vocab, data = self._data(synthetic_corpus)
        config = tiny_model_config(vocab_size=len(vocab))
        cfg = TrainConfig(peak_lr=0.002, warmup_steps=5, max_epochs=10, patience=2, select="best",
                          batch_frames=2000)
        mocker.patch("lyrics_asr.training.trainer.evaluate_loss", side_effect=[3.0, 2.0, 2.5, 2.6, 2.0])

        # Act
        result = train(build_model(config), data, cfg, loss_spec_for(config))

        # Assert
        assert result.stopped_early
        assert [record.dev_loss for record in result.history] == [3.0, 2.0, 2.5, 2.6]
        assert (result.best_epoch, result.retained_epochs) == (2, [2])

    @pytest.mark.slow
    def test_memorizes_small_corpus(self):
        """Test that the desk transformer drives greedy WER on its own training set to at most 5%."""
        # Arrange
        manifest, store = generate_synthetic_corpus(32, 4, seed=0)
        vocab = build_vocabulary(manifest)
        extractor = FeatureExtractor(FeatureConfig(), store)
        extractor.fit_cmvn(manifest.ids("train"))
        examples = make_examples(manifest, "train", vocab, extractor)
        assert len(examples) == len(manifest) == 32
        config = model_config_for("desk-transformer", extractor.feature_dim, len(vocab), extractor.num_layers, 0)
        model = build_model(config)
        cfg = validate_config(TrainConfig, train_preset("desk-transformer"))

        # Act
        result = train(model, TrainingData(examples, examples), cfg, loss_spec_for(config))
        decoded = decode_corpus(model, vocab, extractor, manifest.ids("train"), BeamConfig(lm_weight=0.0),
                                greedy=True)
        report = score_corpus(manifest.transcripts("train"), {r.utt_id: r.text for r in decoded})

        # Assert
        assert len(result.history) <= 200
        assert report.error_rate <= 5.0
