"""Tests for alignment, corpus scoring, attention diagnostics and the metrics collector."""

import json
import math
import random

import editdistance
import numpy as np
import pytest

from evaluation.alignment import EditKind, align, apply_edit_script
from evaluation.attention import (
    ARCHIVE_NAME,
    SUMMARY_NAME,
    attention_stats,
    collapse_summary,
    export_attention,
    head_stats,
    plot_attention,
    plot_attention_archive,
)
from evaluation.metrics_collector import MetricsCollector
from evaluation.scoring import ScoreUnit, cer, score_corpus, score_units, wer, write_score_report
from lyrics_asr.exceptions import AttentionError, ScoringError
from lyrics_asr.features import StackArchive
from lyrics_asr.training.trainer import EpochRecord


def _random_pair(rng):
    alphabet = "abcd"
    ref = [rng.choice(alphabet) for _ in range(rng.randint(0, 8))]
    hyp = [rng.choice(alphabet) for _ in range(rng.randint(0, 8))]
    return ref, hyp


class TestAlignment:
    """Test Levenshtein alignment."""

    def test_matches_edit_distance_oracle(self):
        """Test error counts against an independent edit-distance implementation."""
        # Arrange
        rng = random.Random(0)

        # Act & Assert
        for _ in range(500):
            ref, hyp = _random_pair(rng)
            result = align(ref, hyp)
            assert result.errors == editdistance.eval(ref, hyp)
            assert apply_edit_script(ref, result.script) == hyp
            assert result.ref_len == len(ref)

    def test_symmetry_and_triangle_inequality(self):
        """Test metric properties of the edit distance."""
        # Arrange
        rng = random.Random(1)

        # Act & Assert
        for _ in range(200):
            a, b = _random_pair(rng)
            c, _ = _random_pair(rng)
            assert align(a, b).errors == align(b, a).errors
            assert align(a, c).errors <= align(a, b).errors + align(b, c).errors

    def test_single_substitution(self):
        """Test S=1 for one replaced word."""
        # Act
        result = align("la la la".split(), "la da la".split())

        # Assert
        assert (result.substitutions, result.deletions, result.insertions) == (1, 0, 0)
        assert result.wer == pytest.approx(1 / 3)
        assert [op.kind for op in result.script] == [EditKind.MATCH, EditKind.SUB, EditKind.MATCH]

    def test_empty_reference(self):
        """Test that an empty reference with two hypothesis words has I=2 and infinite rate."""
        # Act
        result = align([], ["a", "a"])

        # Assert
        assert result.insertions == 2
        assert math.isinf(result.wer)

    def test_both_empty(self):
        """Test that empty against empty is perfect."""
        # Act & Assert
        assert align([], []).wer == 0.0

    def test_deletions(self):
        """Test an empty hypothesis deletes every reference word."""
        # Act
        result = align(["a", "b", "c"], [])

        # Assert
        assert result.deletions == 3
        assert result.wer == 1.0

    def test_edit_script_must_fit(self):
        """Test that a script cannot be replayed on another reference."""
        # Arrange
        script = align(["a", "b"], ["a", "c"]).script

        # Act & Assert
        with pytest.raises(ValueError):
            apply_edit_script(["x", "b"], script)


class TestScoring:
    """Test pooled corpus scoring."""

    def test_pooled_not_averaged(self):
        """Test that 1 error over 4 words and 0 over 6 pools to 10%."""
        # Arrange
        refs = {"u1": "la la la la", "u2": "da da da da da da"}
        hyps = {"u1": "la la da la", "u2": "da da da da da da"}

        # Act & Assert
        assert wer(refs, hyps) == pytest.approx(10.0)

    def test_normalization_applied(self):
        """Test that punctuation and case do not count as errors."""
        # Act & Assert
        assert wer({"u": "Don’t STOP, me now!"}, {"u": "don't stop me now"}) == 0.0

    def test_character_rate_ignores_spaces(self):
        """Test that CER scores letters only."""
        # Arrange
        refs = {"u": "ab cd"}

        # Act & Assert
        assert score_units("ab cd", ScoreUnit.CHAR) == ["a", "b", "c", "d"]
        assert cer(refs, {"u": "abcd"}) == 0.0
        assert cer(refs, {"u": "ab ce"}) == pytest.approx(25.0)

    def test_id_mismatch(self):
        """Test that references and hypotheses must cover the same ids."""
        # Act & Assert
        with pytest.raises(ScoringError, match="missing hypotheses"):
            wer({"u1": "a", "u2": "b"}, {"u1": "a"})
        with pytest.raises(ScoringError, match="without reference"):
            wer({"u1": "a"}, {"u1": "a", "u9": "b"})

    def test_empty_references_excluded(self):
        """Test that empty references are listed and left out of the pool."""
        # Act
        report = score_corpus({"u1": "a b", "u2": "?!"}, {"u1": "a c", "u2": "x"})

        # Assert
        assert report.excluded == ["u2"]
        assert report.error_rate == pytest.approx(50.0)

    def test_only_empty_references(self):
        """Test that a corpus with nothing to score is an error."""
        # Act & Assert
        with pytest.raises(ScoringError):
            score_corpus({"u1": ""}, {"u1": "a"}).error_rate

    def test_write_report(self, tmp_path):
        """Test the TSV and markdown files."""
        # Arrange
        report = score_corpus({"b": "la la", "a": "da"}, {"b": "la", "a": "da"})

        # Act
        path = write_score_report(report, tmp_path / "scores" / "wer.tsv")

        # Assert
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines == ["utt_id\tN\tS\tD\tI\twer", "a\t1\t0\t0\t0\t0.00", "b\t2\t0\t1\t0\t50.00"]
        assert "**WER:** 33.33%" in path.with_suffix(".md").read_text(encoding="utf-8")
        assert report.to_dict()["D"] == 1


class TestAttentionDiagnostics:
    """Test attention statistics and collapse detection."""

    def test_diagonal_attention(self):
        """Test that a square identity has zero entropy, mass 1/H and full diagonality."""
        # Act
        stats = attention_stats(np.eye(5))

        # Assert
        np.testing.assert_allclose(stats.entropy, 0.0)
        assert stats.max_column_mass == pytest.approx(1 / 5)
        assert stats.diagonality == pytest.approx(1.0)
        assert not stats.collapsed

    def test_collapse_onto_one_frame(self):
        """Test that every step attending frame 3 is a collapse."""
        # Arrange
        attn = np.zeros((6, 8))
        attn[:, 3] = 1.0

        # Act
        stats = attention_stats(attn)

        # Assert
        assert stats.max_column_mass == pytest.approx(1.0)
        assert int(np.argmax(stats.column_mass)) == 3
        assert stats.collapsed
        assert stats.diagonality == 0.0

    def test_uniform_entropy(self):
        """Test that uniform rows have entropy ln(frames)."""
        # Act
        stats = attention_stats(np.full((4, 10), 0.1))

        # Assert
        np.testing.assert_allclose(stats.entropy, math.log(10))
        assert stats.mean_entropy == pytest.approx(math.log(10))

    def test_rows_must_be_normalized(self):
        """Test that rows off by more than 1e-5 are rejected."""
        # Arrange
        attn = np.full((2, 4), 0.25)
        attn[1, 0] += 1e-4

        # Act & Assert
        with pytest.raises(AttentionError, match="not normalized"):
            attention_stats(attn)

    def test_negative_weights(self):
        """Test that weights must be non-negative."""
        # Act & Assert
        with pytest.raises(AttentionError):
            attention_stats(np.array([[1.5, -0.5]]))

    def test_collapse_is_monotone_in_concentration(self):
        """Test that mixing towards a single frame raises the column mass and eventually collapses."""
        # Arrange
        uniform = np.full((5, 10), 0.1)
        spike = np.zeros((5, 10))
        spike[:, 7] = 1.0

        # Act
        masses = [attention_stats((1 - a) * uniform + a * spike).max_column_mass for a in np.linspace(0, 1, 11)]
        flags = [attention_stats((1 - a) * uniform + a * spike).collapsed for a in np.linspace(0, 1, 11)]

        # Assert
        assert masses == sorted(masses)
        assert flags == sorted(flags)
        assert not flags[0] and flags[-1]

    def test_head_stats_aggregate(self):
        """Test that the aggregate is the mean over layers and heads."""
        # Arrange
        weights = np.zeros((2, 2, 3, 4))
        weights[..., 0] = 1.0
        weights[1, 1] = 0.25

        # Act
        per_head, aggregate = head_stats(weights)

        # Assert
        assert sorted(per_head) == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert per_head[(0, 0)].collapsed and not per_head[(1, 1)].collapsed
        assert aggregate.max_column_mass == pytest.approx(0.8125)

    def test_export_and_plots(self, tmp_path):
        """Test the attention archive, summary lines, corpus summary and plots."""
        # Arrange
        rng = np.random.default_rng(0)
        raw = rng.random((1, 2, 3, 5))
        diffuse = raw / raw.sum(axis=-1, keepdims=True)
        collapsed = np.zeros((1, 2, 3, 5))
        collapsed[..., 2] = 1.0

        # Act
        summaries = export_attention([("u1", diffuse), ("u2", collapsed)], tmp_path / "attn")
        plots = plot_attention_archive(tmp_path / "attn", tmp_path / "plots")

        # Assert
        archive = StackArchive(tmp_path / "attn" / ARCHIVE_NAME)
        assert (archive["u1"].K, archive["u1"].T, archive["u1"].D) == (3, 3, 5)
        lines = (tmp_path / "attn" / SUMMARY_NAME).read_text(encoding="utf-8").splitlines()
        assert [json.loads(line)["utt_id"] for line in lines] == ["u1", "u2"]
        assert [s["aggregate"]["collapsed"] for s in summaries] == [False, True]
        assert collapse_summary(summaries)["collapse_rate"] == pytest.approx(0.5)
        assert [p.name for p in plots] == ["u1.png", "u2.png"]
        assert all(p.stat().st_size > 0 for p in plots)

    def test_empty_collapse_summary(self):
        """Test the summary of no utterances."""
        # Act & Assert
        assert collapse_summary([])["utterances"] == 0

    def test_single_plot(self, tmp_path):
        """Test rendering one matrix."""
        # Act
        path = plot_attention(np.eye(4), tmp_path / "eye.png", title="eye")

        # Assert
        assert path.exists()


class TestMetricsCollector:
    """Test the prometheus-backed collector."""

    def test_records_progress(self):
        """Test observer callbacks and run bookkeeping."""
        # Arrange
        collector = MetricsCollector(run="unit", command="test")
        record = EpochRecord(epoch=1, train_loss=2.0, dev_loss=1.5, seconds=0.1, steps=3, lr=1e-3,
                             fusion_weights=[0.5, 0.5])

        # Act
        collector.on_step(1, 2.0, 1e-3)
        collector.on_epoch(record)
        collector.start_decoding()
        collector.end_decoding("beam", 4)
        collector.record_wer("main", "baseline", "test", 12.5)
        collector.record_collapse("music", "0dB", 2)
        collector.record_run("main", "completed")
        collector.record_run("main", "completed")

        # Assert
        assert collector.get_summary_stats() == {"run": "unit", "rows_by_status": {"completed": 2}}
        assert collector.current_decode_start is None
