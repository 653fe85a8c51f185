"""Tests for manifests, transcripts, vocabularies, mixing and synthetic corpora."""

import math
import random
import string

import numpy as np
import pytest

from lyrics_asr.corpus import (
    AudioSegment,
    Manifest,
    ManifestEntry,
    MixSpec,
    TokenUnit,
    Vocabulary,
    build_vocabulary,
    generate_synthetic_corpus,
    generate_synthetic_music,
    load_audio,
    manifest_from_directory,
    mix_background,
    mix_manifest,
    normalize_text,
    read_manifest,
    read_vocabulary,
    save_audio,
    write_manifest,
    write_vocabulary,
)
from lyrics_asr.corpus.mixing import fit_length, snr_db
from lyrics_asr.corpus.vocabulary import BLANK_ID, EOS_ID, PAD_ID, SOS_ID, UNK_ID
from lyrics_asr.exceptions import (
    AudioError,
    ConfigError,
    ManifestError,
    MixingError,
    VocabularyError,
)

from tests.conftest import FAST_SYNTH


def _manifest(*rows, sample_rate=16000):
    return Manifest([ManifestEntry(*row) for row in rows], sample_rate)


class TestNormalizeText:
    """Test transcript normalization."""

    def test_punctuation_and_case(self):
        """Test that punctuation is dropped and case folded."""
        # Act & Assert
        assert normalize_text("Hello,  WORLD!") == "hello world"

    def test_apostrophe_preserved_inside_word(self):
        """Test that intra-word apostrophes survive."""
        # Act & Assert
        assert normalize_text("don't  stop") == "don't stop"
        assert normalize_text("Don’t") == "don't"

    def test_stray_apostrophes_removed(self):
        """Test that quotes around words become spaces."""
        # Act & Assert
        assert normalize_text("'sing' it''") == "sing it"

    def test_idempotent_on_random_strings(self):
        """Test that normalizing twice equals normalizing once."""
        # Arrange
        rng = random.Random(0)
        alphabet = string.ascii_letters + string.digits + " '’,.!?-_\t\n"

        for _ in range(1000):
            raw = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 20)))

            # Act
            once = normalize_text(raw)

            # Assert
            assert normalize_text(once) == once


class TestManifest:
    """Test manifest construction and TSV round trips."""

    def test_duplicate_ids_rejected(self):
        """Test that utterance ids must be unique."""
        # Act & Assert
        with pytest.raises(ManifestError, match="Duplicate"):
            _manifest(("u1", "a.wav", "la", "train"), ("u1", "b.wav", "da", "dev"))

    def test_unknown_split_rejected(self):
        """Test that split tags are validated."""
        # Act & Assert
        with pytest.raises(ManifestError, match="split"):
            ManifestEntry("u1", "a.wav", "la", "eval")

    def test_tab_in_transcript_rejected(self):
        """Test that fields may not contain tabs."""
        # Act & Assert
        with pytest.raises(ManifestError):
            ManifestEntry("u1", "a.wav", "la\tla", "train")

    def test_round_trip(self, tmp_path):
        """Test that write then read gives an equal manifest."""
        # Arrange
        manifest = _manifest(("u1", "wav/u1.wav", "Hello, World", "train"),
                             ("u2", "wav/u2.wav", "don't stop", "dev"), sample_rate=22050)

        # Act
        path = write_manifest(manifest, tmp_path / "manifest.tsv")
        loaded = read_manifest(path)

        # Assert
        assert loaded == manifest
        assert loaded.root == tmp_path

    def test_missing_sample_rate_line(self, tmp_path):
        """Test that a manifest without its sample-rate line is rejected."""
        # Arrange
        path = tmp_path / "manifest.tsv"
        path.write_text("u1\ta.wav\tla\ttrain\n", encoding="utf-8")

        # Act & Assert
        with pytest.raises(ManifestError, match="sample_rate"):
            read_manifest(path)

    def test_split_views(self):
        """Test split filtering and required splits."""
        # Arrange
        manifest = _manifest(("u1", "a.wav", "la", "train"), ("u2", "b.wav", "da", "dev"))

        # Act & Assert
        assert manifest.ids("train") == ["u1"]
        assert manifest.transcripts("dev") == {"u2": "da"}
        with pytest.raises(ManifestError, match="test"):
            manifest.require_splits("train", "test")

    def test_from_directory(self, tmp_path):
        """Test building a manifest from split directories with sibling transcripts."""
        # Arrange
        segment = AudioSegment(np.full(800, 0.25), 16000)
        for split, utt_id, text in (("train", "s1", "la  la"), ("dev", "s2", "da")):
            save_audio(segment, tmp_path / split / f"{utt_id}.wav")
            (tmp_path / split / f"{utt_id}.txt").write_text(text, encoding="utf-8")

        # Act
        manifest = manifest_from_directory(tmp_path)

        # Assert
        assert manifest.sample_rate == 16000
        assert manifest["s1"].transcript == "la la"
        assert manifest["s2"].split == "dev"
        assert len(manifest.load("s1")) == 800


class TestAudio:
    """Test audio segments and WAV I/O."""

    def test_pcm16_round_trip_exact(self, tmp_path):
        """Test that samples on the 16-bit grid survive a WAV round trip."""
        # Arrange
        samples = np.arange(-100, 100) / 32768.0
        segment = AudioSegment(samples, 8000, id="grid")

        # Act
        loaded = load_audio(save_audio(segment, tmp_path / "grid.wav"))

        # Assert
        assert loaded.sample_rate == 8000
        np.testing.assert_array_equal(loaded.samples, samples)

    def test_rate_mismatch(self, tmp_path):
        """Test that a file at the wrong rate is rejected."""
        # Arrange
        path = save_audio(AudioSegment(np.zeros(100), 8000), tmp_path / "a.wav")

        # Act & Assert
        with pytest.raises(AudioError, match="sample rate"):
            load_audio(path, expected_rate=16000)

    def test_empty_segment_rejected(self):
        """Test that empty audio is invalid."""
        # Act & Assert
        with pytest.raises(AudioError):
            AudioSegment(np.zeros(0), 16000)


class TestVocabulary:
    """Test vocabulary construction and tokenization."""

    def test_reserved_ids(self, char_vocab):
        """Test that reserved tokens occupy ids 0..4."""
        # Act & Assert
        assert (char_vocab.blank_id, char_vocab.sos_id, char_vocab.eos_id, char_vocab.unk_id,
                char_vocab.pad_id) == (BLANK_ID, SOS_ID, EOS_ID, UNK_ID, PAD_ID) == (0, 1, 2, 3, 4)

    def test_char_vocabulary_size(self):
        """Test that {"ab", "ba"} gives two units plus five reserved tokens."""
        # Arrange
        manifest = _manifest(("u1", "a.wav", "ab", "train"), ("u2", "b.wav", "ba", "train"))

        # Act
        vocab = build_vocabulary(manifest)

        # Assert
        assert len(vocab) == 7
        assert vocab.units == ("a", "b")

    def test_word_vocabulary(self):
        """Test word units over {"la la", "da"}."""
        # Arrange
        manifest = _manifest(("u1", "a.wav", "la la", "train"), ("u2", "b.wav", "da", "train"))

        # Act
        vocab = build_vocabulary(manifest, TokenUnit.WORD)

        # Assert
        assert set(vocab.units) == {"la", "da"}
        assert len(vocab) == 7

    def test_build_is_deterministic(self):
        """Test that the same corpus yields an identical vocabulary."""
        # Arrange
        manifest = _manifest(("u1", "a.wav", "sing la", "train"), ("u2", "b.wav", "da", "dev"))

        # Act & Assert
        assert build_vocabulary(manifest) == build_vocabulary(manifest)

    def test_only_train_split_counts(self):
        """Test that dev transcripts do not add units."""
        # Arrange
        manifest = _manifest(("u1", "a.wav", "ab", "train"), ("u2", "b.wav", "xyz", "dev"))

        # Act
        vocab = build_vocabulary(manifest)

        # Assert
        assert "x" not in vocab.units

    def test_tokenize_detokenize(self, char_vocab):
        """Test that tokenization normalizes and maps unknown characters to unk."""
        # Act
        ids = char_vocab.tokenize("A b, d")

        # Assert
        assert ids[-1] == char_vocab.unk_id
        assert char_vocab.detokenize(ids[:-2]) == "a b"

    def test_detokenize_drops_reserved(self, char_vocab):
        """Test that sos, eos and blank are not rendered."""
        # Arrange
        a = char_vocab.id_of("a")

        # Act & Assert
        assert char_vocab.detokenize([char_vocab.sos_id, a, char_vocab.blank_id, a, char_vocab.eos_id]) == "aa"

    def test_file_round_trip(self, tmp_path, char_vocab):
        """Test that a written vocabulary reads back equal."""
        # Act
        loaded = read_vocabulary(write_vocabulary(char_vocab, tmp_path / "vocab.txt"))

        # Assert
        assert loaded == char_vocab

    def test_file_without_reserved_header(self, tmp_path):
        """Test that a vocabulary file must start with the reserved tokens."""
        # Arrange
        path = tmp_path / "vocab.txt"
        path.write_text("a\nb\n", encoding="utf-8")

        # Act & Assert
        with pytest.raises(VocabularyError):
            read_vocabulary(path)

    def test_empty_train_split(self):
        """Test that a vocabulary needs training transcripts."""
        # Arrange
        manifest = _manifest(("u1", "a.wav", "la", "dev"))

        # Act & Assert
        with pytest.raises(VocabularyError):
            build_vocabulary(manifest)

    def test_duplicate_units_rejected(self):
        """Test that units must be unique."""
        # Act & Assert
        with pytest.raises(VocabularyError):
            Vocabulary(["a", "a"])


class TestMixing:
    """Test background-music mixing."""

    def test_equal_power_at_zero_db_gives_unit_gain(self):
        """Test that equal-power voice and music mixed at 0 dB need gain 1."""
        # Arrange
        t = np.arange(1600) / 16000
        voice = AudioSegment(0.2 * np.sin(2 * np.pi * 440 * t), 16000)
        music = AudioSegment(0.2 * np.sin(2 * np.pi * 300 * t), 16000)

        # Act
        result = mix_background(voice, MixSpec(music, 0.0, seed=0))

        # Assert
        assert result.gain == pytest.approx(1.0, rel=1e-2)

    def test_measured_snr_tracks_target(self):
        """Test that the measured SNR is within 0.5 dB of the target."""
        # Arrange
        rng = np.random.default_rng(3)

        for trial in range(100):
            voice = AudioSegment(0.1 * rng.standard_normal(int(rng.integers(400, 2000))), 16000)
            music = AudioSegment(0.1 * rng.standard_normal(int(rng.integers(300, 3000))), 16000)
            target = float(rng.uniform(-10.0, 30.0))

            # Act
            result = mix_background(voice, MixSpec(music, target, seed=trial))
            noise = result.audio.samples / result.scale - voice.samples

            # Assert
            assert abs(result.measured_snr_db - target) <= 0.5
            assert abs(snr_db(voice.samples, noise) - target) <= 0.5

    def test_linearity_without_rescale(self):
        """Test that subtracting the scaled music recovers the voice."""
        # Arrange
        rng = np.random.default_rng(5)
        voice = AudioSegment(0.05 * rng.standard_normal(1000), 16000)
        music = AudioSegment(0.05 * rng.standard_normal(700), 16000)
        spec = MixSpec(music, 10.0, seed=9)

        # Act
        result = mix_background(voice, spec)
        offset = int(np.random.default_rng(spec.seed).integers(0, len(music)))
        recovered = result.audio.samples - result.gain * fit_length(music.samples, len(voice), offset)

        # Assert
        assert result.scale == 1.0
        np.testing.assert_allclose(recovered, voice.samples, atol=1e-12)

    def test_clipping_triggers_joint_rescale(self):
        """Test that loud mixes are scaled below full scale without changing the SNR."""
        # Arrange
        voice = AudioSegment(np.full(500, 0.9), 16000)
        music = AudioSegment(np.full(500, 0.5), 16000)

        # Act
        result = mix_background(voice, MixSpec(music, 0.0))

        # Assert
        assert result.scale < 1.0
        assert np.max(np.abs(result.audio.samples)) <= 1.0
        assert result.measured_snr_db == pytest.approx(0.0, abs=1e-9)

    def test_sixty_db_mix_is_near_clean(self):
        """Test that music mixed at +60 dB leaves the synthetic voice almost untouched."""
        # Arrange
        manifest, store = generate_synthetic_corpus(4, 3, seed=2)
        music = generate_synthetic_music(16000, 16000, seed=4)

        for index, utt_id in enumerate(manifest.ids()):
            voice = store.load(utt_id)

            # Act
            result = mix_background(voice, MixSpec(music, 60.0, seed=index))
            residual = result.audio.samples - voice.samples

            # Assert
            assert result.scale == 1.0
            assert result.measured_snr_db == pytest.approx(60.0, abs=0.5)
            assert math.sqrt(float(np.mean(np.square(residual)))) <= 1.1e-3 * math.sqrt(voice.power())

    def test_silent_music_rejected(self):
        """Test that silent music has no defined gain."""
        # Arrange
        voice = AudioSegment(np.full(500, 0.1), 16000)
        music = AudioSegment(np.zeros(500), 16000)

        # Act & Assert
        with pytest.raises(MixingError, match="silent"):
            mix_background(voice, MixSpec(music, 0.0))

    def test_rate_mismatch_rejected(self):
        """Test that voice and music must share a sample rate."""
        # Arrange
        voice = AudioSegment(np.full(500, 0.1), 16000)
        music = AudioSegment(np.full(500, 0.1), 8000)

        # Act & Assert
        with pytest.raises(MixingError, match="Sample rate"):
            mix_background(voice, MixSpec(music, 0.0))

    def test_non_finite_target_rejected(self):
        """Test that an infinite target SNR is not a supported convention."""
        # Arrange
        music = AudioSegment(np.full(10, 0.1), 16000)

        # Act & Assert
        with pytest.raises(MixingError):
            MixSpec(music, math.inf)

    def test_music_loops_to_voice_length(self):
        """Test that short music is looped, never the voice truncated."""
        # Act
        looped = fit_length(np.array([1.0, 2.0, 3.0]), 7, offset=2)

        # Assert
        np.testing.assert_array_equal(looped, [3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0])

    def test_mix_manifest(self, tmp_path, saved_corpus):
        """Test that a mixed manifest keeps ids, transcripts and splits."""
        # Arrange
        music = generate_synthetic_music(4000, saved_corpus.sample_rate, seed=1)

        # Act
        mixed = mix_manifest(saved_corpus, music, 0.0, tmp_path / "mixed", seed=2)

        # Assert
        assert mixed.ids() == saved_corpus.ids()
        assert [e.transcript for e in mixed] == [e.transcript for e in saved_corpus]
        assert read_manifest(tmp_path / "mixed" / "manifest.tsv") == mixed
        first = mixed.ids()[0]
        assert len(mixed.load(first)) == len(saved_corpus.load(first))


class TestSyntheticCorpus:
    """Test the synthetic corpus generator."""

    def test_same_seed_identical(self):
        """Test that (n=4, V=3, seed=7) twice gives identical corpora."""
        # Act
        first_manifest, first_store = generate_synthetic_corpus(4, 3, seed=7, config=FAST_SYNTH)
        second_manifest, second_store = generate_synthetic_corpus(4, 3, seed=7, config=FAST_SYNTH)

        # Assert
        assert first_manifest == second_manifest
        for utt_id in first_manifest.ids():
            np.testing.assert_array_equal(first_store.load(utt_id).samples, second_store.load(utt_id).samples)

    def test_transcripts_use_requested_letters(self, synthetic_corpus):
        """Test that transcripts only contain the first V letters."""
        # Arrange
        manifest, _ = synthetic_corpus

        # Act
        letters = {char for entry in manifest for char in entry.transcript if char != " "}

        # Assert
        assert letters <= {"a", "b", "c"}

    def test_split_fractions(self, synthetic_corpus):
        """Test that dev and test take their rounded shares after train."""
        # Arrange
        manifest, _ = synthetic_corpus

        # Act & Assert
        assert [len(manifest.split(s)) for s in ("train", "dev", "test")] == [6, 3, 3]

    def test_audio_length_matches_transcript(self, synthetic_corpus):
        """Test that every character contributes one signature."""
        # Arrange
        manifest, store = synthetic_corpus

        for entry in manifest:
            # Act & Assert
            assert len(store.load(entry.id)) == len(entry.transcript) * FAST_SYNTH.token_samples

    def test_chorus_style_repeats_phrases(self):
        """Test that chorus transcripts come from a small phrase set."""
        # Act
        manifest, _ = generate_synthetic_corpus(30, 4, seed=3, style="chorus", config=FAST_SYNTH)

        # Assert
        assert len({entry.transcript for entry in manifest}) <= FAST_SYNTH.n_phrases

    def test_invalid_vocab_size(self):
        """Test that the letter count is bounded."""
        # Act & Assert
        with pytest.raises(ConfigError):
            generate_synthetic_corpus(4, 1, seed=0)

    def test_no_training_utterances_left(self):
        """Test that dev/test fractions must leave a train split."""
        # Act & Assert
        with pytest.raises(ConfigError):
            generate_synthetic_corpus(2, 3, seed=0, dev_fraction=0.5, test_fraction=0.5)

    def test_saved_corpus_round_trips(self, saved_corpus, synthetic_corpus):
        """Test that saved audio loads back bit-identical."""
        # Arrange
        _, store = synthetic_corpus

        for utt_id in saved_corpus.ids():
            # Act & Assert
            np.testing.assert_array_equal(saved_corpus.load(utt_id).samples, store.load(utt_id).samples)

    def test_music_is_deterministic(self):
        """Test that synthetic music depends only on its seed."""
        # Act
        first = generate_synthetic_music(3000, seed=4)
        second = generate_synthetic_music(3000, seed=4)

        # Assert
        np.testing.assert_array_equal(first.samples, second.samples)
        assert np.max(np.abs(first.samples)) <= 0.5 + 1e-4
