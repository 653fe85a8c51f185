"""Deterministic synthetic "sung" corpora and background music.

Every character unit (letters and the word space) owns a fixed signature: a
pair of sinusoids on a mel-spaced frequency grid with raised-cosine edges.
An utterance is the concatenation of its units' signatures plus low-level
noise, so its transcript is recoverable from the audio.
"""

import logging
import string
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Tuple, Union

import numpy as np

from lyrics_asr.corpus.audio import AudioSegment, quantize_pcm16, save_audio
from lyrics_asr.corpus.manifest import Manifest, ManifestEntry, Split, write_manifest
from lyrics_asr.exceptions import AudioError, ConfigError

logger = logging.getLogger(__name__)

MAX_SYNTHETIC_UNITS = len(string.ascii_lowercase)


class CorpusStyle(str, Enum):
    """How transcripts are drawn."""
    RANDOM = "random"
    CHORUS = "chorus"


@dataclass(frozen=True)
class SyntheticConfig:
    """Signal parameters of the synthetic corpus."""

    sample_rate: int = 16000
    token_duration: float = 0.08
    amplitude: float = 0.3
    noise_level: float = 0.005
    fmin: float = 250.0
    fmax: float = 3800.0
    min_words: int = 1
    max_words: int = 3
    min_word_len: int = 1
    max_word_len: int = 4
    n_phrases: int = 4

    @property
    def token_samples(self) -> int:
        return int(round(self.token_duration * self.sample_rate))


class AudioStore:
    """In-memory audio keyed by utterance id."""

    def __init__(self, segments: Dict[str, AudioSegment]):
        self._segments = dict(segments)

    def __len__(self) -> int:
        return len(self._segments)

    def __iter__(self) -> Iterator[str]:
        return iter(self._segments)

    def __contains__(self, utt_id: object) -> bool:
        return utt_id in self._segments

    def load(self, utt_id: str) -> AudioSegment:
        try:
            return self._segments[utt_id]
        except KeyError:
            raise AudioError(f"No audio stored for utterance {utt_id!r}") from None

    def save(self, directory: Union[str, Path], manifest: Manifest) -> Manifest:
        """
        Write ``wav/<id>.wav`` files and ``manifest.tsv`` under ``directory``.

        Returns:
            The manifest rooted at ``directory``
        """
        out_dir = Path(directory)
        for entry in manifest:
            save_audio(self.load(entry.id), out_dir / entry.audio_path)
        rooted = Manifest(manifest.entries, manifest.sample_rate, root=out_dir)
        write_manifest(rooted, out_dir / "manifest.tsv")
        return rooted


def _mel(hz: np.ndarray) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + hz / 700.0)


def _inv_mel(mel: np.ndarray) -> np.ndarray:
    return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)


def signature_frequencies(n_units: int, cfg: SyntheticConfig) -> List[Tuple[float, float]]:
    """Tone pair per unit from a mel-spaced grid of ``2 * n_units`` frequencies."""
    grid = _inv_mel(np.linspace(_mel(np.array(cfg.fmin)), _mel(np.array(cfg.fmax)), 2 * n_units))
    # Unit k gets grid[k] and grid[2n-1-k]: every pair differs in both tones
    return [(float(grid[k]), float(grid[2 * n_units - 1 - k])) for k in range(n_units)]


def token_signatures(units: List[str], cfg: SyntheticConfig) -> Dict[str, np.ndarray]:
    """Fixed waveform per unit (no noise)."""
    length = cfg.token_samples
    t = np.arange(length) / cfg.sample_rate
    ramp = max(1, length // 8)
    envelope = np.ones(length)
    edge = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
    envelope[:ramp] = edge
    envelope[-ramp:] = edge[::-1]
    signatures = {}
    for unit, (f1, f2) in zip(units, signature_frequencies(len(units), cfg)):
        wave = np.sin(2 * np.pi * f1 * t) + np.sin(2 * np.pi * f2 * t)
        signatures[unit] = cfg.amplitude * envelope * wave
    return signatures


def synthetic_units(vocab_size: int) -> List[str]:
    """The first ``vocab_size`` letters."""
    if not 2 <= vocab_size <= MAX_SYNTHETIC_UNITS:
        raise ConfigError(f"vocab_size must be in [2, {MAX_SYNTHETIC_UNITS}], got {vocab_size}")
    return list(string.ascii_lowercase[:vocab_size])


def _random_phrase(rng: np.random.Generator, letters: List[str], cfg: SyntheticConfig) -> str:
    n_words = int(rng.integers(cfg.min_words, cfg.max_words + 1))
    words = []
    for _ in range(n_words):
        n_chars = int(rng.integers(cfg.min_word_len, cfg.max_word_len + 1))
        words.append("".join(letters[int(i)] for i in rng.integers(0, len(letters), n_chars)))
    return " ".join(words)


def _assign_splits(n_utts: int, dev_fraction: float, test_fraction: float) -> List[str]:
    n_dev = int(round(n_utts * dev_fraction))
    n_test = int(round(n_utts * test_fraction))
    n_train = n_utts - n_dev - n_test
    if n_train < 1:
        raise ConfigError(f"dev/test fractions leave no training utterances out of {n_utts}")
    return [Split.TRAIN.value] * n_train + [Split.DEV.value] * n_dev + [Split.TEST.value] * n_test


def render_transcript(text: str, signatures: Dict[str, np.ndarray], rng: np.random.Generator,
                      cfg: SyntheticConfig) -> np.ndarray:
    """Concatenate unit signatures for ``text`` and add noise."""
    clean = np.concatenate([signatures[char] for char in text])
    noisy = clean + cfg.noise_level * rng.standard_normal(clean.shape[0])
    return quantize_pcm16(noisy)


def generate_synthetic_corpus(
    n_utts: int,
    vocab_size: int,
    seed: int,
    style: Union[CorpusStyle, str] = CorpusStyle.RANDOM,
    dev_fraction: float = 0.0,
    test_fraction: float = 0.0,
    config: SyntheticConfig = SyntheticConfig(),
) -> Tuple[Manifest, AudioStore]:
    """
    Generate a seed-deterministic synthetic corpus.

    Args:
        n_utts: Number of utterances (>= 1)
        vocab_size: Number of distinct letters (2..26); the space gets its own signature
        seed: Corpus seed; same seed gives a bit-identical corpus
        style: ``random`` transcripts or ``chorus`` (a few repeated phrases)
        dev_fraction: Share of utterances tagged ``dev`` (taken after train)
        test_fraction: Share of utterances tagged ``test``
        config: Signal parameters

    Returns:
        (manifest with relative ``wav/<id>.wav`` locators, in-memory audio store)
    """
    if n_utts < 1:
        raise ConfigError(f"n_utts must be >= 1, got {n_utts}")
    style = CorpusStyle(style)
    letters = synthetic_units(vocab_size)
    signatures = token_signatures(letters + [" "], config)
    rng = np.random.default_rng(seed)

    phrases: List[str] = []
    if style == CorpusStyle.CHORUS:
        phrases = [_random_phrase(rng, letters, config) for _ in range(config.n_phrases)]

    splits = _assign_splits(n_utts, dev_fraction, test_fraction)
    entries = []
    segments = {}
    for index in range(n_utts):
        if style == CorpusStyle.CHORUS:
            text = phrases[int(rng.integers(0, len(phrases)))]
        else:
            text = _random_phrase(rng, letters, config)
        utt_id = f"synth{seed}_{index:05d}"
        samples = render_transcript(text, signatures, rng, config)
        segments[utt_id] = AudioSegment(samples=samples, sample_rate=config.sample_rate, id=utt_id)
        entries.append(ManifestEntry(utt_id, f"wav/{utt_id}.wav", text, splits[index]))

    manifest = Manifest(entries, config.sample_rate)
    logger.info(f"Generated {n_utts} synthetic utterances ({style.value}, {vocab_size} letters, seed {seed})")
    return manifest, AudioStore(segments)


def generate_synthetic_music(
    n_samples: int,
    sample_rate: int = 16000,
    seed: int = 0,
    tempo_bpm: float = 120.0,
    peak: float = 0.5,
) -> AudioSegment:
    """
    Synthesize background music: harmonic chords plus percussive noise bursts.

    Args:
        n_samples: Output length in samples
        sample_rate: Sample rate in Hz
        seed: Controls the chord progression and the drum noise
        tempo_bpm: One chord per bar of four beats, one burst per beat
        peak: Peak amplitude of the result

    Returns:
        Mono music segment quantized to the 16-bit grid
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples) / sample_rate
    beat = int(round(60.0 / tempo_bpm * sample_rate))
    bar = 4 * beat

    music = np.zeros(n_samples)
    # Triads rooted on a pentatonic set around 110-220 Hz
    roots = 110.0 * 2.0 ** (np.array([0, 2, 4, 7, 9]) / 12.0)
    for start in range(0, n_samples, bar):
        stop = min(start + bar, n_samples)
        root = roots[int(rng.integers(0, len(roots)))]
        for ratio in (1.0, 2.0 ** (4 / 12), 2.0 ** (7 / 12)):
            for harmonic in (1, 2, 3):
                frequency = root * ratio * harmonic
                music[start:stop] += np.sin(2 * np.pi * frequency * t[start:stop]) / harmonic

    decay = np.exp(-np.arange(beat) / (0.03 * sample_rate))
    for start in range(0, n_samples, beat):
        stop = min(start + beat, n_samples)
        burst = rng.standard_normal(stop - start) * decay[: stop - start]
        music[start:stop] += 2.0 * burst

    music *= peak / max(float(np.max(np.abs(music))), 1e-12)
    return AudioSegment(samples=quantize_pcm16(music), sample_rate=sample_rate, id=f"music{seed}")
