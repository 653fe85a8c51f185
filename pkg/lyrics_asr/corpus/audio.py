"""Audio segments and 16-bit PCM WAV I/O."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import soundfile as sf

from lyrics_asr.exceptions import AudioError

logger = logging.getLogger(__name__)

PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioSegment:
    """Mono waveform in [-1, 1] with its sample rate."""

    samples: np.ndarray
    sample_rate: int
    id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError(f"Audio {self.id!r} must be mono, got shape {samples.shape}")
        if samples.size == 0:
            raise AudioError(f"Audio {self.id!r} is empty")
        if not np.all(np.isfinite(samples)):
            raise AudioError(f"Audio {self.id!r} contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise AudioError(f"Audio {self.id!r} has invalid sample rate {self.sample_rate}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        """Duration in seconds."""
        return len(self) / self.sample_rate

    def power(self) -> float:
        """Mean-square power."""
        return float(np.mean(self.samples ** 2))

    def with_samples(self, samples: np.ndarray, id: Optional[str] = None) -> "AudioSegment":
        """Copy with new samples (same rate)."""
        return AudioSegment(samples=samples, sample_rate=self.sample_rate, id=self.id if id is None else id)


def quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    """Snap samples onto the 16-bit PCM grid so a WAV round trip is exact."""
    ints = np.clip(np.round(np.asarray(samples, dtype=np.float64) * PCM16_SCALE), -32768, 32767)
    return ints / PCM16_SCALE


def load_audio(path: Union[str, Path], expected_rate: Optional[int] = None, id: str = "") -> AudioSegment:
    """
    Load a mono WAV file.

    Args:
        path: WAV file path
        expected_rate: Manifest sample rate to enforce
        id: Utterance id attached to the segment

    Returns:
        Audio segment with float samples in [-1, 1]
    """
    audio_path = Path(path)
    if not audio_path.exists():
        raise AudioError(f"Audio file not found: {audio_path}")
    try:
        samples, rate = sf.read(str(audio_path), dtype="float64", always_2d=True)
    except RuntimeError as e:
        logger.error(f"Failed to read audio {audio_path}: {e}")
        raise AudioError(f"Unreadable audio file {audio_path}: {e}") from e
    if samples.shape[1] != 1:
        raise AudioError(f"{audio_path} has {samples.shape[1]} channels; only mono is supported")
    if expected_rate is not None and rate != expected_rate:
        raise AudioError(f"{audio_path} sample rate {rate} != manifest rate {expected_rate}")
    return AudioSegment(samples=samples[:, 0], sample_rate=rate, id=id or audio_path.stem)


def save_audio(segment: AudioSegment, path: Union[str, Path]) -> Path:
    """Write a segment as mono 16-bit PCM WAV."""
    audio_path = Path(path)
    audio_path.parent.mkdir(parents=True, exist_ok=True)
    peak = float(np.max(np.abs(segment.samples)))
    if peak > 1.0:
        raise AudioError(f"Audio {segment.id!r} peak {peak:.3f} exceeds full scale")
    sf.write(str(audio_path), segment.samples, segment.sample_rate, subtype="PCM_16")
    return audio_path
