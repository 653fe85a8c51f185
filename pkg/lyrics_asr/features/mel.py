"""Log mel-spectrogram front end."""

import logging
import warnings
from functools import lru_cache
from typing import Optional

import numpy as np
import torch
import torchaudio
from pydantic import BaseModel, Field, model_validator

from lyrics_asr.corpus.audio import AudioSegment
from lyrics_asr.exceptions import AudioError, ConfigError
from lyrics_asr.features.stack import FeatureStack

logger = logging.getLogger(__name__)


class MelConfig(BaseModel):
    """Mel filterbank settings (defaults: 80 bands, 25 ms / 10 ms at 16 kHz)."""

    n_mels: int = Field(80, ge=1, description="Number of mel bands")
    window_length: int = Field(400, ge=1, description="Analysis window in samples")
    n_fft: Optional[int] = Field(None, ge=1,
                                 description="FFT size the window is zero-padded to (next power of two when unset)")
    hop_length: int = Field(160, ge=1, description="Frame shift in samples")
    fmin: float = Field(0.0, ge=0.0, description="Lowest filter edge in Hz")
    fmax: Optional[float] = Field(None, description="Highest filter edge in Hz (Nyquist when unset)")
    log_floor: float = Field(1e-10, gt=0.0, description="Added to mel power before the log")

    @model_validator(mode="after")
    def _check_ranges(self) -> "MelConfig":
        if self.hop_length > self.window_length:
            raise ValueError(f"hop_length {self.hop_length} exceeds window_length {self.window_length}")
        if self.fmax is not None and self.fmin >= self.fmax:
            raise ValueError(f"fmin {self.fmin} must be below fmax {self.fmax}")
        if self.n_fft is not None and self.n_fft < self.window_length:
            raise ValueError(f"n_fft {self.n_fft} is shorter than window_length {self.window_length}")
        return self

    @property
    def fft_size(self) -> int:
        """FFT length actually used: ``n_fft`` or the next power of two of the window."""
        if self.n_fft is not None:
            return self.n_fft
        return 1 << (self.window_length - 1).bit_length()

    def resolved_fmax(self, sample_rate: int) -> float:
        """Upper edge for ``sample_rate``; must not exceed Nyquist."""
        fmax = sample_rate / 2 if self.fmax is None else self.fmax
        if fmax > sample_rate / 2:
            raise ConfigError(f"fmax {fmax} Hz exceeds Nyquist for {sample_rate} Hz audio")
        if self.fmin >= fmax:
            raise ConfigError(f"fmin {self.fmin} Hz must be below fmax {fmax} Hz")
        return fmax


def num_frames(n_samples: int, cfg: MelConfig) -> int:
    """Frames produced for ``n_samples`` samples (0 when shorter than a window)."""
    if n_samples < cfg.window_length:
        return 0
    return 1 + (n_samples - cfg.window_length) // cfg.hop_length


def _hz_to_mel(hz: np.ndarray) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def _mel_to_hz(mel: np.ndarray) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_band_centers(cfg: MelConfig, sample_rate: int) -> np.ndarray:
    """Centre frequency (Hz) of every mel band, on the HTK mel scale."""
    fmax = cfg.resolved_fmax(sample_rate)
    points = np.linspace(_hz_to_mel(cfg.fmin), _hz_to_mel(fmax), cfg.n_mels + 2)
    return _mel_to_hz(points[1:-1])


@lru_cache(maxsize=32)
def _filterbank(n_freqs: int, fmin: float, fmax: float, n_mels: int, sample_rate: int) -> torch.Tensor:
    with warnings.catch_warnings():
        # empty bands are reported below, once per configuration
        warnings.simplefilter("ignore", UserWarning)
        fbanks = torchaudio.functional.melscale_fbanks(
            n_freqs=n_freqs,
            f_min=fmin,
            f_max=fmax,
            n_mels=n_mels,
            sample_rate=sample_rate,
            norm=None,
            mel_scale="htk",
        ).to(torch.float64)
    empty = (fbanks.sum(dim=0) == 0).nonzero().flatten().tolist()
    if empty:
        logger.warning(
            f"{len(empty)} of {n_mels} mel bands cover no FFT bin ({n_freqs} bins at {sample_rate} Hz); "
            f"they stay at the log floor. Raise n_fft or lower n_mels (first empty band: {empty[0]})"
        )
    return fbanks


def mel_filterbank(cfg: MelConfig, sample_rate: int) -> torch.Tensor:
    """(fft_size // 2 + 1, n_mels) triangular filterbank."""
    return _filterbank(cfg.fft_size // 2 + 1, cfg.fmin, cfg.resolved_fmax(sample_rate), cfg.n_mels, sample_rate)


def mel_spectrogram(audio: AudioSegment, cfg: MelConfig) -> FeatureStack:
    """
    Compute a log mel-spectrogram as a single-layer feature stack.

    Frames are taken without padding: ``T = 1 + (len - window) // hop``.
    Each Hann-windowed frame is zero-padded to ``cfg.fft_size`` before the FFT.

    Args:
        audio: Mono audio segment
        cfg: Mel settings

    Returns:
        FeatureStack with K=1, D=n_mels and values ``log(mel_power + log_floor)``
    """
    frames = num_frames(len(audio), cfg)
    if frames == 0:
        raise AudioError(
            f"Audio {audio.id!r} has {len(audio)} samples, shorter than one "
            f"{cfg.window_length}-sample window"
        )
    waveform = torch.from_numpy(np.array(audio.samples, dtype=np.float64))
    window = torch.hann_window(cfg.window_length, periodic=True, dtype=torch.float64)
    framed = waveform.unfold(0, cfg.window_length, cfg.hop_length)[:frames] * window
    power = torch.fft.rfft(framed, n=cfg.fft_size, dim=-1).abs().pow(2)
    mel_power = power @ mel_filterbank(cfg, audio.sample_rate)
    log_mel = torch.log(mel_power + cfg.log_floor)
    return FeatureStack(
        layers=log_mel.numpy()[None, :, :],
        frame_rate=audio.sample_rate / cfg.hop_length,
        source_tag="mel",
    )
