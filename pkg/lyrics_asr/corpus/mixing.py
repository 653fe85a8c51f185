"""Background-music mixing at a target signal-to-noise ratio."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from lyrics_asr.corpus.audio import AudioSegment, save_audio
from lyrics_asr.corpus.manifest import Manifest, ManifestEntry, write_manifest
from lyrics_asr.exceptions import MixingError

logger = logging.getLogger(__name__)

# Joint rescale target when the mix would clip
PEAK_LIMIT = 0.999


@dataclass(frozen=True)
class MixSpec:
    """Music segment, target SNR in dB (voice over scaled music) and seed."""

    music: AudioSegment
    target_snr_db: float
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.target_snr_db):
            raise MixingError(f"target_snr_db must be finite, got {self.target_snr_db}")


@dataclass(frozen=True)
class MixResult:
    """Mixed audio plus the gain and joint rescale that produced it."""

    audio: AudioSegment
    gain: float
    scale: float
    measured_snr_db: float


def fit_length(music: np.ndarray, length: int, offset: int = 0) -> np.ndarray:
    """Loop or truncate ``music`` to ``length`` samples starting at ``offset``."""
    if music.size == 0:
        raise MixingError("Music segment is empty")
    indices = (np.arange(length) + offset) % music.size
    return music[indices]


def snr_db(voice: np.ndarray, noise: np.ndarray) -> float:
    """10·log10 of voice power over noise power."""
    noise_power = float(np.mean(np.square(noise)))
    voice_power = float(np.mean(np.square(voice)))
    if noise_power == 0.0:
        return math.inf
    if voice_power == 0.0:
        return -math.inf
    return 10.0 * math.log10(voice_power / noise_power)


def mix_background(voice: AudioSegment, spec: MixSpec) -> MixResult:
    """
    Mix background music into a voice segment at ``spec.target_snr_db``.

    The music is looped or truncated to the voice length from a seed-derived
    start offset. Output is ``scale * (voice + gain * music)``, where ``scale``
    is 1 unless the sum would exceed full scale.

    Args:
        voice: Clean vocal segment
        spec: Music, target SNR and seed

    Returns:
        MixResult with the mixed audio, gain, joint scale and measured SNR
    """
    music = spec.music
    if music.sample_rate != voice.sample_rate:
        raise MixingError(
            f"Sample rate mismatch: voice {voice.sample_rate} Hz, music {music.sample_rate} Hz"
        )
    voice_power = voice.power()
    if voice_power == 0.0:
        raise MixingError(f"Voice segment {voice.id!r} is silent; SNR is undefined")

    rng = np.random.default_rng(spec.seed)
    offset = int(rng.integers(0, len(music)))
    noise = fit_length(music.samples, len(voice), offset)
    noise_power = float(np.mean(np.square(noise)))
    if noise_power == 0.0:
        raise MixingError(f"Music segment {music.id!r} is silent over the mixed span")

    gain = math.sqrt(voice_power / (noise_power * 10.0 ** (spec.target_snr_db / 10.0)))
    scaled_noise = gain * noise
    mixed = voice.samples + scaled_noise

    scale = 1.0
    peak = float(np.max(np.abs(mixed)))
    if peak > 1.0:
        scale = PEAK_LIMIT / peak
        mixed = mixed * scale
        logger.debug(f"Rescaled mix of {voice.id} by {scale:.4f} to avoid clipping")

    # The joint scale leaves the ratio unchanged
    measured = snr_db(scale * voice.samples, scale * scaled_noise)
    return MixResult(
        audio=voice.with_samples(mixed),
        gain=gain,
        scale=scale,
        measured_snr_db=measured,
    )


def mix_manifest(
    manifest: Manifest,
    music: AudioSegment,
    target_snr_db: float,
    output_dir: Union[str, Path],
    seed: int = 0,
) -> Manifest:
    """
    Mix one music segment into every utterance of a manifest.

    Args:
        manifest: Clean manifest
        music: Background music at the manifest sample rate
        target_snr_db: Target SNR for every utterance
        output_dir: Directory receiving the mixed WAVs and ``manifest.tsv``
        seed: Base seed; each utterance uses its position as an offset

    Returns:
        Manifest of the mixed copies (same ids, transcripts and splits)
    """
    out_dir = Path(output_dir)
    entries = []
    measured = []
    for index, entry in enumerate(manifest):
        voice = manifest.load(entry.id)
        result = mix_background(voice, MixSpec(music=music, target_snr_db=target_snr_db, seed=seed + index))
        relative = Path("wav") / f"{entry.id}.wav"
        save_audio(result.audio, out_dir / relative)
        entries.append(ManifestEntry(entry.id, str(relative), entry.transcript, entry.split))
        measured.append(result.measured_snr_db)
    mixed = Manifest(entries, manifest.sample_rate, root=out_dir)
    write_manifest(mixed, out_dir / "manifest.tsv")
    logger.info(
        f"Mixed {len(entries)} utterances at {target_snr_db:+.1f} dB "
        f"(mean measured {np.mean(measured):+.2f} dB) into {out_dir}"
    )
    return mixed
