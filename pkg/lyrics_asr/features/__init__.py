"""Feature extraction: mel front end, layered stacks, fusion, normalization."""

from lyrics_asr.features.extractor import FeatureConfig, FeatureExtractor, FeatureSource
from lyrics_asr.features.fusion import FusionWeights, check_convex, fuse_layers
from lyrics_asr.features.mel import MelConfig, mel_band_centers, mel_spectrogram, num_frames
from lyrics_asr.features.normalization import GlobalCMVN
from lyrics_asr.features.pseudo_ssl import pseudo_ssl_extract
from lyrics_asr.features.stack import (
    FeatureStack,
    StackArchive,
    StackArchiveWriter,
    read_stack,
    read_stack_archive,
    write_stack,
)

__all__ = [
    "FeatureConfig",
    "FeatureExtractor",
    "FeatureSource",
    "FeatureStack",
    "FusionWeights",
    "GlobalCMVN",
    "MelConfig",
    "StackArchive",
    "StackArchiveWriter",
    "check_convex",
    "fuse_layers",
    "mel_band_centers",
    "mel_spectrogram",
    "num_frames",
    "pseudo_ssl_extract",
    "read_stack",
    "read_stack_archive",
    "write_stack",
]
