"""Corpus data model: audio, manifests, transcripts, vocabulary, mixing, synthetic data."""

from lyrics_asr.corpus.audio import AudioSegment, load_audio, quantize_pcm16, save_audio
from lyrics_asr.corpus.manifest import (
    Manifest,
    ManifestEntry,
    Split,
    manifest_from_directory,
    read_manifest,
    write_manifest,
)
from lyrics_asr.corpus.mixing import MixResult, MixSpec, mix_background, mix_manifest
from lyrics_asr.corpus.synthetic import (
    AudioStore,
    CorpusStyle,
    SyntheticConfig,
    generate_synthetic_corpus,
    generate_synthetic_music,
)
from lyrics_asr.corpus.text import normalize_text
from lyrics_asr.corpus.vocabulary import (
    TokenUnit,
    Vocabulary,
    build_vocabulary,
    read_vocabulary,
    write_vocabulary,
)

__all__ = [
    "AudioSegment",
    "AudioStore",
    "CorpusStyle",
    "Manifest",
    "ManifestEntry",
    "MixResult",
    "MixSpec",
    "Split",
    "SyntheticConfig",
    "TokenUnit",
    "Vocabulary",
    "build_vocabulary",
    "generate_synthetic_corpus",
    "generate_synthetic_music",
    "load_audio",
    "manifest_from_directory",
    "mix_background",
    "mix_manifest",
    "normalize_text",
    "quantize_pcm16",
    "read_manifest",
    "read_vocabulary",
    "save_audio",
    "write_manifest",
    "write_vocabulary",
]
