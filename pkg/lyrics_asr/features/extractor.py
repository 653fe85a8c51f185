"""Configured feature sources for manifest utterances."""

import logging
from enum import Enum
from typing import Dict, Iterable, Optional, Protocol

from pydantic import BaseModel, Field, model_validator

from lyrics_asr.corpus.audio import AudioSegment
from lyrics_asr.exceptions import ConfigError
from lyrics_asr.features.mel import MelConfig, mel_spectrogram
from lyrics_asr.features.normalization import GlobalCMVN
from lyrics_asr.features.pseudo_ssl import pseudo_ssl_extract
from lyrics_asr.features.stack import FeatureStack, StackArchive

logger = logging.getLogger(__name__)


class AudioSource(Protocol):
    """Anything that loads audio by utterance id (Manifest, AudioStore)."""

    def load(self, utt_id: str) -> AudioSegment: ...


class FeatureSource(str, Enum):
    """Where feature stacks come from."""
    MEL = "mel"
    PSEUDO_SSL = "pseudo-ssl"
    ARCHIVE = "archive"


class FeatureConfig(BaseModel):
    """Feature source selection."""

    source: FeatureSource = Field(FeatureSource.MEL, description="mel, pseudo-ssl or archive")
    n_layers: int = Field(4, ge=1, description="Layers of the pseudo-ssl upstream")
    seed: int = Field(0, description="Seed of the pseudo-ssl projections")
    archive_path: Optional[str] = Field(None, description="Stack archive for the archive source")
    upstream: Optional[str] = Field(None, description="Upstream name recorded for archive stacks")
    mel: MelConfig = Field(default_factory=MelConfig)
    cmvn: bool = Field(True, description="Apply train-split global CMVN")

    @model_validator(mode="after")
    def _check_archive(self) -> "FeatureConfig":
        if self.source == FeatureSource.ARCHIVE and not self.archive_path:
            raise ValueError("archive_path is required when source is 'archive'")
        return self

    @property
    def tag(self) -> str:
        if self.source == FeatureSource.PSEUDO_SSL:
            return f"pseudo-ssl-{self.n_layers}"
        if self.source == FeatureSource.ARCHIVE:
            return self.upstream or "archive"
        return "mel"


class FeatureExtractor:
    """Produces (optionally normalized) stacks for utterance ids, with caching."""

    def __init__(self, config: FeatureConfig, audio: Optional[AudioSource] = None):
        self.config = config
        self.audio = audio
        self.cmvn: Optional[GlobalCMVN] = None
        self._archive: Optional[StackArchive] = None
        self._cache: Dict[str, FeatureStack] = {}
        if config.source == FeatureSource.ARCHIVE:
            self._archive = StackArchive(config.archive_path)
        elif audio is None:
            raise ConfigError(f"Feature source '{config.source.value}' needs an audio source")

    @property
    def tag(self) -> str:
        return self.config.tag

    def raw(self, utt_id: str) -> FeatureStack:
        """Un-normalized stack for one utterance."""
        if utt_id in self._cache:
            return self._cache[utt_id]
        if self._archive is not None:
            stack = self._archive[utt_id]
            stack = stack.with_layers(stack.layers, source_tag=self.tag)
        elif self.config.source == FeatureSource.PSEUDO_SSL:
            stack = pseudo_ssl_extract(self.audio.load(utt_id), self.config.n_layers, self.config.seed, self.config.mel)
        else:
            stack = mel_spectrogram(self.audio.load(utt_id), self.config.mel)
        self._cache[utt_id] = stack
        return stack

    def fit_cmvn(self, train_ids: Iterable[str]) -> Optional[GlobalCMVN]:
        """Estimate normalization statistics on the train split."""
        if self.config.cmvn:
            self.cmvn = GlobalCMVN.fit(self.raw(utt_id) for utt_id in train_ids)
        return self.cmvn

    def __call__(self, utt_id: str) -> FeatureStack:
        stack = self.raw(utt_id)
        return self.cmvn.apply(stack) if self.cmvn is not None else stack

    @property
    def num_layers(self) -> int:
        if self.config.source == FeatureSource.MEL:
            return 1
        if self.config.source == FeatureSource.PSEUDO_SSL:
            return self.config.n_layers
        first = next(iter(self._archive))
        return self._archive[first].K

    @property
    def feature_dim(self) -> int:
        if self.config.source == FeatureSource.ARCHIVE:
            first = next(iter(self._archive))
            return self._archive[first].D
        return self.config.mel.n_mels
