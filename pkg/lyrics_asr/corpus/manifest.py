"""Utterance manifests (TSV: id, audio path, raw transcript, split)."""

import codecs
import logging
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from lyrics_asr.corpus.audio import AudioSegment, load_audio
from lyrics_asr.exceptions import ManifestError

logger = logging.getLogger(__name__)

SAMPLE_RATE_HEADER = "# sample_rate="


class Split(str, Enum):
    """Dataset splits."""
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


@dataclass(frozen=True)
class ManifestEntry:
    """One utterance: id, audio locator, raw transcript, split tag."""

    id: str
    audio_path: str
    transcript: str
    split: str

    def __post_init__(self):
        for name in ("id", "audio_path", "transcript"):
            value = getattr(self, name)
            if "\t" in value or "\n" in value or "\r" in value:
                raise ManifestError(f"Field {name} of utterance {self.id!r} contains a tab or newline")
        if not self.id:
            raise ManifestError("Utterance id must be nonempty")
        try:
            Split(self.split)
        except ValueError:
            raise ManifestError(f"Unknown split {self.split!r} for utterance {self.id!r}") from None


class Manifest:
    """Immutable list of utterances sharing one sample rate."""

    def __init__(self, entries: Sequence[ManifestEntry], sample_rate: int, root: Optional[Union[str, Path]] = None):
        if int(sample_rate) <= 0:
            raise ManifestError(f"Invalid manifest sample rate {sample_rate}")
        self.entries: Tuple[ManifestEntry, ...] = tuple(entries)
        self.sample_rate = int(sample_rate)
        # Relative audio paths are resolved against the manifest directory
        self.root = Path(root) if root is not None else None
        ids = [entry.id for entry in self.entries]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ManifestError(f"Duplicate utterance ids: {', '.join(duplicates)}")
        self._by_id: Dict[str, ManifestEntry] = {entry.id: entry for entry in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Manifest)
            and self.sample_rate == other.sample_rate
            and self.entries == other.entries
        )

    def __repr__(self) -> str:
        counts = {split.value: len(self.split(split.value)) for split in Split}
        return f"Manifest(sample_rate={self.sample_rate}, {counts})"

    def __getitem__(self, utt_id: str) -> ManifestEntry:
        try:
            return self._by_id[utt_id]
        except KeyError:
            raise ManifestError(f"Unknown utterance id {utt_id!r}") from None

    def ids(self, split: Optional[str] = None) -> List[str]:
        return [entry.id for entry in self.entries if split is None or entry.split == split]

    def split(self, name: str) -> List[ManifestEntry]:
        """Entries of one split, in manifest order."""
        return [entry for entry in self.entries if entry.split == Split(name).value]

    def transcripts(self, split: Optional[str] = None) -> Dict[str, str]:
        return {entry.id: entry.transcript for entry in self.entries if split is None or entry.split == split}

    def require_splits(self, *names: str) -> None:
        """Raise if any of the named splits is empty."""
        empty = [name for name in names if not self.split(name)]
        if empty:
            raise ManifestError(f"Manifest splits are empty: {', '.join(empty)}")

    def resolve(self, entry: ManifestEntry) -> Path:
        path = Path(entry.audio_path)
        if not path.is_absolute() and self.root is not None:
            path = self.root / path
        return path

    def load(self, utt_id: str) -> AudioSegment:
        """Load the audio of one utterance at the manifest sample rate."""
        entry = self[utt_id]
        return load_audio(self.resolve(entry), expected_rate=self.sample_rate, id=entry.id)

    def subset(self, split: str) -> "Manifest":
        return Manifest(self.split(split), self.sample_rate, root=self.root)

    def with_entries(self, entries: Sequence[ManifestEntry]) -> "Manifest":
        return Manifest(entries, self.sample_rate, root=self.root)


def write_manifest(manifest: Manifest, path: Union[str, Path]) -> Path:
    """Write a manifest as UTF-8 TSV with a sample-rate comment line."""
    manifest_path = Path(path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    with codecs.open(str(manifest_path), "w", "utf-8") as out_file:
        out_file.write(f"{SAMPLE_RATE_HEADER}{manifest.sample_rate}\n")
        for entry in manifest:
            out_file.write(f"{entry.id}\t{entry.audio_path}\t{entry.transcript}\t{entry.split}\n")
    logger.info(f"Wrote manifest with {len(manifest)} entries to {manifest_path}")
    return manifest_path


def read_manifest(path: Union[str, Path]) -> Manifest:
    """Read a manifest written by :func:`write_manifest`."""
    manifest_path = Path(path)
    if not manifest_path.exists():
        raise ManifestError(f"Manifest not found: {manifest_path}")
    sample_rate = None
    entries = []
    with codecs.open(str(manifest_path), "r", "utf-8") as in_file:
        for line_number, line in enumerate(in_file, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if line.startswith(SAMPLE_RATE_HEADER):
                try:
                    sample_rate = int(line[len(SAMPLE_RATE_HEADER):])
                except ValueError:
                    raise ManifestError(f"{manifest_path}:{line_number}: bad sample rate line") from None
                continue
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ManifestError(f"{manifest_path}:{line_number}: expected 4 tab-separated fields, got {len(fields)}")
            entries.append(ManifestEntry(*fields))
    if sample_rate is None:
        raise ManifestError(f"{manifest_path} has no '{SAMPLE_RATE_HEADER}<Hz>' line")
    return Manifest(entries, sample_rate, root=manifest_path.parent)


def manifest_from_directory(data_dir: Union[str, Path], sample_rate: Optional[int] = None) -> Manifest:
    """
    Build a manifest from ``data_dir/<split>/<id>.wav`` files with sibling
    ``<id>.txt`` transcripts.

    Args:
        data_dir: Root directory holding train/dev/test subdirectories
        sample_rate: Expected rate (taken from the first file when omitted)

    Returns:
        Manifest with paths relative to ``data_dir``
    """
    root = Path(data_dir)
    entries = []
    for split in Split:
        split_dir = root / split.value
        if not split_dir.is_dir():
            continue
        for subfolder, _, filelist in sorted(os.walk(split_dir)):
            for filename in sorted(filelist):
                if not filename.endswith(".wav"):
                    continue
                audio_path = Path(subfolder) / filename
                text_path = audio_path.with_suffix(".txt")
                if not text_path.exists():
                    raise ManifestError(f"Missing transcript for {audio_path}")
                if sample_rate is None:
                    sample_rate = load_audio(audio_path).sample_rate
                transcript = " ".join(text_path.read_text(encoding="utf-8").split())
                entries.append(ManifestEntry(
                    id=audio_path.stem,
                    audio_path=str(audio_path.relative_to(root)),
                    transcript=transcript,
                    split=split.value,
                ))
    if not entries:
        raise ManifestError(f"No WAV files found under {root}/{{train,dev,test}}")
    return Manifest(entries, sample_rate, root=root)
