"""Feature stacks and their binary file format.

Layout (little-endian)::

    magic "FSTK" | version u32 | K u32 | T u32 | D u32 | frame_rate f32
    payload: K*T*D float32, layer-major, then frame, then dim

An archive is a concatenation of such records; the sidecar ``<archive>.idx``
maps ``utt_id<TAB>byte offset``, one line per stack.
"""

import codecs
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import torch

from lyrics_asr.exceptions import (
    DimensionMismatchError,
    MalformedHeaderError,
    StackFormatError,
    TruncatedPayloadError,
)

logger = logging.getLogger(__name__)

MAGIC = b"FSTK"
VERSION = 1
HEADER = struct.Struct("<4sIIIIf")
PAYLOAD_DTYPE = np.dtype("<f4")
INDEX_SUFFIX = ".idx"


@dataclass(frozen=True, eq=False)
class FeatureStack:
    """K layers of T x D features sharing one frame rate."""

    layers: np.ndarray
    frame_rate: float
    source_tag: str = ""

    def __post_init__(self):
        layers = np.array(self.layers, dtype=np.float32)
        if layers.ndim != 3:
            raise DimensionMismatchError(f"Feature stack must be (K, T, D), got shape {layers.shape}")
        if min(layers.shape) < 1:
            raise DimensionMismatchError(f"Feature stack has an empty axis: {layers.shape}")
        if not np.all(np.isfinite(layers)):
            raise StackFormatError(f"Feature stack {self.source_tag!r} contains non-finite values")
        layers.setflags(write=False)
        object.__setattr__(self, "layers", layers)
        # Stored at file precision so round trips are exact
        object.__setattr__(self, "frame_rate", float(np.float32(self.frame_rate)))

    @property
    def K(self) -> int:
        return int(self.layers.shape[0])

    @property
    def T(self) -> int:
        return int(self.layers.shape[1])

    @property
    def D(self) -> int:
        return int(self.layers.shape[2])

    def layer(self, index: int) -> np.ndarray:
        return self.layers[index]

    def to_tensor(self) -> torch.Tensor:
        """(K, T, D) float32 tensor (a copy)."""
        return torch.from_numpy(np.array(self.layers))

    def with_layers(self, layers: np.ndarray, source_tag: Optional[str] = None) -> "FeatureStack":
        return FeatureStack(layers, self.frame_rate, self.source_tag if source_tag is None else source_tag)

    def __eq__(self, other: object) -> bool:
        # Provenance (source_tag) is not part of the stored format
        return (
            isinstance(other, FeatureStack)
            and self.frame_rate == other.frame_rate
            and self.layers.shape == other.layers.shape
            and bool(np.array_equal(self.layers, other.layers))
        )

    def __repr__(self) -> str:
        return f"FeatureStack(K={self.K}, T={self.T}, D={self.D}, frame_rate={self.frame_rate}, source={self.source_tag!r})"


def encode_stack(stack: FeatureStack) -> bytes:
    header = HEADER.pack(MAGIC, VERSION, stack.K, stack.T, stack.D, stack.frame_rate)
    return header + stack.layers.astype(PAYLOAD_DTYPE).tobytes(order="C")


def decode_stack(buffer: bytes, offset: int = 0, source: str = "<bytes>") -> Tuple[FeatureStack, int]:
    """
    Decode one stack record starting at ``offset``.

    Returns:
        (stack, offset just past the payload)
    """
    if len(buffer) - offset < HEADER.size:
        raise MalformedHeaderError(
            f"{source}: {len(buffer) - offset} bytes at offset {offset}, header needs {HEADER.size}"
        )
    magic, version, k, t, d, frame_rate = HEADER.unpack_from(buffer, offset)
    if magic != MAGIC:
        raise MalformedHeaderError(f"{source}: bad magic {magic!r} at offset {offset}")
    if version != VERSION:
        raise MalformedHeaderError(f"{source}: unsupported stack version {version}")
    if k < 1 or t < 1 or d < 1:
        raise MalformedHeaderError(f"{source}: header advertises empty dimensions K={k} T={t} D={d}")
    start = offset + HEADER.size
    expected = k * t * d * PAYLOAD_DTYPE.itemsize
    available = len(buffer) - start
    if available < expected:
        raise TruncatedPayloadError(
            f"{source}: payload has {available} bytes, header K={k} T={t} D={d} needs {expected}"
        )
    values = np.frombuffer(buffer, dtype=PAYLOAD_DTYPE, count=k * t * d, offset=start)
    stack = FeatureStack(values.reshape(k, t, d), frame_rate, source_tag=source)
    return stack, start + expected


def write_stack(stack: FeatureStack, path: Union[str, Path]) -> Path:
    """Write a single stack file."""
    stack_path = Path(path)
    stack_path.parent.mkdir(parents=True, exist_ok=True)
    stack_path.write_bytes(encode_stack(stack))
    return stack_path


def read_stack(path: Union[str, Path]) -> FeatureStack:
    """Read a single stack file; bytes after the payload are an error."""
    stack_path = Path(path)
    try:
        buffer = stack_path.read_bytes()
    except OSError as e:
        logger.error(f"Failed to read feature stack {stack_path}: {e}")
        raise StackFormatError(f"Cannot read {stack_path}: {e}") from e
    stack, end = decode_stack(buffer, 0, source=str(stack_path))
    if end != len(buffer):
        raise DimensionMismatchError(
            f"{stack_path}: {len(buffer) - end} trailing bytes after a K={stack.K} T={stack.T} D={stack.D} payload"
        )
    return stack


def index_path(archive: Union[str, Path]) -> Path:
    archive_path = Path(archive)
    return archive_path.with_name(archive_path.name + INDEX_SUFFIX)


class StackArchiveWriter:
    """Append stacks to one archive file and write its index on close."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "wb")
        self._offsets: List[Tuple[str, int]] = []
        self._seen: set = set()

    def __enter__(self) -> "StackArchiveWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()

    def add(self, utt_id: str, stack: FeatureStack) -> None:
        if utt_id in self._seen or "\t" in utt_id or "\n" in utt_id:
            raise StackFormatError(f"Invalid or duplicate archive key {utt_id!r}")
        self._seen.add(utt_id)
        self._offsets.append((utt_id, self._file.tell()))
        self._file.write(encode_stack(stack))

    def close(self) -> None:
        if self._file.closed:
            return
        self._file.close()
        with codecs.open(str(index_path(self.path)), "w", "utf-8") as index_file:
            for utt_id, offset in self._offsets:
                index_file.write(f"{utt_id}\t{offset}\n")
        logger.info(f"Wrote {len(self._offsets)} stacks to {self.path}")


class StackArchive:
    """Random access to an archive through its sidecar index."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        idx = index_path(self.path)
        if not self.path.exists() or not idx.exists():
            raise StackFormatError(f"Archive {self.path} or its index {idx} is missing")
        self._buffer = self.path.read_bytes()
        self._offsets: Dict[str, int] = {}
        with codecs.open(str(idx), "r", "utf-8") as index_file:
            for line_number, line in enumerate(index_file, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 2 or not fields[1].isdigit():
                    raise MalformedHeaderError(f"{idx}:{line_number}: expected 'utt_id<TAB>offset'")
                offset = int(fields[1])
                if offset >= len(self._buffer):
                    raise TruncatedPayloadError(
                        f"{idx}:{line_number}: offset {offset} is past the end of {self.path} ({len(self._buffer)} bytes)"
                    )
                self._offsets[fields[0]] = offset

    def __len__(self) -> int:
        return len(self._offsets)

    def __iter__(self) -> Iterator[str]:
        return iter(self._offsets)

    def __contains__(self, utt_id: object) -> bool:
        return utt_id in self._offsets

    def __getitem__(self, utt_id: str) -> FeatureStack:
        if utt_id not in self._offsets:
            raise StackFormatError(f"Utterance {utt_id!r} not in archive {self.path}")
        stack, _ = decode_stack(self._buffer, self._offsets[utt_id], source=f"{self.path}[{utt_id}]")
        return stack


def read_stack_archive(path: Union[str, Path]) -> Dict[str, FeatureStack]:
    """Load every stack of an archive."""
    archive = StackArchive(path)
    return {utt_id: archive[utt_id] for utt_id in archive}
