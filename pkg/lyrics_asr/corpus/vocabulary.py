"""Token vocabulary with reserved ids."""

import logging
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from lyrics_asr.corpus.text import normalize_text
from lyrics_asr.exceptions import VocabularyError

logger = logging.getLogger(__name__)

BLANK = "<blank>"
SOS = "<sos>"
EOS = "<eos>"
UNK = "<unk>"
PAD = "<pad>"
SPACE = "<space>"

RESERVED_TOKENS: Tuple[str, ...] = (BLANK, SOS, EOS, UNK, PAD)
BLANK_ID, SOS_ID, EOS_ID, UNK_ID, PAD_ID = range(len(RESERVED_TOKENS))


class TokenUnit(str, Enum):
    """Units a transcript is split into."""
    CHAR = "char"
    WORD = "word"


def split_units(text: str, unit: TokenUnit) -> List[str]:
    """Split normalized text into units (characters use ``<space>``)."""
    if TokenUnit(unit) == TokenUnit.WORD:
        return text.split()
    return [SPACE if char == " " else char for char in text]


class Vocabulary:
    """Immutable token-to-id bijection; ids 0..4 are reserved."""

    def __init__(self, units: Sequence[str], unit: Union[TokenUnit, str] = TokenUnit.CHAR):
        self.unit = TokenUnit(unit)
        tokens = list(RESERVED_TOKENS) + list(units)
        if len(set(tokens)) != len(tokens):
            raise VocabularyError("Vocabulary tokens must be unique and must not reuse reserved names")
        self._tokens: Tuple[str, ...] = tuple(tokens)
        self._ids: Dict[str, int] = {token: index for index, token in enumerate(self._tokens)}

    @property
    def blank_id(self) -> int:
        return self._ids[BLANK]

    @property
    def sos_id(self) -> int:
        return self._ids[SOS]

    @property
    def eos_id(self) -> int:
        return self._ids[EOS]

    @property
    def unk_id(self) -> int:
        return self._ids[UNK]

    @property
    def pad_id(self) -> int:
        return self._ids[PAD]

    @property
    def tokens(self) -> Tuple[str, ...]:
        return self._tokens

    @property
    def units(self) -> Tuple[str, ...]:
        """Non-reserved tokens in id order."""
        return self._tokens[len(RESERVED_TOKENS):]

    def __len__(self) -> int:
        return len(self._tokens)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.unit == other.unit and self._tokens == other._tokens

    def __hash__(self) -> int:
        return hash((self.unit, self._tokens))

    def __repr__(self) -> str:
        return f"Vocabulary(unit={self.unit.value}, size={len(self)})"

    def id_of(self, token: str) -> int:
        return self._ids.get(token, self.unk_id)

    def token_of(self, index: int) -> str:
        if not 0 <= index < len(self._tokens):
            raise VocabularyError(f"Token id {index} outside vocabulary range 0..{len(self) - 1}")
        return self._tokens[index]

    def tokenize(self, text: str) -> List[int]:
        """Normalize and map text to token ids (unknown units become ``<unk>``)."""
        return [self.id_of(unit) for unit in split_units(normalize_text(text), self.unit)]

    def detokenize(self, ids: Iterable[int]) -> str:
        """Map ids back to text; reserved ids are dropped."""
        units = []
        for index in ids:
            token = self.token_of(int(index))
            if token in RESERVED_TOKENS and token != UNK:
                continue
            units.append(token)
        if self.unit == TokenUnit.WORD:
            return " ".join(units)
        return "".join(" " if unit == SPACE else unit for unit in units)


def build_vocabulary(manifest, unit: Union[TokenUnit, str] = TokenUnit.CHAR) -> Vocabulary:
    """
    Build a vocabulary from the train split of a manifest.

    Args:
        manifest: Manifest with a nonempty train split
        unit: ``char`` or ``word``

    Returns:
        Vocabulary with sorted units after the reserved tokens
    """
    unit = TokenUnit(unit)
    train = manifest.split("train")
    if not train:
        raise VocabularyError("Cannot build a vocabulary: train split is empty")
    seen = set()
    for entry in train:
        normalized = normalize_text(entry.transcript)
        if not normalized:
            raise VocabularyError(f"Transcript of {entry.id} is empty after normalization")
        seen.update(split_units(normalized, unit))
    vocabulary = Vocabulary(sorted(seen), unit=unit)
    logger.info(f"Built {unit.value} vocabulary with {len(vocabulary)} tokens from {len(train)} utterances")
    return vocabulary


def write_vocabulary(vocabulary: Vocabulary, path: Union[str, Path]) -> Path:
    """Write one token per line (reserved tokens first, line number = id)."""
    vocab_path = Path(path)
    vocab_path.parent.mkdir(parents=True, exist_ok=True)
    vocab_path.write_text("".join(f"{token}\n" for token in vocabulary.tokens), encoding="utf-8")
    return vocab_path


def read_vocabulary(path: Union[str, Path], unit: Union[TokenUnit, str] = TokenUnit.CHAR) -> Vocabulary:
    """Read a vocabulary written by :func:`write_vocabulary` (the unit is not stored in the file)."""
    vocab_path = Path(path)
    if not vocab_path.exists():
        raise VocabularyError(f"Vocabulary file not found: {vocab_path}")
    lines = vocab_path.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if tuple(lines[:len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
        raise VocabularyError(f"{vocab_path} does not start with the reserved tokens {RESERVED_TOKENS}")
    return Vocabulary(lines[len(RESERVED_TOKENS):], unit=unit)
