"""Transcript normalization.

Rules (applied in order):
  1. Unicode NFKC, then lowercase.
  2. Typographic apostrophes become ``'``.
  3. An apostrophe is kept only between two letters/digits ("don't");
     every other non-alphanumeric character becomes a space.
  4. Whitespace runs collapse to one space; leading/trailing space removed.

The result is idempotent: normalizing a normalized string returns it.
"""

import re
import unicodedata

_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'", "`": "'"})
_NON_WORD = re.compile(r"[^\w']+|_")
_STRAY_APOSTROPHE = re.compile(r"(?<![^\W_])'|'(?![^\W_])")
_SPACES = re.compile(r"\s+")


def normalize_text(raw: str) -> str:
    """
    Normalize a raw transcript.

    Args:
        raw: Transcript as given

    Returns:
        Lowercase text with punctuation removed except intra-word apostrophes
    """
    text = unicodedata.normalize("NFKC", raw).lower().translate(_APOSTROPHES)
    text = _NON_WORD.sub(" ", text)
    text = _STRAY_APOSTROPHE.sub(" ", text)
    return _SPACES.sub(" ", text).strip()
