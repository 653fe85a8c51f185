"""Exception hierarchy for the lyrics recognition toolkit.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class LyricsASRError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1


# Usage / configuration (exit 1)

class UsageError(LyricsASRError):
    """Invalid command-line usage."""

    exit_code = 1


class ConfigError(LyricsASRError):
    """Invalid configuration value or file."""

    exit_code = 1


class DecodingError(LyricsASRError):
    """Decoder or language model stepped with an invalid prefix."""

    exit_code = 1


# Data errors (exit 2)

class DataError(LyricsASRError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class ManifestError(DataError):
    """Manifest file is malformed or violates its invariants."""


class AudioError(DataError):
    """Audio could not be loaded or does not match the manifest."""


class VocabularyError(DataError):
    """Vocabulary cannot be built or read."""


class MixingError(DataError):
    """Background music cannot be mixed into a voice segment."""


class StackFormatError(DataError):
    """Feature-stack file does not follow the documented binary format."""


class MalformedHeaderError(StackFormatError):
    """Missing or unreadable stack header."""


class DimensionMismatchError(StackFormatError):
    """Stack dimensions disagree with the payload or with the caller."""


class TruncatedPayloadError(StackFormatError):
    """Stack payload is shorter than the header advertises."""


class CheckpointError(DataError):
    """Checkpoint container cannot be read."""


class LMFormatError(DataError):
    """Language-model file is malformed."""


class NBestFormatError(DataError):
    """N-best file is malformed."""


class ScoringError(DataError):
    """References and hypotheses cannot be paired."""


class AttentionError(DataError):
    """Attention matrix is not row-normalized."""


class CTCLengthError(DataError):
    """Encoder output is shorter than the CTC target."""


# Numeric failures (exit 3)

class NumericError(LyricsASRError):
    """Numerical failure during training or decoding."""

    exit_code = 3


class NaNLossError(NumericError):
    """Training loss became NaN or infinite."""

    def __init__(self, step: int, batch_id: str, value: Optional[float] = None):
        self.step = step
        self.batch_id = batch_id
        self.value = value
        super().__init__(
            f"non-finite loss {value} at step {step} (batch {batch_id})"
        )
