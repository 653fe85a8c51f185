"""Utilities for the lyrics recognition toolkit."""

from lyrics_asr.utils.logging_utils import setup_logging, set_run_id
from lyrics_asr.utils.seeding import set_seed, derive_seed

__all__ = ["setup_logging", "set_run_id", "set_seed", "derive_seed"]
