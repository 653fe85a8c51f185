"""Logging utilities for training and experiment runs."""

import logging
from typing import Optional
import uuid

_RUN_ID: Optional[str] = None


def set_run_id(run_id: Optional[str]) -> str:
    """Set the run id stamped on every log record and return it."""
    global _RUN_ID
    _RUN_ID = run_id or uuid.uuid4().hex[:8]
    return _RUN_ID


def get_run_id() -> str:
    """Current run id (created lazily)."""
    if _RUN_ID is None:
        return set_run_id(None)
    return _RUN_ID


class RunIdFilter(logging.Filter):
    """Filter to add the run ID to log records."""

    def filter(self, record):
        """Add run ID to log record."""
        if not hasattr(record, 'run_id'):
            record.run_id = get_run_id()
        return True


def setup_logging(app_name: str = "lyrics_asr", log_level: Optional[str] = None):
    """
    Set up logging for the toolkit.

    Args:
        app_name: Name of the application logger
        log_level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
    """
    level = getattr(logging, log_level.upper()) if log_level else logging.INFO

    # Create formatter
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - [%(run_id)s] - %(levelname)s - %(message)s'
    )

    # Create console handler; the filter sits on the handler so records from
    # every logger get a run id before formatting
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler.addFilter(RunIdFilter())

    # Configure root logger
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    for handler in list(root_logger.handlers):
        if getattr(handler, "_lyrics_asr", False):
            root_logger.removeHandler(handler)
    console_handler._lyrics_asr = True
    root_logger.addHandler(console_handler)

    # Create application logger
    logger = logging.getLogger(app_name)
    logger.setLevel(level)

    return logger
