"""Configuration for scoring, diagnostics and experiment runs."""

import os
from pathlib import Path


class EvaluationConfig:
    """Configuration settings for evaluation."""

    # Attention diagnostics
    COLLAPSE_THRESHOLD: float = float(os.getenv("LYRICS_ASR_COLLAPSE_THRESHOLD", "0.5"))
    MAX_ATTENTION_PLOTS: int = int(os.getenv("LYRICS_ASR_MAX_ATTENTION_PLOTS", "20"))

    # Paths
    RESULTS_DIR: Path = Path(os.getenv("LYRICS_ASR_OUTPUT_DIR", "exp"))


# Initialize configuration
config = EvaluationConfig()
