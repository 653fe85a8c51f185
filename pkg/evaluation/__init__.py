"""Scoring, attention diagnostics, experiment drivers and metrics for lyrics recognition.

This package provides:
- Edit-distance alignment and pooled WER / CER scoring
- Decoder attention statistics, export and plots
- The main, LM-ablation and music-ablation experiment drivers
- Prometheus metrics integration and markdown reports
"""

__version__ = "0.1.0"
