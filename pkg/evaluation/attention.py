"""Decoder attention diagnostics: entropy, column mass, collapse detection, export and plots."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from lyrics_asr.exceptions import AttentionError
from lyrics_asr.features.stack import FeatureStack, StackArchive, StackArchiveWriter

from evaluation.config import config

logger = logging.getLogger(__name__)

ROW_TOLERANCE = 1e-5
COLLAPSE_THRESHOLD = config.COLLAPSE_THRESHOLD
ARCHIVE_NAME = "attention.stk"
SUMMARY_NAME = "attention_summary.jsonl"


@dataclass
class AttentionStats:
    """Statistics of one (steps x frames) attention matrix."""

    entropy: np.ndarray
    column_mass: np.ndarray
    max_column_mass: float
    diagonality: float
    collapsed: bool

    @property
    def mean_entropy(self) -> float:
        return float(np.mean(self.entropy))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean_entropy": self.mean_entropy,
            "max_column_mass": self.max_column_mass,
            "argmax_frame": int(np.argmax(self.column_mass)),
            "diagonality": self.diagonality,
            "collapsed": self.collapsed,
        }


def _diagonality(attn: np.ndarray) -> float:
    """Pearson correlation of each step's peak frame with the step index."""
    if attn.shape[0] < 2:
        return 0.0
    ridge = np.argmax(attn, axis=1).astype(np.float64)
    steps = np.arange(attn.shape[0], dtype=np.float64)
    if np.std(ridge) == 0.0:
        return 0.0
    return float(np.corrcoef(steps, ridge)[0, 1])


def attention_stats(attn: np.ndarray, threshold: float = COLLAPSE_THRESHOLD) -> AttentionStats:
    """
    Summarize one attention matrix.

    Args:
        attn: (output steps, source frames) weights; every row sums to 1
        threshold: Collapse when the largest column mass exceeds this

    Returns:
        AttentionStats; entropy in nats per row

    Raises:
        AttentionError: Wrong rank, negative weights or rows off by more than 1e-5
    """
    attn = np.asarray(attn, dtype=np.float64)
    if attn.ndim != 2 or min(attn.shape) < 1:
        raise AttentionError(f"Attention must be a nonempty (steps, frames) matrix, got shape {attn.shape}")
    if np.any(attn < 0):
        raise AttentionError("Attention weights must be non-negative")
    row_sums = attn.sum(axis=1)
    bad = np.flatnonzero(np.abs(row_sums - 1.0) > ROW_TOLERANCE)
    if bad.size:
        raise AttentionError(f"Attention rows {bad.tolist()} are not normalized (sums {row_sums[bad].tolist()})")

    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(attn > 0, attn * np.log(attn), 0.0)
    column_mass = attn.mean(axis=0)
    max_column_mass = float(column_mass.max())
    return AttentionStats(
        entropy=-terms.sum(axis=1),
        column_mass=column_mass,
        max_column_mass=max_column_mass,
        diagonality=_diagonality(attn),
        collapsed=max_column_mass > threshold,
    )


def head_stats(weights: np.ndarray, threshold: float = COLLAPSE_THRESHOLD
               ) -> Tuple[Dict[Tuple[int, int], AttentionStats], AttentionStats]:
    """
    Stats for every (layer, head) of a (layers, heads, steps, frames) array and
    for the aggregate mean over all layers and heads.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 4:
        raise AttentionError(f"Expected (layers, heads, steps, frames) weights, got shape {weights.shape}")
    per_head = {
        (layer, head): attention_stats(weights[layer, head], threshold)
        for layer in range(weights.shape[0])
        for head in range(weights.shape[1])
    }
    aggregate = attention_stats(weights.mean(axis=(0, 1)), threshold)
    return per_head, aggregate


def summary_record(utt_id: str, weights: np.ndarray, threshold: float = COLLAPSE_THRESHOLD) -> Dict[str, Any]:
    """JSON-ready summary of one utterance's attention."""
    per_head, aggregate = head_stats(weights, threshold)
    return {
        "utt_id": utt_id,
        "steps": int(weights.shape[2]),
        "frames": int(weights.shape[3]),
        "aggregate": aggregate.to_dict(),
        "heads": [{"layer": layer, "head": head, **stats.to_dict()}
                  for (layer, head), stats in sorted(per_head.items())],
    }


def attention_stack(weights: np.ndarray) -> FeatureStack:
    """Final-layer heads plus the aggregate as a (heads + 1, steps, frames) stack."""
    weights = np.asarray(weights, dtype=np.float64)
    layers = np.concatenate([weights[-1], weights.mean(axis=(0, 1))[None]], axis=0)
    return FeatureStack(layers.astype(np.float32), frame_rate=1.0, source_tag="attention")


def export_attention(
    records: Iterable[Tuple[str, np.ndarray]],
    output_dir: Union[str, Path],
    threshold: float = COLLAPSE_THRESHOLD,
) -> List[Dict[str, Any]]:
    """
    Write attention matrices to a stack archive and one summary line per utterance.

    Args:
        records: (utt_id, (layers, heads, steps, frames) weights) pairs
        output_dir: Receives ``attention.stk`` (+ index) and ``attention_summary.jsonl``
        threshold: Collapse threshold

    Returns:
        The summary records
    """
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    with StackArchiveWriter(out_dir / ARCHIVE_NAME) as writer:
        for utt_id, weights in records:
            summaries.append(summary_record(utt_id, weights, threshold))
            writer.add(utt_id, attention_stack(weights))
    with open(out_dir / SUMMARY_NAME, "w", encoding="utf-8") as f:
        for summary in summaries:
            f.write(json.dumps(summary, sort_keys=True) + "\n")
    collapsed = sum(summary["aggregate"]["collapsed"] for summary in summaries)
    logger.info(f"Exported attention of {len(summaries)} utterances to {out_dir} ({collapsed} collapsed)")
    return summaries


def collapse_summary(summaries: List[Dict[str, Any]]) -> Dict[str, Any]:
    """Corpus-level view of per-utterance summaries."""
    if not summaries:
        return {"utterances": 0, "collapsed": 0, "collapse_rate": 0.0, "mean_max_column_mass": 0.0,
                "mean_diagonality": 0.0}
    masses = [summary["aggregate"]["max_column_mass"] for summary in summaries]
    collapsed = sum(1 for summary in summaries if summary["aggregate"]["collapsed"])
    return {
        "utterances": len(summaries),
        "collapsed": collapsed,
        "collapse_rate": collapsed / len(summaries),
        "mean_max_column_mass": float(np.mean(masses)),
        "mean_diagonality": float(np.mean([summary["aggregate"]["diagonality"] for summary in summaries])),
    }


def plot_attention(attn: np.ndarray, path: Union[str, Path], title: Optional[str] = None) -> Path:
    """Render one (steps x frames) matrix as a PNG heat map."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_path = Path(path)
    plot_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    image = ax.imshow(np.asarray(attn), aspect="auto", origin="lower", interpolation="nearest", vmin=0.0)
    ax.set_xlabel("Encoder frame")
    ax.set_ylabel("Output step")
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax)
    fig.tight_layout()
    fig.savefig(plot_path, dpi=100)
    plt.close(fig)
    return plot_path


def plot_attention_archive(attention_dir: Union[str, Path], output_dir: Union[str, Path],
                           limit: int = config.MAX_ATTENTION_PLOTS) -> List[Path]:
    """Plot the aggregate layer of up to ``limit`` exported utterances (sorted by id)."""
    archive = StackArchive(Path(attention_dir) / ARCHIVE_NAME)
    plots = []
    for utt_id in sorted(archive)[:limit]:
        stack = archive[utt_id]
        plots.append(plot_attention(stack.layer(stack.K - 1), Path(output_dir) / f"{utt_id}.png",
                                    title=f"{utt_id} (mean over layers and heads)"))
    logger.info(f"Plotted attention of {len(plots)} utterances into {output_dir}")
    return plots
