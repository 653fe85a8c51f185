"""Metrics collector for training runs, decoding and experiments."""

import logging
import time
from typing import Any, Dict, Optional

from lyrics_asr import __version__
from lyrics_asr.training.trainer import EpochRecord

from evaluation.metrics import (
    attention_collapse_total,
    corpus_wer,
    decoded_utterances_total,
    decoding_duration_seconds,
    experiment_runs_total,
    fusion_layer_weight,
    initialize_toolkit_info,
    training_epoch_duration_seconds,
    training_learning_rate,
    training_loss,
    training_steps_total,
)

logger = logging.getLogger(__name__)


class MetricsCollector:
    """Records progress into the prometheus metrics; doubles as a training observer."""

    def __init__(self, run: str = "default", command: str = "train"):
        self.run = run
        self.current_decode_start: Optional[float] = None
        self.row_status: Dict[str, int] = {}
        initialize_toolkit_info(__version__, command)
        logger.debug(f"MetricsCollector initialized for run {run}")

    # Training observer interface

    def on_step(self, step: int, loss: float, lr: float) -> None:
        training_steps_total.labels(run=self.run).inc()
        training_loss.labels(run=self.run, split="train").set(loss)
        training_learning_rate.labels(run=self.run).set(lr)

    def on_epoch(self, record: EpochRecord) -> None:
        training_epoch_duration_seconds.labels(run=self.run).observe(record.seconds)
        training_loss.labels(run=self.run, split="dev").set(record.dev_loss)
        for layer, weight in enumerate(record.fusion_weights or []):
            fusion_layer_weight.labels(run=self.run, layer=str(layer)).set(weight)

    # Decoding

    def start_decoding(self) -> None:
        self.current_decode_start = time.time()

    def end_decoding(self, mode: str, n_utterances: int) -> None:
        if self.current_decode_start is not None:
            decoding_duration_seconds.labels(mode=mode).observe(time.time() - self.current_decode_start)
            self.current_decode_start = None
        decoded_utterances_total.labels(mode=mode).inc(n_utterances)

    # Experiments

    def record_wer(self, experiment: str, row: str, split: str, wer: float) -> None:
        corpus_wer.labels(experiment=experiment, row=row, split=split).set(wer)

    def record_collapse(self, experiment: str, condition: str, count: int) -> None:
        attention_collapse_total.labels(experiment=experiment, condition=condition).inc(count)

    def record_run(self, experiment: str, status: str) -> None:
        experiment_runs_total.labels(experiment=experiment, status=status).inc()
        self.row_status[status] = self.row_status.get(status, 0) + 1

    def get_summary_stats(self) -> Dict[str, Any]:
        return {"run": self.run, "rows_by_status": dict(self.row_status)}
