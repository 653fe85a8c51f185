"""Training loop: warmup schedule, early stopping, top-k checkpoint averaging."""

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

import torch
from pydantic import BaseModel, Field, model_validator
from torch import nn

from lyrics_asr.exceptions import NaNLossError
from lyrics_asr.features.fusion import check_convex
from lyrics_asr.models.checkpoint import save_model
from lyrics_asr.models.config import LossSpec
from lyrics_asr.models.recognizer import RecognizerModel, compute_loss
from lyrics_asr.training.data import Example, TrainingData, make_batches
from lyrics_asr.training.schedule import WarmupScheduler, lr_scale_for_peak
from lyrics_asr.utils.seeding import derive_seed, set_seed

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.98)
ADAM_EPS = 1e-9


class SelectMode(str, Enum):
    """How the final model is chosen from the retained checkpoints."""
    AVERAGE = "average"
    BEST = "best"


class TrainConfig(BaseModel):
    """Optimization and model-selection settings."""

    preset: Optional[str] = Field(None, description="Training preset the values came from")
    lr_scale: float = Field(1.0, gt=0.0, description="Multiplier of the warmup schedule")
    peak_lr: Optional[float] = Field(None, gt=0.0, description="Peak learning rate (derives lr_scale)")
    warmup_steps: int = Field(25000, ge=1, description="Steps to the schedule peak")
    max_epochs: int = Field(100, ge=1, description="Epoch limit")
    patience: int = Field(3, ge=0, description="Non-improving dev epochs before stopping (0 = never)")
    avg_top_k: int = Field(10, ge=1, description="Best checkpoints kept and averaged")
    select: SelectMode = Field(SelectMode.AVERAGE, description="average or best")
    batch_frames: int = Field(20000, ge=1, description="Frame budget per batch (batch size x longest T)")
    grad_clip: float = Field(5.0, gt=0.0, description="Gradient norm clip")
    fusion_lr_multiplier: float = Field(10.0, gt=0.0, description="Learning-rate multiplier of fusion logits")
    seed: int = Field(0, description="Run seed")
    deterministic: bool = Field(True, description="Force deterministic kernels")

    @model_validator(mode="after")
    def _check(self) -> "TrainConfig":
        if self.select == SelectMode.BEST and self.avg_top_k != 1:
            # best mode keeps only the top checkpoint
            self.avg_top_k = 1
        return self

    def resolved_lr_scale(self, d_model: int) -> float:
        if self.peak_lr is not None:
            return lr_scale_for_peak(self.peak_lr, d_model, self.warmup_steps)
        return self.lr_scale


class EarlyStopping:
    """Stops after ``patience`` consecutive epochs without a new best dev loss."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0
        self.epoch = 0

    def update(self, value: float) -> bool:
        """Record one epoch; True when training should stop."""
        self.epoch += 1
        if value < self.best:
            self.best = value
            self.best_epoch = self.epoch
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
        return self.patience > 0 and self.bad_epochs >= self.patience


def average_state_dicts(states: Sequence[Dict[str, torch.Tensor]]) -> Dict[str, torch.Tensor]:
    """
    Parameter-wise mean accumulated in float64.

    Integer buffers (such as BatchNorm step counters) are taken from the first state.
    """
    if not states:
        raise ValueError("Cannot average zero checkpoints")
    averaged: Dict[str, torch.Tensor] = {}
    for name, first in states[0].items():
        if not torch.is_floating_point(first):
            averaged[name] = first.clone()
            continue
        total = torch.zeros_like(first, dtype=torch.float64)
        for state in states:
            total += state[name].to(torch.float64)
        averaged[name] = (total / len(states)).to(first.dtype)
    return averaged


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_loss: float
    lr: float
    steps: int
    seconds: float
    fusion_weights: Optional[List[float]] = None


@dataclass
class TrainResult:
    history: List[EpochRecord]
    best_epoch: int
    best_dev_loss: float
    final_dev_loss: float
    stopped_early: bool
    retained_epochs: List[int]
    checkpoint_path: Optional[str] = None
    skipped_ctc: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class TrainingObserver(Protocol):
    """Receives progress events (metrics exporters, progress bars)."""

    def on_step(self, step: int, loss: float, lr: float) -> None: ...

    def on_epoch(self, record: EpochRecord) -> None: ...


def _optimizer(model: RecognizerModel, cfg: TrainConfig) -> torch.optim.Optimizer:
    fusion_params = list(model.fusion.parameters()) if model.fusion is not None else []
    fusion_ids = {id(p) for p in fusion_params}
    groups: List[Dict[str, Any]] = [
        {"params": [p for p in model.parameters() if id(p) not in fusion_ids], "lr_multiplier": 1.0}
    ]
    if fusion_params:
        groups.append({"params": fusion_params, "lr_multiplier": cfg.fusion_lr_multiplier})
    return torch.optim.Adam(groups, lr=0.0, betas=ADAM_BETAS, eps=ADAM_EPS)


def evaluate_loss(model: RecognizerModel, examples: Sequence[Example], spec: LossSpec,
                  batch_frames: int) -> float:
    """Utterance-weighted mean loss in eval mode."""
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for batch in make_batches(examples, batch_frames):
            output = compute_loss(model, batch, spec)
            total += float(output.loss) * len(batch)
            count += len(batch)
    return total / count


def train(
    model: RecognizerModel,
    data: TrainingData,
    cfg: TrainConfig,
    spec: LossSpec,
    output_dir: Optional[str] = None,
    observer: Optional[TrainingObserver] = None,
) -> TrainResult:
    """
    Train ``model`` in place and load the selected final parameters into it.

    Each epoch runs one pass over shuffled frame-budget batches, then
    measures the dev loss. The ``avg_top_k`` best epochs by dev loss are
    kept; the final model is their parameter average (or the single best).

    Args:
        model: Recognizer to train
        data: Train and dev examples
        cfg: Optimization settings
        spec: Loss weights
        output_dir: Where to write ``model.pt`` and ``train_log.json``
        observer: Optional progress receiver

    Returns:
        TrainResult with per-epoch history

    Raises:
        NaNLossError: Non-finite loss, with step and batch id
    """
    set_seed(cfg.seed, cfg.deterministic)
    d_model = model.config.memory_dim
    lr_scale = cfg.resolved_lr_scale(d_model)
    optimizer = _optimizer(model, cfg)
    scheduler = WarmupScheduler(optimizer, d_model, lr_scale, cfg.warmup_steps)
    stopper = EarlyStopping(cfg.patience)
    history: List[EpochRecord] = []
    retained: List[Tuple[float, int, Dict[str, torch.Tensor]]] = []
    skipped_ctc: List[str] = []
    stopped_early = False
    logger.info(f"Training {model.parameter_count()} parameters for up to {cfg.max_epochs} epochs "
                f"(lr_scale={lr_scale:.4g}, warmup={cfg.warmup_steps}, train={len(data.train)}, dev={len(data.dev)})")

    for epoch in range(1, cfg.max_epochs + 1):
        start = time.time()
        model.train()
        batches = make_batches(data.train, cfg.batch_frames, seed=derive_seed(cfg.seed, "epoch", epoch))
        epoch_loss, epoch_utts = 0.0, 0
        for index, batch in enumerate(batches):
            lr = scheduler.step()
            output = compute_loss(model, batch, spec)
            if not torch.isfinite(output.loss):
                batch_id = f"epoch{epoch}/batch{index}:{batch.ids[0]}"
                logger.error(f"Non-finite loss at step {scheduler.step_num} in {batch_id}")
                raise NaNLossError(scheduler.step_num, batch_id, float(output.loss))
            optimizer.zero_grad()
            output.loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            if model.fusion is not None:
                check_convex(model.fusion)
            skipped_ctc.extend(output.skipped_ctc)
            epoch_loss += float(output.loss) * len(batch)
            epoch_utts += len(batch)
            if observer is not None:
                observer.on_step(scheduler.step_num, float(output.loss), lr)

        dev_loss = evaluate_loss(model, data.dev, spec, cfg.batch_frames)
        if not math.isfinite(dev_loss):
            raise NaNLossError(scheduler.step_num, f"epoch{epoch}/dev", dev_loss)
        fusion = model.fusion.weights().detach().tolist() if model.fusion is not None else None
        record = EpochRecord(epoch, epoch_loss / epoch_utts, dev_loss, scheduler.rate, scheduler.step_num,
                             time.time() - start, fusion)
        history.append(record)
        fusion_note = f", fusion {[round(w, 3) for w in fusion]}" if fusion else ""
        logger.info(f"Epoch {epoch}: train {record.train_loss:.4f}, dev {dev_loss:.4f}, "
                    f"lr {scheduler.rate:.3g}{fusion_note}")
        if observer is not None:
            observer.on_epoch(record)

        snapshot = {name: tensor.detach().cpu().clone() for name, tensor in model.state_dict().items()}
        retained.append((dev_loss, epoch, snapshot))
        retained.sort(key=lambda item: (item[0], item[1]))
        del retained[cfg.avg_top_k:]

        if stopper.update(dev_loss):
            stopped_early = True
            logger.info(f"Early stop after epoch {epoch}: no dev improvement for {cfg.patience} epochs")
            break

    if cfg.select == SelectMode.BEST or len(retained) == 1:
        final_state = retained[0][2]
    else:
        final_state = average_state_dicts([state for _, _, state in retained])
    model.load_state_dict(final_state)
    final_dev = evaluate_loss(model, data.dev, spec, cfg.batch_frames)
    retained_epochs = sorted(epoch for _, epoch, _ in retained)
    logger.info(f"Selected {cfg.select.value} of epochs {retained_epochs}: dev loss {final_dev:.4f}")

    result = TrainResult(history, stopper.best_epoch, stopper.best, final_dev, stopped_early, retained_epochs,
                         skipped_ctc=sorted(set(skipped_ctc)))
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        result.checkpoint_path = os.path.join(output_dir, "model.pt")
        save_model(result.checkpoint_path, model, optimizer.state_dict(),
                   {"train": cfg.model_dump(mode="json"), "best_epoch": result.best_epoch,
                    "final_dev_loss": final_dev, "retained_epochs": retained_epochs})
        with open(os.path.join(output_dir, "train_log.json"), "w", encoding="utf-8") as f:
            json.dump(result.to_dict(), f, indent=2)
    return result
