"""Deterministic training loop with best-checkpoint selection."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from diacnn.netgraph.checkpoint import save_checkpoint
from diacnn.netgraph.forward import forward, model_loss
from diacnn.netgraph.graph import ModelSpec
from diacnn.netgraph.params import ParamStore
from diacnn.trainer.config import TrainConfig
from diacnn.trainer.optim import AdamState, adam_step, sgd_step
from diacnn.trainer.schedule import early_stop_check, improved, monitor_mode, plateau_events, step_halving_lr

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr")


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, batch: int, loss: float, what: Optional[str] = None):
        where = f"non-finite {what}" if what else f"non-finite loss {loss}"
        super().__init__(f"training diverged: {where} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        self.what = what


def first_nonfinite(params: ParamStore) -> Optional[str]:
    """Name of the first parameter or buffer holding inf/nan, else ``None``."""
    for k in params.trainable_names():
        if not np.isfinite(params[k].data).all():
            return k
    for k, b in params.buffers.items():
        if not np.isfinite(b).all():
            return k
    return None


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class History:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in self.records:
            w.writerow([r.epoch] + [repr(float(getattr(r, c))) for c in HISTORY_COLUMNS[1:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "History":
        rows = list(csv.DictReader(io.StringIO(text)))
        recs = [EpochRecord(int(r["epoch"]), *(float(r[c]) for c in HISTORY_COLUMNS[1:])) for r in rows]
        return cls(recs)


@dataclass
class TrainResult:
    history: History
    best_params: ParamStore
    best_epoch: int
    params: ParamStore


@dataclass
class Evaluation:
    loss: float
    acc: float
    probs: np.ndarray
    labels: np.ndarray
    features: np.ndarray


def evaluate(model: ModelSpec, params: ParamStore, batches) -> Evaluation:
    """Infer-mode pass over an iterable of ``(x, y)`` batches."""
    probs, labels, feats = [], [], []
    total, n = 0.0, 0
    for x, y in batches:
        res = forward(model, params, x, "infer")
        p = res.probs.data.astype(np.float64)
        total += float(-np.log(np.maximum(p[np.arange(len(y)), y], 1e-300)).sum())
        n += len(y)
        probs.append(p)
        labels.append(np.asarray(y))
        feats.append(res.features.data)
    if n == 0:
        raise ValueError("nothing to evaluate")
    probs_a = np.concatenate(probs)
    labels_a = np.concatenate(labels)
    acc = float((probs_a.argmax(axis=1) == labels_a).mean())
    return Evaluation(total / n, acc, probs_a, labels_a, np.concatenate(feats))


def train_loop(
    model: ModelSpec,
    params: ParamStore,
    data,
    cfg: TrainConfig,
    checkpoint_path=None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
    initial_best: Optional[float] = None,
) -> TrainResult:
    """Train ``params`` in place.

    ``data`` provides ``batches(split, epoch)`` for ``"train"`` and ``"val"``.
    Each epoch: lr from the step schedule times the accumulated plateau
    factor; seeded train batches (gradients zeroed per batch); infer-mode
    validation; best snapshot (and file, if ``checkpoint_path``) whenever
    the monitored metric strictly beats the previous best.

    ``initial_best`` seeds the comparison with the starting parameters'
    score (epoch 0), so a fine-tune never selects anything worse than where
    it started.
    """
    if data.size("train") == 0 or data.size("val") == 0:
        raise ValueError("train and val splits must be nonempty")
    mode = monitor_mode(cfg.monitor)
    history = History()
    adam = AdamState()
    plateau_scale = 1.0
    best_val: Optional[float] = initial_best
    best_params = params.copy()
    best_epoch = 0
    if initial_best is not None and checkpoint_path is not None:
        save_checkpoint(model, best_params, checkpoint_path)

    for epoch in range(cfg.epochs):
        lr = cfg.base_lr
        if cfg.lr_schedule == "step_halving":
            lr = step_halving_lr(cfg.base_lr, epoch, cfg.halving_period)
        lr *= plateau_scale

        tot_loss, tot_correct, seen = 0.0, 0, 0
        for b, (x, y) in enumerate(data.batches("train", epoch)):
            params.zero_grad()
            loss, res = model_loss(model, params, x, y, "train")
            lv = float(loss.data)
            if not math.isfinite(lv):
                raise DivergenceError(epoch + 1, b, lv)
            loss.backward()
            if cfg.optimizer == "adam":
                adam_step(params, None, adam, lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
            else:
                sgd_step(params, None, lr)
            bad = first_nonfinite(params)
            if bad is not None:
                raise DivergenceError(epoch + 1, b, lv, bad)
            tot_loss += lv * len(y)
            tot_correct += int((res.logits.data.argmax(axis=1) == y).sum())
            seen += len(y)
        params.zero_grad()

        ev = evaluate(model, params, data.batches("val", epoch, shuffle=False))
        if not math.isfinite(ev.loss):
            raise DivergenceError(epoch + 1, -1, ev.loss)
        rec = EpochRecord(epoch + 1, tot_loss / seen, tot_correct / seen, ev.loss, ev.acc, lr)
        history.records.append(rec)
        log.info(
            "epoch %d lr %.3g train_loss %.4f train_acc %.4f val_loss %.4f val_acc %.4f",
            rec.epoch, lr, rec.train_loss, rec.train_acc, rec.val_loss, rec.val_acc,
        )
        if on_epoch is not None:
            on_epoch(rec)

        value = getattr(rec, cfg.monitor)
        if best_val is None or improved(value, best_val, 0.0, mode):
            best_val = value
            best_epoch = rec.epoch
            best_params = params.copy()
            if checkpoint_path is not None:
                save_checkpoint(model, best_params, checkpoint_path)

        monitored = history.column(cfg.monitor)
        if cfg.plateau.enabled:
            ev_list = plateau_events(monitored, cfg.plateau.patience, cfg.plateau.min_delta, mode)
            if ev_list and ev_list[-1] == len(monitored) - 1:
                plateau_scale *= cfg.plateau.factor
        if cfg.early_stop.enabled and early_stop_check(
            monitored, cfg.early_stop.patience, cfg.early_stop.min_delta, cfg.monitor
        ) == "stop":
            log.info("early stop after epoch %d", rec.epoch)
            break

    history.best_epoch = best_epoch
    return TrainResult(history, best_params, best_epoch, params)
