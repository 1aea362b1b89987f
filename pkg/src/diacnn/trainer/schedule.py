"""Learning-rate schedules, plateau reduction and early stopping.

"Improvement" is always strict: the monitored value must beat the best so
far by more than ``min_delta`` (upwards for accuracies, downwards for
losses).
"""

from __future__ import annotations

import math
from typing import Sequence

MONITORS = ("val_acc", "val_loss", "train_acc", "train_loss")


def monitor_mode(monitor: str) -> str:
    if monitor not in MONITORS:
        raise ValueError(f"unknown monitor metric {monitor!r}; choose from {MONITORS}")
    return "max" if monitor.endswith("acc") else "min"


def improved(value: float, best: float, min_delta: float, mode: str) -> bool:
    if mode == "max":
        return value - best > min_delta
    return best - value > min_delta


def step_halving_lr(base_lr: float, epoch: int, period: int = 5) -> float:
    """``base_lr * 0.5 ** floor(epoch / period)`` with 0-based epochs."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return base_lr * 0.5 ** (epoch // period)


def _values(history, monitor: str) -> list[float]:
    if hasattr(history, "records"):
        return [float(getattr(r, monitor)) for r in history.records]
    vals = list(history)
    if vals and not isinstance(vals[0], (int, float)):
        return [float(getattr(r, monitor)) for r in vals]
    return [float(v) for v in vals]


def plateau_events(values: Sequence[float], patience: int, min_delta: float, mode: str) -> list[int]:
    """0-based epochs after which a plateau reduction fires.

    The stall counter counts epochs without strict improvement over the best
    value; reaching ``patience`` fires a reduction and resets the counter
    (the best value is kept).
    """
    events = []
    best = -math.inf if mode == "max" else math.inf
    wait = 0
    for i, v in enumerate(values):
        if i == 0 or improved(v, best, min_delta, mode):
            best = v
            wait = 0
            continue
        wait += 1
        if wait >= patience:
            events.append(i)
            wait = 0
    return events


def plateau_reduce(
    history,
    lr: float,
    factor: float = 0.3,
    patience: int = 2,
    min_delta: float = 0.001,
    monitor: str = "val_acc",
) -> float:
    """Learning rate to use after the last epoch of ``history``.

    ``history`` is a :class:`History`, a list of epoch records, or a plain
    list of monitored values.
    """
    vals = _values(history, monitor)
    if not vals:
        raise ValueError("history is empty")
    fired = plateau_events(vals, patience, min_delta, monitor_mode(monitor))
    return lr * factor if fired and fired[-1] == len(vals) - 1 else lr


def stalled_epochs(values: Sequence[float], min_delta: float, mode: str) -> int:
    """Epochs since the last strict improvement (no resets)."""
    best = -math.inf if mode == "max" else math.inf
    wait = 0
    for i, v in enumerate(values):
        if i == 0 or improved(v, best, min_delta, mode):
            best, wait = v, 0
        else:
            wait += 1
    return wait


def early_stop_check(history, patience: int = 2, min_delta: float = 0.001, monitor: str = "val_acc") -> str:
    """``"stop"`` once the monitored metric has stalled for ``patience`` epochs, else ``"continue"``."""
    vals = _values(history, monitor)
    if not vals:
        raise ValueError("history is empty")
    return "stop" if stalled_epochs(vals, min_delta, monitor_mode(monitor)) >= patience else "continue"

