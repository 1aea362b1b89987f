"""Optimisers, schedules and the training loop."""

from diacnn.trainer.config import (
    DIACNN_RECIPE,
    PRETRAINED_TABLE_RECIPE,
    RECIPES,
    TRANSFER_RECIPE,
    EarlyStopConfig,
    PlateauConfig,
    TrainConfig,
)
from diacnn.trainer.loop import DivergenceError, EpochRecord, Evaluation, History, TrainResult, evaluate, train_loop
from diacnn.trainer.optim import AdamState, adam_step, sgd_step
from diacnn.trainer.schedule import early_stop_check, plateau_events, plateau_reduce, step_halving_lr

__all__ = [
    "AdamState",
    "DIACNN_RECIPE",
    "DivergenceError",
    "EarlyStopConfig",
    "EpochRecord",
    "Evaluation",
    "History",
    "PRETRAINED_TABLE_RECIPE",
    "PlateauConfig",
    "RECIPES",
    "TRANSFER_RECIPE",
    "TrainConfig",
    "TrainResult",
    "adam_step",
    "early_stop_check",
    "evaluate",
    "plateau_events",
    "plateau_reduce",
    "sgd_step",
    "step_halving_lr",
    "train_loop",
]
