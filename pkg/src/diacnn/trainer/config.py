"""Training configuration and recipe presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from diacnn.trainer.schedule import monitor_mode


@dataclass(frozen=True)
class PlateauConfig:
    enabled: bool = False
    factor: float = 0.3
    patience: int = 2
    min_delta: float = 0.001


@dataclass(frozen=True)
class EarlyStopConfig:
    enabled: bool = False
    patience: int = 2
    min_delta: float = 0.001


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    base_lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 50
    lr_schedule: str = "none"  # "none" or "step_halving"
    halving_period: int = 5
    plateau: PlateauConfig = field(default_factory=PlateauConfig)
    early_stop: EarlyStopConfig = field(default_factory=EarlyStopConfig)
    monitor: str = "val_acc"
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if not self.base_lr > 0:
            raise ValueError("base_lr must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr_schedule not in ("none", "step_halving"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.plateau.patience < 1 or self.early_stop.patience < 1:
            raise ValueError("patience must be >= 1")
        monitor_mode(self.monitor)

    def with_(self, **kw) -> "TrainConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


# DiaCNN trained from scratch: Adam, lr 1e-3, 50 epochs, batch 64
DIACNN_RECIPE = TrainConfig(optimizer="adam", base_lr=1e-3, epochs=50, batch_size=64)

# transfer backbones: lr 1e-4 halved every 5 epochs for 30 epochs, plateau/early-stop on
TRANSFER_RECIPE = TrainConfig(
    optimizer="adam",
    base_lr=1e-4,
    epochs=30,
    batch_size=64,
    lr_schedule="step_halving",
    halving_period=5,
    plateau=PlateauConfig(enabled=True),
    early_stop=EarlyStopConfig(enabled=True),
)

# the tabulated pretrained-model training options: lr 1e-5, 20 epochs, batch 64
PRETRAINED_TABLE_RECIPE = TrainConfig(optimizer="adam", base_lr=1e-5, epochs=20, batch_size=64)

RECIPES = {
    "diacnn": DIACNN_RECIPE,
    "transfer": TRANSFER_RECIPE,
    "pretrained_table": PRETRAINED_TABLE_RECIPE,
}
