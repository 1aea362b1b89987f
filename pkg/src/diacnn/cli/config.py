"""Run configuration: a strict INI document.

Every key below is optional and falls back to the listed default; unknown
sections or keys are rejected. Relative paths are resolved against the
working directory, so a config snapshot re-run from the same place
reproduces the run.

.. code-block:: ini

    [dataset]
    manifest = data/synthetic/manifest.csv
    task = binary              ; binary | multiclass
    positive = C               ; comma-separated ODIR tokens (binary task)
    negative = N
    split_source = seeded      ; seeded | manifest (use the split column as is)
    ratios = 0.8, 0.1, 0.1
    stratify = true
    seed = 0

    [preprocess]
    resize = 224, 224
    equalize = true
    blur_sigma = 1.0
    normalize01 = true
    augment = true
    rotate_deg_max = 15
    zoom_range = 0.9, 1.1
    hflip_prob = 0.5
    seed = 0

    [model]
    preset = diacnn            ; diacnn | baseline_cnn | mini_inception
    net_width = 16
    num_classes = 2

    [train]
    optimizer = adam           ; adam | sgd
    base_lr = 0.001
    beta1 = 0.9
    beta2 = 0.999
    adam_eps = 1e-08
    batch_size = 64
    epochs = 50
    lr_schedule = none         ; none | step_halving
    halving_period = 5
    plateau = false
    plateau_factor = 0.3
    plateau_patience = 2
    plateau_min_delta = 0.001
    early_stop = false
    early_stop_patience = 2
    early_stop_min_delta = 0.001
    monitor = val_acc          ; val_acc | val_loss | train_acc | train_loss
    seed = 0

    [finetune]
    freeze = head_only         ; head_only | last_block | all | comma-separated layer prefixes
    reinit_head = false

    [output]
    dir = runs/default
    eval_split = test
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace
from typing import Any, Callable

from diacnn.datapipe.image import AugmentConfig, PreprocessConfig
from diacnn.datapipe.manifest import ODIR_CLASSES, SPLITS
from diacnn.netgraph.models import PRESETS
from diacnn.trainer.config import EarlyStopConfig, PlateauConfig, TrainConfig


class ConfigError(ValueError):
    """Malformed, incomplete or inconsistent run configuration."""


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(t) for t in s.split(","))


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(t) for t in s.split(","))


def _tokens(s: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in s.split(",") if t.strip())


def _str(s: str) -> str:
    return s.strip()


Parser = Callable[[str], Any]

SCHEMA: dict[str, dict[str, tuple[Parser, str]]] = {
    "dataset": {
        "manifest": (_str, "data/synthetic/manifest.csv"),
        "task": (_str, "binary"),
        "positive": (_tokens, "C"),
        "negative": (_tokens, "N"),
        "split_source": (_str, "seeded"),
        "ratios": (_floats, "0.8, 0.1, 0.1"),
        "stratify": (_bool, "true"),
        "seed": (int, "0"),
    },
    "preprocess": {
        "resize": (_ints, "224, 224"),
        "equalize": (_bool, "true"),
        "blur_sigma": (float, "1.0"),
        "normalize01": (_bool, "true"),
        "augment": (_bool, "true"),
        "rotate_deg_max": (float, "15"),
        "zoom_range": (_floats, "0.9, 1.1"),
        "hflip_prob": (float, "0.5"),
        "seed": (int, "0"),
    },
    "model": {
        "preset": (_str, "diacnn"),
        "net_width": (int, "16"),
        "num_classes": (int, "2"),
    },
    "train": {
        "optimizer": (_str, "adam"),
        "base_lr": (float, "0.001"),
        "beta1": (float, "0.9"),
        "beta2": (float, "0.999"),
        "adam_eps": (float, "1e-08"),
        "batch_size": (int, "64"),
        "epochs": (int, "50"),
        "lr_schedule": (_str, "none"),
        "halving_period": (int, "5"),
        "plateau": (_bool, "false"),
        "plateau_factor": (float, "0.3"),
        "plateau_patience": (int, "2"),
        "plateau_min_delta": (float, "0.001"),
        "early_stop": (_bool, "false"),
        "early_stop_patience": (int, "2"),
        "early_stop_min_delta": (float, "0.001"),
        "monitor": (_str, "val_acc"),
        "seed": (int, "0"),
    },
    "finetune": {
        "freeze": (_tokens, "head_only"),
        "reinit_head": (_bool, "false"),
    },
    "output": {
        "dir": (_str, "runs/default"),
        "eval_split": (_str, "test"),
    },
}


@dataclass(frozen=True)
class DatasetSection:
    manifest: str
    task: str
    positive: tuple[str, ...]
    negative: tuple[str, ...]
    split_source: str
    ratios: tuple[float, ...]
    stratify: bool
    seed: int


@dataclass(frozen=True)
class ModelSection:
    preset: str
    net_width: int
    num_classes: int


@dataclass(frozen=True)
class FinetuneSection:
    freeze: tuple[str, ...]
    reinit_head: bool

    @property
    def selector(self):
        return self.freeze[0] if len(self.freeze) == 1 else list(self.freeze)


@dataclass(frozen=True)
class OutputSection:
    dir: str
    eval_split: str


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSection
    preprocess: PreprocessConfig
    augment: bool
    model: ModelSection
    train: TrainConfig
    finetune: FinetuneSection
    output: OutputSection
    source_text: str = ""

    def with_seed(self, seed: int) -> "RunConfig":
        """Override every seed (split, augmentation, init/shuffle) at once."""
        return replace(
            self,
            dataset=replace(self.dataset, seed=seed),
            preprocess=replace(self.preprocess, seed=seed),
            train=replace(self.train, seed=seed),
        )

    def with_output(self, out_dir: str) -> "RunConfig":
        return replace(self, output=replace(self.output, dir=out_dir))


def _read_sections(text: str) -> dict[str, dict[str, Any]]:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"), default_section="__none__")
    cp.optionxform = str  # keys are case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse config: {e}") from None
    values: dict[str, dict[str, Any]] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
    for section, keys in SCHEMA.items():
        given = dict(cp.items(section)) if cp.has_section(section) else {}
        for k in given:
            if k not in keys:
                raise ConfigError(f"unknown key {k!r} in [{section}]")
        out = {}
        for k, (parse, default) in keys.items():
            raw = given.get(k, default)
            try:
                out[k] = parse(raw)
            except ValueError as e:
                raise ConfigError(f"[{section}] {k} = {raw!r}: {e}") from None
        values[section] = out
    return values


def parse_config(text: str, check_files: bool = True) -> RunConfig:
    """Parse and validate; ``check_files`` requires the manifest to exist."""
    v = _read_sections(text)
    d = v["dataset"]
    if d["task"] not in ("binary", "multiclass"):
        raise ConfigError(f"[dataset] task must be binary or multiclass, got {d['task']!r}")
    if d["split_source"] not in ("seeded", "manifest"):
        raise ConfigError(f"[dataset] split_source must be seeded or manifest, got {d['split_source']!r}")
    if len(d["ratios"]) != 3 or abs(sum(d["ratios"]) - 1.0) > 1e-9 or min(d["ratios"]) < 0:
        raise ConfigError(f"[dataset] ratios must be three nonnegative numbers summing to 1, got {d['ratios']}")
    if d["task"] == "binary":
        bad = (set(d["positive"]) | set(d["negative"])) - set(ODIR_CLASSES)
        if bad:
            raise ConfigError(f"[dataset] unknown class tokens {sorted(bad)}")
        if set(d["positive"]) & set(d["negative"]):
            raise ConfigError("[dataset] positive and negative class sets overlap")
    if check_files and not os.path.isfile(d["manifest"]):
        raise ConfigError(f"[dataset] manifest not found: {d['manifest']}")
    dataset = DatasetSection(**d)

    m = v["model"]
    if m["preset"] not in PRESETS:
        raise ConfigError(f"[model] preset must be one of {PRESETS}, got {m['preset']!r}")
    expected = 2 if d["task"] == "binary" else len(ODIR_CLASSES)
    if m["num_classes"] != expected:
        raise ConfigError(f"[model] num_classes = {m['num_classes']} but the {d['task']} task has {expected} classes")
    model = ModelSection(**m)

    p = v["preprocess"]
    if len(p["resize"]) != 2:
        raise ConfigError("[preprocess] resize needs two integers (height, width)")
    try:
        aug = AugmentConfig(p["rotate_deg_max"], tuple(p["zoom_range"]), p["hflip_prob"])
        pre = PreprocessConfig(tuple(p["resize"]), p["equalize"], p["blur_sigma"], p["normalize01"], aug, p["seed"])
        t = v["train"]
        train = TrainConfig(
            optimizer=t["optimizer"],
            base_lr=t["base_lr"],
            beta1=t["beta1"],
            beta2=t["beta2"],
            adam_eps=t["adam_eps"],
            batch_size=t["batch_size"],
            epochs=t["epochs"],
            lr_schedule=t["lr_schedule"],
            halving_period=t["halving_period"],
            plateau=PlateauConfig(t["plateau"], t["plateau_factor"], t["plateau_patience"], t["plateau_min_delta"]),
            early_stop=EarlyStopConfig(t["early_stop"], t["early_stop_patience"], t["early_stop_min_delta"]),
            monitor=t["monitor"],
            seed=t["seed"],
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None

    o = v["output"]
    if o["eval_split"] not in SPLITS:
        raise ConfigError(f"[output] eval_split must be one of {SPLITS}")
    f = v["finetune"]
    if not f["freeze"]:
        raise ConfigError("[finetune] freeze is empty")
    return RunConfig(dataset, pre, p["augment"], model, train, FinetuneSection(**f), OutputSection(**o), text)


def load_config(path, check_files: bool = True) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, check_files)


def default_config_text() -> str:
    """A complete config listing every key at its default."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {default}" for k, (_, default) in keys.items()]
        lines.append("")
    return "\n".join(lines)
