"""``diacnn`` command line: prepare, train, evaluate, finetune, report.

Exit codes: 0 success, 2 usage or input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import shlex
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from diacnn.cli.config import ConfigError, RunConfig, load_config
from diacnn.datapipe.image import ImageDecodeError
from diacnn.datapipe.loader import ImageSplits
from diacnn.datapipe.manifest import (
    SPLITS,
    UNASSIGNED,
    Dataset,
    ManifestError,
    binary_task_filter,
    load_manifest,
    split_dataset,
    write_manifest,
)
from diacnn.datapipe.synthetic import write_dataset
from diacnn.evalkit import export
from diacnn.evalkit.confusion import classification_report, confusion_matrix, metrics, multiclass_metrics
from diacnn.evalkit.roc import auc, ovr_roc
from diacnn.evalkit.tsne import PerplexityError, tsne
from diacnn.netgraph.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from diacnn.netgraph.freeze import FREEZE_PRESETS, set_trainable
from diacnn.netgraph.graph import ModelSpec
from diacnn.netgraph.models import build_model
from diacnn.netgraph.params import ParamStore, init_params
from diacnn.trainer.loop import DivergenceError, History, evaluate, train_loop

log = logging.getLogger("diacnn")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
ARTIFACT_MANIFEST = "artifacts.sha256"
CONFIG_SNAPSHOT = "config.cfg"
INVOCATION = "invocation.txt"


class UsageError(Exception):
    """Bad arguments or inputs; maps to exit code 2."""


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def write_artifact_manifest(out_dir: str) -> str:
    """``sha256sum``-style listing of every regular file in ``out_dir``."""
    lines = []
    for name in sorted(os.listdir(out_dir)):
        p = os.path.join(out_dir, name)
        if name == ARTIFACT_MANIFEST or not os.path.isfile(p):
            continue
        with open(p, "rb") as fh:
            lines.append(f"{hashlib.sha256(fh.read()).hexdigest()}  {name}\n")
    path = os.path.join(out_dir, ARTIFACT_MANIFEST)
    _write_text(path, "".join(lines))
    return path


class _RunLog:
    """Attach a ``run.log`` file handler to the package logger for one command."""

    def __init__(self, out_dir: str):
        self.path = os.path.join(out_dir, "run.log")
        self.handler: Optional[logging.Handler] = None

    def __enter__(self):
        self.handler = logging.FileHandler(self.path, mode="w", encoding="utf-8")
        self.handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        log.addHandler(self.handler)
        log.setLevel(logging.INFO)
        return self

    def __exit__(self, *exc):
        log.removeHandler(self.handler)
        self.handler.close()


def load_run_config(args) -> RunConfig:
    if not args.config:
        raise UsageError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out:
        cfg = cfg.with_output(args.out)
    return cfg


def load_dataset(cfg: RunConfig, manifest: Optional[str] = None) -> Dataset:
    d = cfg.dataset
    ds = load_manifest(manifest or d.manifest)
    if d.task == "binary":
        ds = binary_task_filter(ds, d.positive, d.negative)
    if d.split_source == "seeded":
        ds = split_dataset(ds, d.ratios, d.seed, d.stratify)
    elif any(s.split == UNASSIGNED for s in ds.samples):
        raise UsageError("split_source = manifest but some rows have no split")
    for s in ds.samples[:1]:
        path = ds.resolve(s)
        if not os.path.isfile(path):
            raise UsageError(f"image file not found: {path}")
    return ds


def model_for(cfg: RunConfig) -> ModelSpec:
    m = cfg.model
    return build_model(m.preset, m.num_classes, m.net_width, tuple(cfg.preprocess.resize_hw))


def check_compatible(model: ModelSpec, cfg: RunConfig, strict: bool) -> None:
    """Reject a checkpoint whose architecture does not fit the configured data."""
    hw = tuple(cfg.preprocess.resize_hw)
    if tuple(model.input_shape[1:]) != hw:
        raise UsageError(f"checkpoint expects {model.input_shape[1]}x{model.input_shape[2]} inputs, config resizes to {hw[0]}x{hw[1]}")
    if model.num_classes != cfg.model.num_classes:
        raise UsageError(f"checkpoint has {model.num_classes} classes, config task has {cfg.model.num_classes}")
    if strict and model.to_dict() != model_for(cfg).to_dict():
        raise UsageError("checkpoint architecture differs from the configured model")


def _load_ckpt(path: str):
    if not os.path.isfile(path):
        raise UsageError(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path)
    except ValueError as e:  # CheckpointError or a parameter/spec mismatch
        raise UsageError(f"cannot load checkpoint {path}: {e}") from None


def _splits(cfg: RunConfig, ds: Dataset) -> ImageSplits:
    return ImageSplits(ds, cfg.preprocess, cfg.train.batch_size, cfg.train.seed, cfg.augment)


def write_evaluation(model: ModelSpec, params: ParamStore, data, split: str, class_names, out_dir: str) -> dict:
    """Evaluate one split and write metrics, confusion, report, ROC and feature CSVs."""
    ev = evaluate(model, params, data.batches(split, 0, shuffle=False))
    preds = ev.probs.argmax(axis=1)
    k = ev.probs.shape[1]
    if k == 2:
        m = metrics(confusion_matrix(preds, ev.labels, 1))
        cm_text = export.confusion_csv(confusion_matrix(preds, ev.labels, 1))
    else:
        m = multiclass_metrics(preds, ev.labels, k)
        cm_text = export.multiclass_confusion_csv(preds, ev.labels, class_names)
    present = [c for c in (range(1, 2) if k == 2 else range(k)) if np.any(ev.labels == c) and not np.all(ev.labels == c)]
    curves = {c: ovr_roc(ev.probs, ev.labels, c) for c in present}
    auc_value = float(np.mean([auc(c) for c in curves.values()])) if curves else None
    report = classification_report(preds, ev.labels, class_names)
    _write_text(os.path.join(out_dir, "metrics.csv"), export.metrics_csv(m, auc_value))
    _write_text(os.path.join(out_dir, "confusion.csv"), cm_text)
    _write_text(os.path.join(out_dir, "report.csv"), export.report_csv(report))
    _write_text(os.path.join(out_dir, "roc.csv"), export.roc_csv(curves))
    _write_text(os.path.join(out_dir, "features.csv"), export.features_csv(ev.features, ev.labels))
    log.info("evaluated %s split (%d samples): acc %.2f%% auc %s", split, len(ev.labels), m.acc, auc_value)
    return {"metrics": m, "auc": auc_value, "evaluation": ev}


def _history_logger(rec) -> None:
    print(
        f"epoch {rec.epoch:3d}  lr {rec.lr:.3g}  train_loss {rec.train_loss:.4f}  train_acc {rec.train_acc:.4f}"
        f"  val_loss {rec.val_loss:.4f}  val_acc {rec.val_acc:.4f}",
        file=sys.stderr,
    )


def _train_and_write(cfg: RunConfig, args, model, params, ds, initial_best=None, frozen=None):
    out = cfg.output.dir
    data = _splits(cfg, ds)
    if data.size(cfg.output.eval_split) == 0:
        raise UsageError(f"evaluation split {cfg.output.eval_split!r} is empty")
    before = params.checksum(frozen) if frozen else None
    with threadpool_limits(1):
        result = train_loop(
            model, params, data, cfg.train,
            checkpoint_path=os.path.join(out, "best.ckpt"),
            on_epoch=None if args.quiet else _history_logger,
            initial_best=initial_best,
        )
        save_checkpoint(model, result.params, os.path.join(out, "final.ckpt"))
        _write_text(os.path.join(out, "history.csv"), result.history.to_csv())
        log.info("best epoch %d", result.best_epoch)
        if frozen:
            after = result.params.checksum(frozen)
            log.info("frozen checksum before %s after %s", before, after)
            if before != after:
                raise RuntimeError("frozen parameters changed during fine-tuning")
        write_evaluation(model, result.best_params, data, cfg.output.eval_split, ds.class_names, out)
    return result


def _start_run(cfg: RunConfig, args) -> None:
    """Snapshot the config bytes plus the command line, whose flags may override it."""
    os.makedirs(cfg.output.dir, exist_ok=True)
    with open(args.config, "rb") as src, open(os.path.join(cfg.output.dir, CONFIG_SNAPSHOT), "wb") as dst:
        dst.write(src.read())
    _write_text(os.path.join(cfg.output.dir, INVOCATION), "diacnn " + shlex.join(args.argv) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_prepare(args) -> int:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    if args.synthetic:
        sizes = tuple(int(v) for v in args.sizes.split(","))
        if len(sizes) != 3:
            raise UsageError("--sizes needs three integers (train, val, test)")
        seed = 0 if args.seed is None else args.seed
        path = write_dataset(out, *sizes, seed=seed, size=args.image_size)
        print(path)
        return EXIT_OK
    ratios, stratify, seed, manifest = (0.8, 0.1, 0.1), True, 0, args.manifest
    if args.config:
        cfg = load_config(args.config, check_files=False)
        ratios, stratify, seed = cfg.dataset.ratios, cfg.dataset.stratify, cfg.dataset.seed
        manifest = manifest or cfg.dataset.manifest
    if manifest is None:
        raise UsageError("prepare needs a manifest (positional argument or [dataset] manifest)")
    if args.ratios:
        ratios = tuple(float(v) for v in args.ratios.split(","))
    if args.no_stratify:
        stratify = False
    if args.seed is not None:
        seed = args.seed
    ds = load_manifest(manifest)
    try:
        ds = split_dataset(ds, ratios, seed, stratify)
    except ValueError as e:
        raise UsageError(str(e)) from None
    # re-anchor relative paths on the output directory
    out_abs = os.path.abspath(out)
    samples = [
        replace(s, image_path=os.path.relpath(os.path.abspath(ds.resolve(s)), out_abs))
        if not os.path.isabs(s.image_path)
        else s
        for s in ds.samples
    ]
    path = os.path.join(out, "manifest.csv")
    write_manifest(Dataset(samples, ds.class_names, out_abs), path)
    counts = {name: sum(1 for s in samples if s.split == name) for name in SPLITS}
    print(f"{path}: " + ", ".join(f"{k} {v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_run_config(args)
    ds = load_dataset(cfg)
    model = model_for(cfg)
    params = init_params(model, cfg.train.seed)
    _start_run(cfg, args)
    with _RunLog(cfg.output.dir):
        log.info("train %s: %d parameters, %d samples", model.preset, params.count(), len(ds))
        _train_and_write(cfg, args, model, params, ds)
    write_artifact_manifest(cfg.output.dir)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_run_config(args)
    ckpt = _load_ckpt(args.checkpoint)
    check_compatible(ckpt.model, cfg, strict=True)
    ds = load_dataset(cfg, args.manifest)
    split = args.split or cfg.output.eval_split
    data = _splits(cfg, ds)
    if data.size(split) == 0:
        raise UsageError(f"split {split!r} is empty")
    os.makedirs(cfg.output.dir, exist_ok=True)
    with _RunLog(cfg.output.dir), threadpool_limits(1):
        res = write_evaluation(ckpt.model, ckpt.params, data, split, ds.class_names, cfg.output.dir)
    m = res["metrics"]
    print(" ".join(f"{k} {'undefined' if v is None else f'{v:.2f}'}" for k, v in m.as_dict().items()))
    write_artifact_manifest(cfg.output.dir)
    return EXIT_OK


def reinit_head(model: ModelSpec, params: ParamStore, seed: int) -> None:
    fresh = init_params(model, seed)
    for layer in model.meta.get("head", []):
        for name in params.names():
            if name.startswith(layer + "."):
                params[name].data[...] = fresh[name].data


def cmd_finetune(args) -> int:
    cfg = load_run_config(args)
    ckpt = _load_ckpt(args.checkpoint)
    check_compatible(ckpt.model, cfg, strict=False)
    model, params = ckpt.model, ckpt.params
    selector = args.freeze.split(",") if args.freeze else list(cfg.finetune.freeze)
    selector = selector[0] if len(selector) == 1 else selector
    try:
        if isinstance(selector, list) or selector not in FREEZE_PRESETS:
            # explicit prefixes stay trainable; everything else is frozen
            set_trainable(params, "all", False)
        set_trainable(params, selector, True, model)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.reinit_head or cfg.finetune.reinit_head:
        reinit_head(model, params, cfg.train.seed)
    frozen = [k for k in params.names() if not params.is_trainable(k)]
    ds = load_dataset(cfg)
    _start_run(cfg, args)
    with _RunLog(cfg.output.dir):
        log.info("finetune %s with %r: %d trainable, %d frozen tensors", model.preset, selector, len(params.trainable_names()), len(frozen))
        initial = None
        if not (args.reinit_head or cfg.finetune.reinit_head) and cfg.train.monitor.startswith("val_"):
            with threadpool_limits(1):
                ev = evaluate(model, params, _splits(cfg, ds).batches("val", 0, shuffle=False))
            initial = ev.acc if cfg.train.monitor == "val_acc" else ev.loss
            log.info("starting %s %.6g", cfg.train.monitor, initial)
        _train_and_write(cfg, args, model, params, ds, initial_best=initial, frozen=frozen)
    write_artifact_manifest(cfg.output.dir)
    return EXIT_OK


def cmd_report(args) -> int:
    run = args.run_dir
    out = args.out or run
    needed = ("history.csv", "roc.csv", "features.csv")
    for name in needed:
        if not os.path.isfile(os.path.join(run, name)):
            raise UsageError(f"missing artifact {name} in {run}")
    os.makedirs(out, exist_ok=True)
    try:
        history = History.from_csv(_read_text(os.path.join(run, "history.csv")))
        curves = export.read_roc_csv(_read_text(os.path.join(run, "roc.csv")))
        feats, labels = export.read_features_csv(_read_text(os.path.join(run, "features.csv")))
    except (ValueError, KeyError) as e:
        raise UsageError(f"malformed artifact: {e}") from None
    if len(history) == 0:
        raise UsageError("history.csv has no epochs")
    n = len(labels)
    perplexity = args.perplexity if args.perplexity else min(30.0, (n - 1) / 3.0)
    seed = 0 if args.seed is None else args.seed
    emb = tsne(feats, perplexity=perplexity, iters=args.tsne_iters, seed=seed)
    _write_text(os.path.join(out, "training_curve.svg"), export.training_curve_svg(history))
    _write_text(os.path.join(out, "roc.svg"), export.roc_svg(curves))
    _write_text(os.path.join(out, "tsne.svg"), export.embedding_svg(emb.coords, labels))
    _write_text(os.path.join(out, "tsne.csv"), export.embedding_csv(emb.coords, labels))
    print(f"report written to {out} (t-SNE KL {emb.kl:.4f})")
    write_artifact_manifest(out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run configuration (INI)")
    common.add_argument("--seed", type=int, metavar="N", help="override every seed in the config")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
    common.add_argument("--quiet", action="store_true", help="no per-epoch progress on stderr")

    p = argparse.ArgumentParser(prog="diacnn", description="DiaCNN / Inception fundus classification toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("prepare", parents=[common], help="assign train/val/test splits or write a synthetic dataset")
    sp.add_argument("manifest", nargs="?", help="input manifest CSV")
    sp.add_argument("--ratios", help="train,val,test fractions (default 0.8,0.1,0.1)")
    sp.add_argument("--no-stratify", action="store_true")
    sp.add_argument("--synthetic", action="store_true", help="write the seeded bar-pattern dataset instead")
    sp.add_argument("--sizes", default="200,50,50", help="synthetic train,val,test sizes")
    sp.add_argument("--image-size", type=int, default=32)
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("train", parents=[common], help="train a model from scratch")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", parents=[common], help="score a checkpoint on one split")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--manifest", help="override [dataset] manifest")
    sp.add_argument("--split", choices=SPLITS, help="default: [output] eval_split")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("finetune", parents=[common], help="fine-tune a checkpoint with frozen layers")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--freeze", help="head_only | last_block | all | comma-separated prefixes to keep trainable")
    sp.add_argument("--reinit-head", action="store_true", help="re-initialize the classification head first")
    sp.set_defaults(func=cmd_finetune)

    sp = sub.add_parser("report", parents=[common], help="render SVG plots and t-SNE from a run directory")
    sp.add_argument("run_dir")
    sp.add_argument("--perplexity", type=float, help="default: min(30, (n - 1) / 3)")
    sp.add_argument("--tsne-iters", type=int, default=1000)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except (UsageError, ConfigError, ManifestError, ImageDecodeError, CheckpointError, PerplexityError, FileNotFoundError) as e:
        print(f"diacnn {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, FloatingPointError) as e:
        print(f"diacnn {args.command}: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
