"""Per-image manifests, deterministic splitting and binary task selection."""

from __future__ import annotations

import csv
import io
import math
import os
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from diacnn.datapipe.prng import XorShift64Star, derive_seed

ODIR_CLASSES = ("N", "D", "G", "C", "A", "H", "M", "O")
ODIR_CLASS_NAMES = {
    "N": "Normal",
    "D": "Diabetes",
    "G": "Glaucoma",
    "C": "Cataract",
    "A": "Age-related macular degeneration",
    "H": "Hypertension",
    "M": "Myopia",
    "O": "Other diseases",
}
# per-class image counts of the ODIR release used for the experiments
ODIR_COUNTS = {"N": 1135, "D": 1131, "G": 207, "C": 211, "A": 171, "H": 94, "M": 177, "O": 944}

EYES = ("left", "right", "unknown")
SPLITS = ("train", "val", "test")
UNASSIGNED = "unassigned"
REQUIRED_COLUMNS = ("image_path", "eye", "label")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    image_path: str
    eye: str
    label: int
    split: str = UNASSIGNED
    source_label: Optional[str] = None

    def __post_init__(self):
        if not self.image_path:
            raise ValueError("image_path must be non-empty")
        if self.eye not in EYES:
            raise ValueError(f"eye must be one of {EYES}, got {self.eye!r}")
        if self.split not in SPLITS + (UNASSIGNED,):
            raise ValueError(f"unknown split {self.split!r}")


@dataclass
class Dataset:
    samples: list[Sample]
    class_names: tuple[str, ...] = ODIR_CLASSES
    root: str = ""
    counts: dict[str, int] = field(init=False)

    def __post_init__(self):
        k = len(self.class_names)
        for s in self.samples:
            if not 0 <= s.label < k:
                raise ValueError(f"label {s.label} outside {self.class_names}")
        tally = Counter(s.label for s in self.samples)
        self.counts = {name: tally.get(i, 0) for i, name in enumerate(self.class_names)}

    def __len__(self) -> int:
        return len(self.samples)

    def split_counts(self, split: str) -> dict[str, int]:
        tally = Counter(s.label for s in self.samples if s.split == split)
        return {name: tally.get(i, 0) for i, name in enumerate(self.class_names)}

    def subset(self, split: str) -> list[Sample]:
        return [s for s in self.samples if s.split == split]

    def labels(self, split: Optional[str] = None) -> list[int]:
        return [s.label for s in self.samples if split is None or s.split == split]

    def resolve(self, sample: Sample) -> str:
        if os.path.isabs(sample.image_path) or not self.root:
            return sample.image_path
        return os.path.join(self.root, sample.image_path)


def parse_manifest(text: str, root: str = "", class_names: Sequence[str] = ODIR_CLASSES) -> Dataset:
    rows = list(csv.reader(io.StringIO(text), quoting=csv.QUOTE_NONE))
    rows = [r for r in rows if r]
    if not rows:
        raise ManifestError("empty manifest")
    header = [h.strip() for h in rows[0]]
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise ManifestError(f"missing column {col!r}")
    pos = {h: i for i, h in enumerate(header)}
    lookup = {name: i for i, name in enumerate(class_names)}
    samples = []
    for rowno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ManifestError(f"row {rowno}: expected {len(header)} fields, got {len(row)} (commas in paths are not supported)")
        token = row[pos["label"]].strip()
        if token not in lookup:
            raise ManifestError(f"row {rowno}: unknown class token {token!r}")
        split = row[pos["split"]].strip() if "split" in pos else UNASSIGNED
        try:
            samples.append(
                Sample(row[pos["image_path"]].strip(), row[pos["eye"]].strip() or "unknown", lookup[token], split or UNASSIGNED)
            )
        except ValueError as exc:
            raise ManifestError(f"row {rowno}: {exc}") from None
    return Dataset(samples, tuple(class_names), root)


def load_manifest(csv_path, class_names: Sequence[str] = ODIR_CLASSES) -> Dataset:
    """Read ``image_path,eye,label[,split]``; relative paths resolve against the file's directory."""
    try:
        with open(csv_path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {csv_path}: {exc}") from None
    return parse_manifest(text, os.path.dirname(os.path.abspath(csv_path)), class_names)


def format_manifest(ds: Dataset, with_split: bool = True) -> str:
    out = io.StringIO()
    cols = list(REQUIRED_COLUMNS) + (["split"] if with_split else [])
    out.write(",".join(cols) + "\n")
    for s in ds.samples:
        if "," in s.image_path:
            raise ManifestError(f"path contains a comma: {s.image_path!r}")
        vals = [s.image_path, s.eye, ds.class_names[s.label]] + ([s.split] if with_split else [])
        out.write(",".join(vals) + "\n")
    return out.getvalue()


def write_manifest(ds: Dataset, path, with_split: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_manifest(ds, with_split))


def split_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    """Floor each share, then hand the remainder out by largest fractional part (ties: lower index)."""
    raw = [r * n for r in ratios]
    base = [int(math.floor(v + 1e-9)) for v in raw]
    frac = [v - b for v, b in zip(raw, base)]
    order = sorted(range(len(ratios)), key=lambda i: (-round(frac[i], 9), i))
    for i in order[: n - sum(base)]:
        base[i] += 1
    return base


def split_dataset(
    ds: Dataset, ratios: Sequence[float] = (0.8, 0.1, 0.1), seed: int = 0, stratify: bool = True
) -> Dataset:
    """Assign every sample to train/val/test.

    Sizes follow :func:`split_sizes`. Each class (or the whole set when
    ``stratify`` is false) is shuffled with the seeded xorshift64* generator
    and cut in train, val, test order.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise ValueError(f"ratios must be three nonnegative numbers summing to 1, got {ratios}")
    assign = [UNASSIGNED] * len(ds.samples)
    if stratify:
        needed = sum(1 for r in ratios if r > 0)
        groups = []
        for c in range(len(ds.class_names)):
            idx = [i for i, s in enumerate(ds.samples) if s.label == c]
            if idx and len(idx) < needed:
                raise ValueError(f"class {ds.class_names[c]!r} has {len(idx)} samples, fewer than {needed} splits")
            groups.append((c, idx))
    else:
        groups = [(0, list(range(len(ds.samples))))]
    for key, idx in groups:
        if not idx:
            continue
        perm = XorShift64Star(derive_seed(seed, key)).permutation(len(idx))
        sizes = split_sizes(len(idx), ratios)
        pos = 0
        for name, size in zip(SPLITS, sizes):
            for j in perm[pos : pos + size]:
                assign[idx[j]] = name
            pos += size
    samples = [replace(s, split=a) for s, a in zip(ds.samples, assign)]
    return Dataset(samples, ds.class_names, ds.root)


def binary_task_filter(ds: Dataset, positive_classes: Iterable[str], negative_classes: Iterable[str]) -> Dataset:
    """Keep samples in either class set; positives become label 1, negatives 0."""
    pos, neg = set(positive_classes), set(negative_classes)
    if not pos or not neg:
        raise ValueError("positive and negative class sets must be nonempty")
    if pos & neg:
        raise ValueError(f"class sets overlap: {sorted(pos & neg)}")
    unknown = (pos | neg) - set(ds.class_names)
    if unknown:
        raise ValueError(f"unknown classes {sorted(unknown)}")
    out = []
    for s in ds.samples:
        token = ds.class_names[s.label]
        if token in pos:
            out.append(replace(s, label=1, source_label=token))
        elif token in neg:
            out.append(replace(s, label=0, source_label=token))
    return Dataset(out, ("negative", "positive"), ds.root)
