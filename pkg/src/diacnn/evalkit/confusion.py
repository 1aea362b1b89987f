"""Confusion counts, percentage metrics and per-class reports."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary confusion counts; rows are predictions, columns ground truth."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_table(self) -> list[list[int]]:
        """[[tp, fp], [fn, tn]]: predicted positive/negative x actually positive/negative."""
        return [[self.tp, self.fp], [self.fn, self.tn]]


def confusion_matrix(preds: Sequence, labels: Sequence, positive_class=1) -> ConfusionMatrix:
    p = np.asarray(preds)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.size} predictions, {y.size} labels")
    pp = p == positive_class
    yp = y == positive_class
    return ConfusionMatrix(
        tp=int(np.sum(pp & yp)),
        fp=int(np.sum(pp & ~yp)),
        fn=int(np.sum(~pp & yp)),
        tn=int(np.sum(~pp & ~yp)),
    )


@dataclass(frozen=True)
class Metrics:
    """Percentages in [0, 100]; ``None`` marks a metric whose denominator is zero."""

    sen: Optional[float]
    spec: Optional[float]
    acc: Optional[float]
    preci: Optional[float]
    f1: Optional[float]

    def as_dict(self) -> dict[str, Optional[float]]:
        return {"sen": self.sen, "spec": self.spec, "acc": self.acc, "preci": self.preci, "f1": self.f1}


def _ratio(num: float, den: float) -> Optional[float]:
    return None if den == 0 else 100.0 * num / den


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Sensitivity, specificity, accuracy, precision and F1 = tp / (tp + (fp + fn) / 2)."""
    return Metrics(
        sen=_ratio(cm.tp, cm.tp + cm.fn),
        spec=_ratio(cm.tn, cm.tn + cm.fp),
        acc=_ratio(cm.tp + cm.tn, cm.total),
        preci=_ratio(cm.tp, cm.tp + cm.fp),
        f1=_ratio(cm.tp, cm.tp + 0.5 * (cm.fp + cm.fn)),
    )


def multiclass_metrics(preds: Sequence[int], labels: Sequence[int], num_classes: int) -> Metrics:
    """One-vs-rest metrics averaged over classes (undefined classes skipped); accuracy is pooled."""
    p = np.asarray(preds)
    y = np.asarray(labels)
    per = [metrics(confusion_matrix(p, y, k)) for k in range(num_classes)]

    def mean(attr):
        vals = [getattr(m, attr) for m in per if getattr(m, attr) is not None]
        return float(np.mean(vals)) if vals else None

    acc = _ratio(int(np.sum(p == y)), len(y))
    return Metrics(mean("sen"), mean("spec"), acc, mean("preci"), mean("f1"))


@dataclass(frozen=True)
class ClassReport:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    """Per-class rows plus accuracy and macro / support-weighted averages, as fractions.

    A per-class precision or recall with a zero denominator is reported as 0.
    """

    class_names: tuple[str, ...]
    per_class: tuple[ClassReport, ...]
    accuracy: float
    macro: ClassReport
    weighted: ClassReport

    def rows(self) -> list[tuple[str, Optional[float], Optional[float], float, int]]:
        """(label, Recall, Precision, F1 score, Support) in table order."""
        out = [(n, r.recall, r.precision, r.f1, r.support) for n, r in zip(self.class_names, self.per_class)]
        total = sum(r.support for r in self.per_class)
        out.append(("Accuracy", None, None, self.accuracy, total))
        out.append(("Macro avg.", self.macro.recall, self.macro.precision, self.macro.f1, self.macro.support))
        out.append(("Weighted avg.", self.weighted.recall, self.weighted.precision, self.weighted.f1, self.weighted.support))
        return out


REPORT_COLUMNS = ("", "Recall", "Precision", "F1 score", "Support")


def classification_report(preds: Sequence[int], labels: Sequence[int], class_names: Sequence[str]) -> ClassificationReport:
    p = np.asarray(preds)
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("empty input")
    if p.shape != y.shape:
        raise ValueError("length mismatch")
    k = len(class_names)
    if y.min() < 0 or y.max() >= k:
        raise ValueError(f"labels outside class set of size {k}")
    rows = []
    for c in range(k):
        cm = confusion_matrix(p, y, c)
        prec = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
        rec = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
        den = cm.tp + 0.5 * (cm.fp + cm.fn)
        f1 = cm.tp / den if den else 0.0
        rows.append(ClassReport(prec, rec, f1, cm.tp + cm.fn))
    n = len(y)
    sup = np.array([r.support for r in rows], dtype=np.float64)

    def avg(attr, weights):
        vals = np.array([getattr(r, attr) for r in rows])
        return float(np.sum(vals * weights) / np.sum(weights))

    eq = np.ones(k)
    macro = ClassReport(avg("precision", eq), avg("recall", eq), avg("f1", eq), n)
    weighted = ClassReport(avg("precision", sup), avg("recall", sup), avg("f1", sup), n)
    return ClassificationReport(tuple(class_names), tuple(rows), float(np.mean(p == y)), macro, weighted)
