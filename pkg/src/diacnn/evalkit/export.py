"""CSV and SVG emitters for evaluation artifacts."""

from __future__ import annotations

import csv
import io
from typing import Mapping, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from diacnn.evalkit.confusion import REPORT_COLUMNS, ClassificationReport, ConfusionMatrix, Metrics
from diacnn.evalkit.roc import RocCurve, auc

UNDEFINED = "undefined"


def _fmt(v: Optional[float]) -> str:
    return UNDEFINED if v is None else repr(float(v))


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def metrics_csv(m: Metrics, auc_value: Optional[float] = None) -> str:
    rows = [("metric", "value")] + [(k, _fmt(v)) for k, v in m.as_dict().items()]
    if auc_value is not None:
        rows.append(("auc", _fmt(auc_value)))
    return _csv(rows)


def confusion_csv(cm: ConfusionMatrix) -> str:
    return _csv(
        [
            ("", "Actually positive", "Actually negative"),
            ("Predicted positive", cm.tp, cm.fp),
            ("Predicted negative", cm.fn, cm.tn),
        ]
    )


def multiclass_confusion_csv(preds: Sequence[int], labels: Sequence[int], class_names: Sequence[str]) -> str:
    """K x K counts in the same orientation: rows predicted, columns actual."""
    p, y = np.asarray(preds), np.asarray(labels)
    rows = [("",) + tuple(f"Actually {c}" for c in class_names)]
    for i, name in enumerate(class_names):
        rows.append((f"Predicted {name}",) + tuple(int(np.sum((p == i) & (y == j))) for j in range(len(class_names))))
    return _csv(rows)


def read_confusion_csv(text: str) -> ConfusionMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    return ConfusionMatrix(int(rows[1][1]), int(rows[1][2]), int(rows[2][1]), int(rows[2][2]))


def report_csv(rep: ClassificationReport) -> str:
    rows = [REPORT_COLUMNS]
    for name, rec, prec, f1, sup in rep.rows():
        rows.append((name, "" if rec is None else repr(rec), "" if prec is None else repr(prec), repr(f1), sup))
    return _csv(rows)


def roc_csv(curves: Mapping[int, RocCurve]) -> str:
    """One block of rows per positive class (binary runs use class 1)."""
    rows = [("class", "threshold", "fpr", "tpr")]
    for k, c in curves.items():
        rows += [(k, repr(float(t)), repr(float(f)), repr(float(p))) for t, f, p in zip(c.thresholds, c.fpr, c.tpr)]
    return _csv(rows)


def read_roc_csv(text: str) -> dict[int, RocCurve]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or set(reader.fieldnames) != {"class", "threshold", "fpr", "tpr"}:
        raise ValueError("roc.csv header must be class,threshold,fpr,tpr")
    cols: dict[int, list[tuple[float, float, float]]] = {}
    for r in reader:
        cols.setdefault(int(r["class"]), []).append((float(r["fpr"]), float(r["tpr"]), float(r["threshold"])))
    return {k: RocCurve(*(np.array(c) for c in zip(*v))) for k, v in cols.items()}


def embedding_csv(coords: np.ndarray, labels: Sequence[int]) -> str:
    rows = [("x", "y", "label")] + [(repr(float(a)), repr(float(b)), int(c)) for (a, b), c in zip(coords, labels)]
    return _csv(rows)


def features_csv(features: np.ndarray, labels: Sequence[int]) -> str:
    d = features.shape[1]
    rows = [("label",) + tuple(f"f{i}" for i in range(d))]
    rows += [(int(lab),) + tuple(repr(float(v)) for v in row) for row, lab in zip(features, labels)]
    return _csv(rows)


def read_features_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))[1:]
    labels = np.array([int(r[0]) for r in rows], dtype=np.int64)
    feats = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
    return feats, labels


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


class _Plot:
    W, H, M = 480, 360, 50

    def __init__(self, xlim, ylim, title: str, xlabel: str, ylabel: str):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.W}" height="{self.H}">',
            f'<rect x="0" y="0" width="{self.W}" height="{self.H}" fill="white"/>',
            f'<text x="{self.W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{self.W / 2}" y="{self.H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="14" y="{self.H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {self.H / 2})">{escape(ylabel)}</text>',
        ]
        m = self.M
        self.parts.append(
            f'<polyline points="{m},{m} {m},{self.H - m} {self.W - m},{self.H - m}" fill="none" stroke="black"/>'
        )
        for frac in (0.0, 0.5, 1.0):
            xv = self.x0 + frac * (self.x1 - self.x0)
            yv = self.y0 + frac * (self.y1 - self.y0)
            px, py = self.px(xv), self.py(yv)
            self.parts.append(f'<text x="{px:.1f}" y="{self.H - m + 16}" text-anchor="middle" font-size="10">{xv:.3g}</text>')
            self.parts.append(f'<text x="{m - 6}" y="{py + 3:.1f}" text-anchor="end" font-size="10">{yv:.3g}</text>')

    def px(self, x: float) -> float:
        return self.M + (x - self.x0) / (self.x1 - self.x0) * (self.W - 2 * self.M)

    def py(self, y: float) -> float:
        return self.H - self.M - (y - self.y0) / (self.y1 - self.y0) * (self.H - 2 * self.M)

    def line(self, xs, ys, color: str, label: Optional[str] = None, dashed: bool = False, slot: int = 0):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys))
        dash = ' stroke-dasharray="4,3"' if dashed else ""
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if label:
            y = self.M + 14 * slot
            self.parts.append(f'<text x="{self.W - self.M - 4}" y="{y}" text-anchor="end" font-size="10" fill="{color}">{escape(label)}</text>')

    def dots(self, xs, ys, color: str):
        for x, y in zip(xs, ys):
            self.parts.append(f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" r="2" fill="{color}"/>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def training_curve_svg(history) -> str:
    epochs = history.column("epoch")
    plot = _Plot((min(epochs), max(epochs)), (0.0, 1.0), "Training progress", "epoch", "accuracy")
    plot.line(epochs, history.column("train_acc"), _PALETTE[0], "train accuracy", slot=0)
    plot.line(epochs, history.column("val_acc"), _PALETTE[1], "validation accuracy", slot=1)
    return plot.render()


def roc_svg(curves: Mapping[int, RocCurve], class_names: Optional[Sequence[str]] = None) -> str:
    """Polyline per curve with its AUC in the legend, over the chance diagonal."""
    plot = _Plot((0.0, 1.0), (0.0, 1.0), "ROC curve", "false positive rate", "true positive rate")
    plot.line([0, 1], [0, 1], "#999999", dashed=True)
    for slot, (k, c) in enumerate(curves.items()):
        name = class_names[k] if class_names is not None and k < len(class_names) else f"class {k}"
        plot.line(c.fpr, c.tpr, _PALETTE[slot % len(_PALETTE)], f"{name} (AUC = {auc(c):.3f})", slot=slot)
    return plot.render()


def embedding_svg(coords: np.ndarray, labels: Sequence[int]) -> str:
    xs, ys = coords[:, 0], coords[:, 1]
    plot = _Plot((float(xs.min()), float(xs.max())), (float(ys.min()), float(ys.max())), "t-SNE of penultimate features", "dim 1", "dim 2")
    labels = np.asarray(labels)
    for k in np.unique(labels):
        sel = labels == k
        plot.dots(xs[sel], ys[sel], _PALETTE[int(k) % len(_PALETTE)])
    return plot.render()
