"""ROC curves and trapezoidal AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # thresholds[0] is +inf; point i classifies score >= thresholds[i] as positive

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(scores, labels) -> RocCurve:
    """Sweep thresholds over the distinct scores, highest first; ties form one point."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    # last index of each run of equal scores
    last = np.r_[np.nonzero(np.diff(s_sorted))[0], s.size - 1]
    tps = np.cumsum(y_sorted)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    thr = np.r_[np.inf, s_sorted[last]]
    return RocCurve(fpr, tpr, thr)


def auc(curve: RocCurve) -> float:
    f, t = curve.fpr, curve.tpr
    return float(np.sum(np.diff(f) * (t[1:] + t[:-1]) * 0.5))


def ovr_roc(probs, labels, class_k: int) -> RocCurve:
    """Binary ROC for ``class_k`` versus the rest, scored by ``probs[:, class_k]``."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels)
    if p.ndim != 2 or p.shape[1] < 2:
        raise ValueError("probs must be N x K with K >= 2")
    if not np.any(y == class_k):
        raise ValueError(f"class {class_k} absent from labels")
    return roc_curve(p[:, class_k], y == class_k)
