"""Confusion-matrix metrics, classification reports, ROC/AUC and t-SNE."""

from diacnn.evalkit.confusion import (
    ClassificationReport,
    ClassReport,
    ConfusionMatrix,
    Metrics,
    classification_report,
    confusion_matrix,
    metrics,
    multiclass_metrics,
)
from diacnn.evalkit.roc import RocCurve, auc, ovr_roc, roc_curve
from diacnn.evalkit.tsne import Embedding2D, PerplexityError, tsne

__all__ = [
    "ClassReport",
    "ClassificationReport",
    "ConfusionMatrix",
    "Embedding2D",
    "Metrics",
    "PerplexityError",
    "RocCurve",
    "auc",
    "classification_report",
    "confusion_matrix",
    "metrics",
    "multiclass_metrics",
    "ovr_roc",
    "roc_curve",
    "tsne",
]
