import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diacnn.evalkit.confusion import (
    REPORT_COLUMNS,
    ConfusionMatrix,
    classification_report,
    confusion_matrix,
    metrics,
    multiclass_metrics,
)


def tally(preds, labels, positive=1):
    """Brute-force per-element count."""
    tp = fp = fn = tn = 0
    for p, y in zip(preds, labels):
        if p == positive and y == positive:
            tp += 1
        elif p == positive:
            fp += 1
        elif y == positive:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def test_small_confusion_example():
    cm = confusion_matrix([1, 1, 0, 0], [1, 0, 0, 1])
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (1, 1, 1, 1)
    assert cm.as_table() == [[1, 1], [1, 1]]


def test_perfect_predictions():
    y = [0, 1, 1, 0, 1]
    cm = confusion_matrix(y, y)
    assert cm.fp == cm.fn == 0
    assert all(v == 100.0 for v in metrics(cm).as_dict().values())


def test_table_layout_rows_predicted_columns_actual():
    cm = ConfusionMatrix(tp=5, fp=2, fn=3, tn=7)
    assert cm.as_table() == [[5, 2], [3, 7]]
    assert cm.total == 17


def test_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        confusion_matrix([0, 1], [0, 1, 1])


def test_counts_match_tally_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        p = rng.integers(0, 2, n)
        y = rng.integers(0, 2, n)
        cm = confusion_matrix(p, y)
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == tally(p, y)
        assert cm.total == n


def test_metric_arithmetic_example():
    m = metrics(ConfusionMatrix(tp=8, fp=1, fn=2, tn=9))
    assert m.sen == pytest.approx(80.0, abs=1e-12)
    assert m.spec == pytest.approx(90.0, abs=1e-12)
    assert m.acc == pytest.approx(85.0, abs=1e-12)
    assert m.preci == pytest.approx(800 / 9, abs=1e-12)
    assert m.f1 == pytest.approx(1600 / 19, abs=1e-12)
    assert round(m.preci, 3) == 88.889 and round(m.f1, 3) == 84.211


def test_zero_denominator_is_per_metric():
    m = metrics(ConfusionMatrix(tp=0, fp=0, fn=0, tn=5))
    assert m.sen is None and m.preci is None and m.f1 is None
    assert m.spec == 100.0 and m.acc == 100.0


def test_metrics_match_recomputation():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        tp, fp, fn, tn = (int(v) for v in rng.integers(1, 500, 4))
        m = metrics(ConfusionMatrix(tp, fp, fn, tn))
        assert abs(m.sen - tp / (tp + fn) * 100) < 1e-12
        assert abs(m.spec - tn / (tn + fp) * 100) < 1e-12
        assert abs(m.acc - (tp + tn) / (tp + fp + fn + tn) * 100) < 1e-12
        assert abs(m.preci - tp / (tp + fp) * 100) < 1e-12
        assert abs(m.f1 - 2 * tp / (2 * tp + fp + fn) * 100) < 1e-12


def test_f1_is_harmonic_mean_of_precision_and_sensitivity():
    rng = np.random.default_rng(2)
    for _ in range(500):
        tp, fp, fn, tn = (int(v) for v in rng.integers(1, 1000, 4))
        m = metrics(ConfusionMatrix(tp, fp, fn, tn))
        hm = 2 * m.preci * m.sen / (m.preci + m.sen)
        assert abs(m.f1 - hm) < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_metrics_in_range(tp, fp, fn, tn):
    m = metrics(ConfusionMatrix(tp, fp, fn, tn))
    for v in m.as_dict().values():
        assert v is None or 0.0 <= v <= 100.0
    if tp + fp + fn + tn:
        assert m.acc == 100.0 * (tp + tn) / (tp + fp + fn + tn)


def test_multiclass_metrics_average_one_vs_rest():
    p = [0, 1, 2, 2, 1, 0]
    y = [0, 1, 1, 2, 2, 0]
    m = multiclass_metrics(p, y, 3)
    per = [metrics(confusion_matrix(p, y, k)) for k in range(3)]
    assert m.sen == pytest.approx(np.mean([q.sen for q in per]))
    assert m.acc == pytest.approx(100 * 4 / 6)


def test_report_example():
    rep = classification_report([0, 0, 1, 1], [0, 1, 1, 1], ["a", "b"])
    c0, c1 = rep.per_class
    assert (c0.precision, c0.recall, c0.support) == (0.5, 1.0, 1)
    assert c0.f1 == pytest.approx(2 / 3)
    assert (c1.precision, c1.support) == (1.0, 3)
    assert c1.recall == pytest.approx(2 / 3)
    assert c1.f1 == pytest.approx(0.8)
    assert rep.accuracy == 0.75
    assert rep.macro.f1 == pytest.approx((2 / 3 + 0.8) / 2)
    assert round(rep.macro.f1, 3) == 0.733
    assert rep.weighted.f1 == pytest.approx((2 / 3 + 3 * 0.8) / 4)
    assert round(rep.weighted.f1, 3) == 0.767


def test_report_all_correct():
    y = [0, 1, 2, 1, 0]
    rep = classification_report(y, y, ["x", "y", "z"])
    for r in rep.per_class + (rep.macro, rep.weighted):
        assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)
    assert rep.accuracy == 1.0


def test_report_layout():
    rep = classification_report([0, 1, 1], [0, 1, 0], ["Normal", "Cataract"])
    assert REPORT_COLUMNS[1:] == ("Recall", "Precision", "F1 score", "Support")
    labels = [r[0] for r in rep.rows()]
    assert labels == ["Normal", "Cataract", "Accuracy", "Macro avg.", "Weighted avg."]
    assert rep.rows()[2][1] is None


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_report_invariants(seed, k):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    y = rng.integers(0, k, n)
    p = rng.integers(0, k, n)
    rep = classification_report(p, y, [str(i) for i in range(k)])
    sup = np.array([r.support for r in rep.per_class])
    assert sup.sum() == n
    for attr in ("precision", "recall", "f1"):
        vals = np.array([getattr(r, attr) for r in rep.per_class])
        assert getattr(rep.weighted, attr) == pytest.approx(float((vals * sup).sum() / n), abs=1e-12)
        assert getattr(rep.macro, attr) == pytest.approx(float(vals.mean()), abs=1e-12)


def test_report_errors():
    with pytest.raises(ValueError, match="empty"):
        classification_report([], [], ["a", "b"])
    with pytest.raises(ValueError, match="class set"):
        classification_report([0, 2], [0, 2], ["a", "b"])
