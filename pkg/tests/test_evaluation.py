import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from revrank.evaluation import (
    ConfusionMatrix,
    MetricError,
    classification_report,
    confusion,
    f1,
    format_class_table,
    matching_at_k,
    mse,
    per_class_metrics,
    precision,
    recall,
    roc_auc,
    roc_csv,
)


def pair_auc(labels, scores):
    """Fraction of (positive, negative) pairs ordered correctly, ties count half."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


# -- confusion and P/R/F1 -------------------------------------------------------

def test_confusion_examples():
    assert confusion([1, 1, 1], [1, 1, 1]) == ConfusionMatrix(3, 0, 0, 0)
    assert confusion([1, 1], [0, 0]) == ConfusionMatrix(0, 0, 2, 0)
    assert confusion([1, 1, 0, 0], [1, 0, 0, 1]) == ConfusionMatrix(1, 1, 1, 1)
    with pytest.raises(MetricError):
        confusion([1], [1, 0])


def test_prf_examples():
    assert precision(ConfusionMatrix(8, 2, 0, 0)) == 0.8
    assert precision(ConfusionMatrix(0, 0, 3, 3)) == 0.0
    m = ConfusionMatrix(6, 2, 2, 5)
    assert f1(m) == pytest.approx(precision(m))


def test_prf_enumerated():
    for tp, fp, fn, tn in itertools.product(range(6), repeat=4):
        m = ConfusionMatrix(tp, fp, fn, tn)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        assert precision(m) == p
        assert recall(m) == r
        assert f1(m) == f
        assert 0.0 <= f <= 1.0
        assert f <= 2 * min(p, r) + 1e-15


def test_per_class_flips_positive():
    m = ConfusionMatrix(tp=5, fp=1, fn=2, tn=7)
    pc = per_class_metrics(m)
    assert pc["class_1"].precision == 5 / 6
    assert pc["class_0"].precision == 7 / 9
    assert pc["class_0"].recall == 7 / 8
    assert pc["class_0"].support == 8 and pc["class_1"].support == 7


# -- ROC / AUC ----------------------------------------------------------------------

def test_auc_examples():
    assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])[1] == 1.0
    assert roc_auc([1, 1, 0, 0], [0.1, 0.2, 0.8, 0.9])[1] == 0.0
    points, auc, thresholds = roc_auc([0, 1, 0, 1], [0.5] * 4)
    assert auc == 0.5
    assert points == [(0.0, 0.0), (1.0, 1.0)]
    assert thresholds[0] == math.inf


def test_auc_single_class():
    with pytest.raises(MetricError):
        roc_auc([1, 1], [0.2, 0.3])


def test_auc_matches_pair_counting():
    rng = random.Random(0)
    for _ in range(100):
        n = rng.randint(2, 200)
        labels = [rng.randint(0, 1) for _ in range(n)]
        labels[0], labels[1] = 0, 1
        scores = [rng.randint(0, 20) / 20 for _ in range(n)]  # many ties
        assert abs(roc_auc(labels, scores)[1] - pair_auc(labels, scores)) <= 1e-9


def test_auc_monotone_invariance():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 2, 80)
    labels[:2] = [0, 1]
    scores = rng.uniform(0.01, 1, 80)
    base = roc_auc(labels, scores)[1]
    assert roc_auc(labels, 2 * scores + 7)[1] == pytest.approx(base, abs=1e-12)
    assert roc_auc(labels, scores ** 3)[1] == pytest.approx(base, abs=1e-12)


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 5)), min_size=2, max_size=40))
def test_roc_curve_shape(pairs):
    labels = [l for l, _ in pairs]
    if len(set(labels)) < 2:
        return
    points, auc, thresholds = roc_auc(labels, [s for _, s in pairs])
    assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)
    assert all(a[0] <= b[0] and a[1] <= b[1] for a, b in zip(points, points[1:]))
    assert 0.0 <= auc <= 1.0
    assert len(thresholds) == len(points)
    assert all(a > b for a, b in zip(thresholds, thresholds[1:]))


def test_roc_csv_first_row():
    report = classification_report([0, 1, 1, 0], [0.2, 0.9, 0.6, 0.4])
    lines = roc_csv(report).splitlines()
    assert lines[0] == "threshold,fpr,tpr"
    assert lines[1] == "inf,0.0,0.0"
    assert lines[-1].endswith(",1.0,1.0")


# -- MSE --------------------------------------------------------------------------------

def test_mse():
    assert mse([1, 2], [1, 2]) == 0
    assert mse([2, 4], [1, 2]) == 2.5
    x = np.arange(10.0)
    assert mse(x, x + 3) == pytest.approx(9.0)
    with pytest.raises(MetricError):
        mse([], [])
    with pytest.raises(MetricError):
        mse([1], [1, 2])


# -- matching@k --------------------------------------------------------------------------

def test_matching_examples():
    ids = [f"r{i}" for i in range(10)]
    assert matching_at_k(ids, list(reversed(ids))) == 10
    assert matching_at_k(ids, [f"s{i}" for i in range(10)]) == 0
    assert matching_at_k(["a", "b", "c"], ["c", "d", "b"], k=3) == 2
    with pytest.raises(MetricError):
        matching_at_k(["a"], ["a", "b"], k=2)


def test_matching_brute_force():
    rng = random.Random(4)
    pool = [f"id{i}" for i in range(40)]
    for _ in range(1000):
        a = rng.sample(pool, rng.randint(1, 40))
        b = rng.sample(pool, rng.randint(1, 40))
        k = rng.randint(0, min(len(a), len(b)))
        expected = sum(1 for x in a[:k] if x in b[:k])
        got = matching_at_k(a, b, k)
        assert got == expected
        assert got == matching_at_k(b, a, k)
        prefix = a[:k]
        rng.shuffle(prefix)
        assert matching_at_k(prefix + a[k:], b, k) == got


# -- reports ------------------------------------------------------------------------------

def test_classification_report_fields():
    r = classification_report([0, 0, 1, 1, 1], [0.1, 0.7, 0.8, 0.4, 0.9])
    assert r.confusion == {"tp": 2, "fp": 1, "fn": 1, "tn": 1}
    assert r.auc == pytest.approx(pair_auc([0, 0, 1, 1, 1], [0.1, 0.7, 0.8, 0.4, 0.9]))
    d = r.to_dict()
    assert d["roc_thresholds"][0] is None
    assert set(d["per_class"]) == {"class_0", "class_1"}


def test_single_class_report_skips_roc():
    r = classification_report([1, 1], [0.9, 0.2])
    assert r.auc is None and r.notes


def test_format_class_table():
    r = classification_report([0, 1, 1, 0], [0.2, 0.9, 0.6, 0.4])
    text = format_class_table(r.per_class, title="RF")
    lines = text.splitlines()
    assert lines[0] == "RF"
    assert "Class 0" in lines[1] and "Class 1" in lines[1]
    assert lines[2].count("Precision") == 2
    assert lines[3].split() == ["1.00"] * 6
