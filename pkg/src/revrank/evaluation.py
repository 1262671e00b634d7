"""Classification, regression and ranking metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def flipped(self) -> "ConfusionMatrix":
        """Same counts with class 0 treated as positive."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


def confusion(labels, predictions) -> ConfusionMatrix:
    labels = np.asarray(labels, dtype=int)
    predictions = np.asarray(predictions, dtype=int)
    if labels.shape != predictions.shape:
        raise MetricError(f"length mismatch: {labels.shape} vs {predictions.shape}")
    return ConfusionMatrix(
        tp=int(np.sum((labels == 1) & (predictions == 1))),
        fp=int(np.sum((labels == 0) & (predictions == 1))),
        fn=int(np.sum((labels == 1) & (predictions == 0))),
        tn=int(np.sum((labels == 0) & (predictions == 0))),
    )


def precision(m: ConfusionMatrix) -> float:
    denom = m.tp + m.fp
    return m.tp / denom if denom else 0.0


def recall(m: ConfusionMatrix) -> float:
    denom = m.tp + m.fn
    return m.tp / denom if denom else 0.0


def f1(m: ConfusionMatrix) -> float:
    p, r = precision(m), recall(m)
    return 2 * p * r / (p + r) if p + r else 0.0


def roc_auc(labels, scores):
    """ROC points and trapezoidal AUC.

    Thresholds sweep the distinct scores from high to low, tied scores
    moving together. Returns ``(points, auc, thresholds)`` where
    ``points[0] == (0, 0)`` at threshold ``+inf`` and the last point is
    ``(1, 1)``.
    """
    labels = np.asarray(labels, dtype=int)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise MetricError("labels and scores differ in length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ROC needs both classes among the labels")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    lab = labels[order]
    tps = np.cumsum(lab == 1)
    fps = np.cumsum(lab == 0)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tpr = np.r_[0.0, tps[ends] / n_pos]
    fpr = np.r_[0.0, fps[ends] / n_neg]
    thresholds = np.r_[np.inf, s[ends]]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    points = list(zip(fpr.tolist(), tpr.tolist()))
    return points, auc, thresholds.tolist()


def mse(actual, predicted) -> float:
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise MetricError(f"length mismatch: {a.shape} vs {p.shape}")
    if a.size == 0:
        raise MetricError("mse of empty vectors")
    return float(np.mean((a - p) ** 2))


def matching_at_k(predicted_ranking, actual_ranking, k: int = 10) -> int:
    """Size of the overlap between the two top-k id sets."""
    if k < 0:
        raise MetricError("k must be non-negative")
    if k > len(predicted_ranking) or k > len(actual_ranking):
        raise MetricError(
            f"k={k} exceeds ranking length ({len(predicted_ranking)}, {len(actual_ranking)})"
        )
    return len(set(predicted_ranking[:k]) & set(actual_ranking[:k]))


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


def per_class_metrics(m: ConfusionMatrix) -> dict[str, ClassMetrics]:
    neg = m.flipped()
    return {
        "class_0": ClassMetrics(precision(neg), recall(neg), f1(neg), m.tn + m.fp),
        "class_1": ClassMetrics(precision(m), recall(m), f1(m), m.tp + m.fn),
    }


@dataclass
class EvalReport:
    per_class: dict = field(default_factory=dict)
    confusion: dict | None = None
    auc: float | None = None
    roc_points: list = field(default_factory=list)
    roc_thresholds: list = field(default_factory=list)
    mse: float | None = None
    mse_all_test: float | None = None
    matching: int | None = None
    matching_k: int | None = None
    matching_truncated: bool = False
    matching_by_product: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roc_thresholds"] = [None if math.isinf(t) else t for t in self.roc_thresholds]
        d["roc_points"] = [list(p) for p in self.roc_points]
        if self.matching_by_product:
            d["matching_mean_per_product"] = float(np.mean(list(self.matching_by_product.values())))
        return d


def classification_report(labels, scores, threshold: float = 0.5) -> EvalReport:
    """Confusion, per-class P/R/F1 and ROC for class-1 probabilities."""
    labels = np.asarray(labels, dtype=int)
    scores = np.asarray(scores, dtype=float)
    m = confusion(labels, (scores >= threshold).astype(int))
    report = EvalReport(
        per_class={k: asdict(v) for k, v in per_class_metrics(m).items()},
        confusion=asdict(m),
    )
    if len(set(labels.tolist())) == 2:
        report.roc_points, report.auc, report.roc_thresholds = roc_auc(labels, scores)
    else:
        report.notes.append("ROC skipped: test labels contain a single class")
    return report


def roc_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "fpr", "tpr"])
    for t, (fpr, tpr) in zip(report.roc_thresholds, report.roc_points):
        w.writerow(["inf" if math.isinf(t) else repr(float(t)), repr(float(fpr)), repr(float(tpr))])
    return buf.getvalue()


def format_class_table(per_class: dict, title: str = "") -> str:
    """Precision/recall/F1 per class laid out as two column groups."""
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'':12}{'Class 0':^30}{'Class 1':^30}")
    lines.append(f"{'':12}" + f"{'Precision':>10}{'Recall':>10}{'F1-score':>10}" * 2)
    c0, c1 = per_class["class_0"], per_class["class_1"]
    row = "".join(f"{c[k]:>10.2f}" for c in (c0, c1) for k in ("precision", "recall", "f1"))
    lines.append(f"{'':12}{row}")
    return "\n".join(lines)
