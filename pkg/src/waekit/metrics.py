"""Binary classification metrics with PNEUMONIA as the positive class.

Confusion counts, accuracy, per-class precision/recall/F1, support-weighted
averages, the ROC curve and its trapezoidal AUC. Degenerate denominators
(no predicted or no actual members of a class) yield 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import NamedTuple, Sequence

import numpy as np

from .core import DEFAULT_THRESHOLD, Label, labels_from_scores
from .errors import DegenerateInputError, DomainError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fn", "fp", "tn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise DomainError(f"confusion count {name} must be a nonnegative integer")
            object.__setattr__(self, name, int(v))

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def swapped(self) -> "ConfusionCounts":
        """Counts seen with NORMAL treated as the positive class."""
        return ConfusionCounts(tp=self.tn, fn=self.fp, fp=self.fn, tn=self.tp)

    def as_matrix(self) -> np.ndarray:
        """2x2 matrix, rows = truth (NORMAL, PNEUMONIA), cols = prediction."""
        return np.array([[self.tn, self.fp], [self.fn, self.tp]])


class ClassMetrics(NamedTuple):
    precision: float
    recall: float
    f1: float
    support: int


class WeightedMetrics(NamedTuple):
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ClassificationReport:
    counts: ConfusionCounts
    accuracy: float
    per_class: dict
    weighted: WeightedMetrics
    auc: float | None = None

    @property
    def n_samples(self) -> int:
        return self.counts.total


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))

    def __len__(self):
        return len(self.fpr)


def _as_binary(labels, name):
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise DomainError(f"{name} must contain only 0/1 labels")
    return arr.astype(np.int8)


def confusion(true_labels, predicted_labels) -> ConfusionCounts:
    y = _as_binary(true_labels, "true_labels")
    p = _as_binary(predicted_labels, "predicted_labels")
    if y.shape != p.shape:
        raise DomainError(f"length mismatch: {y.size} labels vs {p.size} predictions")
    if y.size == 0:
        raise DomainError("cannot tally an empty confusion matrix")
    tp = int(np.count_nonzero((y == 1) & (p == 1)))
    fn = int(np.count_nonzero((y == 1) & (p == 0)))
    fp = int(np.count_nonzero((y == 0) & (p == 1)))
    return ConfusionCounts(tp=tp, fn=fn, fp=fp, tn=int(y.size) - tp - fn - fp)


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise DomainError("accuracy of zero samples is undefined")
    return (c.tp + c.tn) / c.total


def _ratio(num, den):
    return num / den if den else 0.0


def _f1(precision, recall):
    s = precision + recall
    return 2.0 * precision * recall / s if s else 0.0


def class_metrics(c: ConfusionCounts, cls: Label = Label.PNEUMONIA) -> ClassMetrics:
    """Precision, recall, F1 and support for one class, one-vs-rest."""
    if c.total == 0:
        raise DomainError("class metrics of zero samples are undefined")
    if Label(cls) == Label.NORMAL:
        c = c.swapped()
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    return ClassMetrics(precision, recall, _f1(precision, recall), c.tp + c.fn)


def weighted_average(metrics_per_class: Sequence[ClassMetrics]) -> WeightedMetrics:
    n_total = sum(m.support for m in metrics_per_class)
    if n_total <= 0:
        raise DomainError("weighted average needs a positive total support")
    return WeightedMetrics(
        sum(m.precision * m.support for m in metrics_per_class) / n_total,
        sum(m.recall * m.support for m in metrics_per_class) / n_total,
        sum(m.f1 * m.support for m in metrics_per_class) / n_total,
    )


def roc_curve(scores, true_labels) -> RocCurve:
    """ROC points swept over the unique scores, highest threshold first.

    Samples sharing a score move together, so each unique score adds exactly
    one point. The curve starts at (0, 0) with an infinite threshold.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = _as_binary(true_labels, "true_labels")
    if s.shape != y.shape:
        raise DomainError(f"length mismatch: {s.size} scores vs {y.size} labels")
    if np.isnan(s).any():
        raise DomainError("scores contain NaN")
    n_pos = int(y.sum())
    n_neg = int(y.size) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("ROC curve needs both positive and negative samples")

    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tps = np.cumsum(y, dtype=np.int64)
    fps = np.cumsum(1 - y, dtype=np.int64)
    # last index of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    fpr = np.r_[0.0, fps[ends] / n_neg]
    tpr = np.r_[0.0, tps[ends] / n_pos]
    thresholds = np.r_[np.inf, s[ends]]
    return RocCurve(fpr, tpr, thresholds)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under an ROC curve."""
    return float(np.trapezoid(curve.tpr, curve.fpr))


def roc_auc(scores, true_labels) -> float:
    return auc(roc_curve(scores, true_labels))


def report_from_counts(c: ConfusionCounts, auc_value: float | None = None) -> ClassificationReport:
    per_class = {
        Label.PNEUMONIA: class_metrics(c, Label.PNEUMONIA),
        Label.NORMAL: class_metrics(c, Label.NORMAL),
    }
    return ClassificationReport(
        counts=c,
        accuracy=accuracy(c),
        per_class=per_class,
        weighted=weighted_average(list(per_class.values())),
        auc=auc_value,
    )


def classification_report(true_labels, predicted_labels, scores=None) -> ClassificationReport:
    """Full report from hard decisions; AUC is added when scores are given
    and both classes are present."""
    c = confusion(true_labels, predicted_labels)
    auc_value = None
    if scores is not None:
        y = _as_binary(true_labels, "true_labels")
        if 0 < y.sum() < y.size:
            auc_value = roc_auc(scores, y)
    return report_from_counts(c, auc_value)


def evaluate_scores(true_labels, scores, threshold: float = DEFAULT_THRESHOLD) -> ClassificationReport:
    """Threshold ``scores`` (ties positive) and report on the result."""
    return classification_report(true_labels, labels_from_scores(scores, threshold), scores)


def as_percent(x: float) -> float:
    """Percentage rounded half away from zero to two decimals (0.98635 -> 98.64).

    Rounds the shortest decimal representation of ``x``, not its binary
    expansion, so printed ties round the way they read.
    """
    d = (Decimal(repr(float(x))) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return float(d)
