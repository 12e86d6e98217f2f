"""Segmentation metrics: pixel accuracy, Dice, IoU and the categorical dice loss.

Masks are integer arrays of class indices. Per-class metrics are one-vs-rest.
When a class is absent from both prediction and ground truth its Dice and IoU
are defined as 1.0 (vacuously perfect) and the class is flagged ``vacuous``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import EmptyMask, InvalidEpsilon, InvalidInput, ShapeMismatch

__all__ = [
    "ConfusionCounts",
    "ClassMetrics",
    "MetricsReport",
    "confusion",
    "accuracy",
    "dice",
    "iou",
    "dice_from_counts",
    "iou_from_counts",
    "one_hot",
    "categorical_dice_loss",
    "macro_report",
    "CSV_COLUMNS",
    "report_rows",
    "dataset_rows",
]

DEFAULT_EPSILON = 1e-7
CSV_COLUMNS = ("image", "class", "tp", "tn", "fp", "fn", "accuracy", "dice", "iou")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)


def _check_pair(pred, gt):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"prediction shape {pred.shape} != ground truth shape {gt.shape}")
    return pred, gt


def confusion(pred, gt, c: int) -> ConfusionCounts:
    """One-vs-rest pixel counts for class ``c``."""
    pred, gt = _check_pair(pred, gt)
    p = pred == c
    g = gt == c
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p)) - tp
    fn = int(np.count_nonzero(g)) - tp
    return ConfusionCounts(tp, p.size - tp - fp - fn, fp, fn)


def accuracy(counts: ConfusionCounts) -> float:
    if counts.total == 0:
        raise EmptyMask("accuracy of an empty mask is undefined")
    return (counts.tp + counts.tn) / counts.total


def dice_from_counts(counts: ConfusionCounts) -> float:
    denom = 2 * counts.tp + counts.fp + counts.fn
    return 1.0 if denom == 0 else 2 * counts.tp / denom


def iou_from_counts(counts: ConfusionCounts) -> float:
    union = counts.tp + counts.fp + counts.fn
    return 1.0 if union == 0 else counts.tp / union


def dice(pred, gt, c: int) -> float:
    """``2 |P & G| / (|P| + |G|)`` for the pixels labelled ``c``."""
    return dice_from_counts(confusion(pred, gt, c))


def iou(pred, gt, c: int) -> float:
    """``|P & G| / |P | G|`` for the pixels labelled ``c``."""
    return iou_from_counts(confusion(pred, gt, c))


def one_hot(mask, num_classes: int) -> np.ndarray:
    """``(H, W, C)`` float one-hot encoding of an index mask."""
    mask = np.asarray(mask)
    if mask.size and (mask.min() < 0 or mask.max() >= num_classes):
        raise InvalidInput(f"mask labels must lie in [0, {num_classes})")
    return (mask[..., None] == np.arange(num_classes)).astype(float)


def categorical_dice_loss(prob, gt, epsilon: float = DEFAULT_EPSILON) -> float:
    """Soft multi-class Dice loss.

    ``1 - mean_c (2 sum(P_c G_c) + eps) / (sum(P_c) + sum(G_c) + eps)`` with
    ``G_c`` the one-hot ground truth.

    Parameters
    ----------
    prob : ndarray, shape (H, W, C)
        Per-pixel class probabilities (non-negative, summing to 1).
    gt : ndarray, shape (H, W)
        Ground-truth class indices in ``[0, C)``.
    epsilon : float
        Smoothing term, > 0.
    """
    prob = np.asarray(prob, dtype=float)
    gt = np.asarray(gt)
    if prob.ndim != gt.ndim + 1 or prob.shape[:-1] != gt.shape:
        raise ShapeMismatch(f"probability map {prob.shape} does not match mask {gt.shape}")
    if not epsilon > 0:
        raise InvalidEpsilon(f"epsilon must be > 0, got {epsilon}")
    if (prob < 0).any() or np.abs(prob.sum(axis=-1) - 1.0).max(initial=0.0) > 1e-6:
        raise InvalidInput("probabilities must be non-negative and sum to 1 per pixel")
    num_classes = prob.shape[-1]
    g = one_hot(gt, num_classes)
    axes = tuple(range(gt.ndim))
    inter = (prob * g).sum(axis=axes)
    ratio = (2.0 * inter + epsilon) / (prob.sum(axis=axes) + g.sum(axis=axes) + epsilon)
    return float(1.0 - ratio.mean())


@dataclass(frozen=True)
class ClassMetrics:
    cls: int
    counts: ConfusionCounts
    accuracy: float
    dice: float
    iou: float
    vacuous: bool

    @classmethod
    def from_counts(cls, c: int, counts: ConfusionCounts) -> "ClassMetrics":
        return cls(c, counts, accuracy(counts), dice_from_counts(counts),
                   iou_from_counts(counts), counts.tp + counts.fp + counts.fn == 0)


@dataclass(frozen=True)
class MetricsReport:
    per_class: tuple
    overall_accuracy: float
    correct: int = 0
    total: int = 0

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([m.accuracy for m in self.per_class]))

    @property
    def mean_dice(self) -> float:
        return float(np.mean([m.dice for m in self.per_class]))

    @property
    def mean_iou(self) -> float:
        return float(np.mean([m.iou for m in self.per_class]))

    @property
    def vacuous_classes(self) -> list:
        return [m.cls for m in self.per_class if m.vacuous]


def _num_classes(pred, gt, num_classes):
    if num_classes is None:
        top = max(int(pred.max(initial=0)), int(gt.max(initial=0)))
        num_classes = max(top + 1, 2)
    for name, arr in (("prediction", pred), ("ground truth", gt)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise InvalidInput(f"{name} labels must lie in [0, {num_classes})")
    return num_classes


def macro_report(pred, gt, num_classes: Optional[int] = None) -> MetricsReport:
    """Per-class metrics, unweighted class means and joint pixel accuracy."""
    pred, gt = _check_pair(pred, gt)
    if pred.size == 0:
        raise EmptyMask("cannot score empty masks")
    num_classes = _num_classes(pred, gt, num_classes)
    per_class = tuple(ClassMetrics.from_counts(c, confusion(pred, gt, c)) for c in range(num_classes))
    correct = int(np.count_nonzero(pred == gt))
    return MetricsReport(per_class, correct / pred.size, correct, pred.size)


def pooled_report(reports: Iterable[MetricsReport]) -> MetricsReport:
    """Combine per-image reports by summing their counts."""
    reports = list(reports)
    if not reports:
        raise EmptyMask("no reports to pool")
    num_classes = max(len(r.per_class) for r in reports)
    per_class = []
    for c in range(num_classes):
        counts = ConfusionCounts(0, 0, 0, 0)
        for r in reports:
            if c < len(r.per_class):
                counts = counts + r.per_class[c].counts
            else:
                counts = counts + ConfusionCounts(0, r.total, 0, 0)
        per_class.append(ClassMetrics.from_counts(c, counts))
    correct = sum(r.correct for r in reports)
    total = sum(r.total for r in reports)
    return MetricsReport(tuple(per_class), correct / total, correct, total)


def _fmt(value: float) -> str:
    return repr(float(value))


def report_rows(image_id: str, report: MetricsReport) -> list:
    """CSV rows: one per class, then ``mean`` (macro) and ``overall`` (joint accuracy)."""
    rows = []
    for m in report.per_class:
        k = m.counts
        rows.append([image_id, str(m.cls), k.tp, k.tn, k.fp, k.fn,
                     _fmt(m.accuracy), _fmt(m.dice), _fmt(m.iou)])
    rows.append([image_id, "mean", "", "", "", "",
                 _fmt(report.mean_accuracy), _fmt(report.mean_dice), _fmt(report.mean_iou)])
    rows.append([image_id, "overall", "", "", "", "", _fmt(report.overall_accuracy), "", ""])
    return rows


def dataset_rows(reports: dict) -> list:
    """Rows for every image (sorted by id) followed by pooled ``*`` rows."""
    rows = []
    for image_id in sorted(reports):
        rows.extend(report_rows(image_id, reports[image_id]))
    rows.extend(report_rows("*", pooled_report(reports[k] for k in sorted(reports))))
    return rows
