"""Evaluation metrics: confusion-matrix analytics and mask IoU.

Confusion matrices follow the convention rows = true class, columns =
predicted class, in canonical variety order. Degenerate 0/0 metric cells
are defined as 0.
"""

import csv
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import ShapeMismatchError
from .varieties import NUM_VARIETIES, VARIETY_NAMES, RiceVariety


@dataclass
class ClassMetrics:
    variety: RiceVariety
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float


@dataclass
class MetricsSummary:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float


def _as_confusion(cm) -> np.ndarray:
    arr = np.asarray(cm, dtype=np.int64)
    if arr.shape != (NUM_VARIETIES, NUM_VARIETIES):
        raise ValueError(f"confusion matrix must be 7x7, got shape {arr.shape}")
    if np.any(arr < 0):
        raise ValueError("confusion matrix entries must be non-negative")
    return arr


def confusion_from_predictions(
    pairs: Iterable[Tuple[RiceVariety, RiceVariety]],
) -> np.ndarray:
    """Count (true, predicted) pairs into a 7x7 matrix."""
    cm = np.zeros((NUM_VARIETIES, NUM_VARIETIES), dtype=np.int64)
    empty = True
    for true, predicted in pairs:
        cm[int(true), int(predicted)] += 1
        empty = False
    if empty:
        raise ValueError("cannot build a confusion matrix from an empty pair list")
    return cm


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def class_metrics(cm) -> List[ClassMetrics]:
    """Per-class TP/FP/FN/TN and precision/recall/F1 for all seven classes."""
    cm = _as_confusion(cm)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    result = []
    for c in range(NUM_VARIETIES):
        tp = int(cm[c, c])
        fp = int(cm[:, c].sum()) - tp
        fn = int(cm[c, :].sum()) - tp
        tn = total - tp - fp - fn
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        result.append(
            ClassMetrics(
                variety=RiceVariety(c),
                tp=tp, fp=fp, fn=fn, tn=tn,
                precision=precision, recall=recall, f1=f1,
            )
        )
    return result


def accuracy(cm) -> float:
    """Trace over grand total."""
    cm = _as_confusion(cm)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    return float(np.trace(cm)) / total


def summary(cm) -> MetricsSummary:
    """Accuracy plus macro (unweighted) and support-weighted averages."""
    cm = _as_confusion(cm)
    per_class = class_metrics(cm)
    support = cm.sum(axis=1).astype(np.float64)
    weights = support / support.sum()
    precisions = np.array([m.precision for m in per_class])
    recalls = np.array([m.recall for m in per_class])
    f1s = np.array([m.f1 for m in per_class])
    return MetricsSummary(
        accuracy=accuracy(cm),
        macro_precision=float(precisions.mean()),
        macro_recall=float(recalls.mean()),
        macro_f1=float(f1s.mean()),
        weighted_precision=float(precisions @ weights),
        weighted_recall=float(recalls @ weights),
        weighted_f1=float(f1s @ weights),
    )


def iou(mask_a, mask_b) -> float:
    """Jaccard index of two binary masks; both-empty is defined as 1.0."""
    a = np.asarray(mask_a).astype(bool)
    b = np.asarray(mask_b).astype(bool)
    if a.shape != b.shape:
        raise ShapeMismatchError(a.shape, b.shape, "iou")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def dataset_iou(pairs: Sequence[Tuple[np.ndarray, np.ndarray]]) -> Tuple[float, float]:
    """(mean per-image IoU, aggregate sum-of-intersections over sum-of-unions).

    The aggregate treats an all-empty dataset as 1.0, consistent with `iou`.
    """
    if not pairs:
        raise ValueError("dataset_iou requires at least one mask pair")
    per_image = []
    inter_total = 0
    union_total = 0
    for pred, true in pairs:
        per_image.append(iou(pred, true))
        a = np.asarray(pred).astype(bool)
        b = np.asarray(true).astype(bool)
        inter_total += np.count_nonzero(a & b)
        union_total += np.count_nonzero(a | b)
    aggregate = inter_total / union_total if union_total > 0 else 1.0
    return float(np.mean(per_image)), float(aggregate)


def confusion_to_csv(cm, path) -> None:
    """Write the matrix with variety names as header row and first column."""
    cm = _as_confusion(cm)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["true\\predicted", *VARIETY_NAMES])
        for name, row in zip(VARIETY_NAMES, cm):
            writer.writerow([name, *row.tolist()])


def confusion_from_csv(path) -> np.ndarray:
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    header = rows[0][1:]
    if tuple(header) != VARIETY_NAMES:
        raise ValueError(f"unexpected confusion CSV header: {header}")
    cm = np.zeros((NUM_VARIETIES, NUM_VARIETIES), dtype=np.int64)
    for row in rows[1:]:
        cm[int(RiceVariety.from_name(row[0]))] = [int(v) for v in row[1:]]
    return cm
