"""Segmentation metrics: Dice, IoU, pixel accuracy, ROC AUC, difference images."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from metastruct.masks import MaskError, as_binary, as_label_image, same_shape


@dataclass
class MetricsReport:
    dice: float
    iou: float
    accuracy: float
    auc: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def overlap_metrics(pred, ref) -> MetricsReport:
    """Dice, IoU and accuracy of two binary masks; empty vs empty scores 1."""
    same_shape(pred, ref)
    a = as_binary(pred)
    b = as_binary(ref)
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    total = int(a.sum()) + int(b.sum())
    dice = 1.0 if total == 0 else 2.0 * inter / total
    iou = 1.0 if union == 0 else inter / union
    acc = float(np.count_nonzero(a == b)) / a.size
    return MetricsReport(dice=dice, iou=iou, accuracy=acc)


def auc(p, ref) -> float:
    """ROC AUC as the Mann-Whitney rank statistic, ties counted one half.

    Returns ``nan`` when ``ref`` holds a single class.
    """
    same_shape(p, ref)
    r = as_binary(ref).ravel()
    n_pos = int(r.sum())
    n_neg = r.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(np.asarray(p, dtype=float).ravel())
    return float((ranks[r].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(pred, ref, prob=None) -> MetricsReport:
    rep = overlap_metrics(pred, ref)
    if prob is not None:
        rep.auc = auc(prob, ref)
    return rep


def diff_image(pred_noisy, pred_clean) -> np.ndarray:
    """``clean - noisy``: +1 marks under-segmentation, -1 over-segmentation."""
    same_shape(pred_noisy, pred_clean)
    return as_binary(pred_clean).astype(np.int8) - as_binary(pred_noisy).astype(np.int8)


def mean_iou(pred, ref, num_classes: int | None = None) -> float:
    """Mean per-class IoU over the classes present in ``ref``."""
    same_shape(pred, ref)
    pred = as_label_image(pred)
    ref = as_label_image(ref)
    classes = np.unique(ref)
    if classes.size == 0:
        raise MaskError("empty reference")
    scores = []
    for c in classes:
        a, b = pred == c, ref == c
        scores.append(np.count_nonzero(a & b) / np.count_nonzero(a | b))
    return float(np.mean(scores))
