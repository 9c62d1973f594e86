"""Validation helpers for label and probability images."""

import numpy as np


class MaskError(ValueError):
    """Raised when an image does not satisfy a mask contract."""


def as_label_image(y, num_classes: int | None = None) -> np.ndarray:
    """Return ``y`` as a 2-D integer array of class indices.

    ``num_classes`` defaults to ``max + 1`` (at least 2).
    """
    arr = np.asarray(y)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise MaskError(f"label image must be 2-D and non-empty, got shape {arr.shape}")
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise MaskError("label image must hold integer class indices")
        arr = arr.astype(np.int64)
    if arr.size and arr.min() < 0:
        raise MaskError("class indices must be non-negative")
    if num_classes is not None:
        if num_classes < 2:
            raise MaskError("need at least two classes")
        if arr.size and arr.max() >= num_classes:
            raise MaskError(f"pixel value {int(arr.max())} not below M={num_classes}")
    return arr


def infer_num_classes(y) -> int:
    return max(2, int(np.asarray(y).max()) + 1)


def as_binary(y) -> np.ndarray:
    """Return a boolean view of a binary mask, rejecting other labels."""
    arr = np.asarray(y)
    if arr.dtype == bool:
        return arr
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise MaskError("mask is not binary (values other than 0/1 present)")
    return arr.astype(bool)


def as_prob_image(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.size and (arr.min() < 0 or arr.max() > 1 or not np.isfinite(arr).all()):
        raise MaskError("probability image values must lie in [0, 1]")
    return arr


def same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise MaskError(f"dimension mismatch: {np.shape(a)} vs {np.shape(b)}")
