"""Synthesis of noisy labels (CL / RCL / PCL / RL) from clean masks."""

import numpy as np

from metastruct.masks import MaskError, as_label_image
from metastruct.morphology import dilate, erode, skeletonize
from metastruct.ntm import NTMError, check_ntm, crd, ntm_rank
from metastruct.seeding import as_rng, stage_rng

__all__ = [
    "apply_ntm", "make_rcl_ntm", "flip_ntm", "sample_ntm", "pair_ntm",
    "generate_rl", "dynamic_ntm", "dilate", "erode", "skeletonize",
]


def _prob(name, value):
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise NTMError(f"{name} must lie in [0, 1], got {value}")
    return value


def apply_ntm(y, q, seed) -> np.ndarray:
    """Resample every pixel of true class ``i`` from column ``i`` of ``q``.

    Pixels are flipped independently. ``seed`` may be an int or a
    ``numpy.random.Generator``.
    """
    q = check_ntm(q)
    m = q.shape[0]
    try:
        y = as_label_image(y, num_classes=m)
    except MaskError as exc:
        raise NTMError(f"mask does not fit a {m}-class NTM: {exc}") from exc
    rng = as_rng(seed)
    u = rng.random(y.shape)
    cdf = np.cumsum(q, axis=0)
    cdf[-1] = 1.0
    out = np.empty(y.shape, dtype=np.uint8 if m <= 256 else np.int64)
    for i in range(m):
        sel = y == i
        # searchsorted on a column CDF; identity columns never move a pixel
        out[sel] = np.searchsorted(cdf[:, i], u[sel], side="right")
    return out


def flip_ntm(p_flip: float, m: int = 2) -> np.ndarray:
    """Diagonal ``1 - p_flip``; the flipped mass spread evenly over other classes."""
    p = _prob("p_flip", p_flip)
    q = np.full((m, m), p / (m - 1))
    np.fill_diagonal(q, 1.0 - p)
    return q


def sample_ntm(p_sample: float, m: int = 2) -> np.ndarray:
    """Keep each non-background label with ``p_sample``, else send it to class 0."""
    p = _prob("p_sample", p_sample)
    q = np.eye(m) * p
    q[0, :] += 1.0 - p
    q[0, 0] = 1.0
    return q


def pair_ntm(p_0_given_1: float, p_1_given_0: float) -> np.ndarray:
    """Binary NTM ``[[1 - P(1|0), P(0|1)], [P(1|0), 1 - P(0|1)]]``."""
    a = _prob("P(0|1)", p_0_given_1)
    b = _prob("P(1|0)", p_1_given_0)
    return np.array([[1.0 - b, a], [b, 1.0 - a]])


def make_rcl_ntm(mode: str, *args, m: int = 2) -> np.ndarray:
    """Build an RCL transition matrix.

    ``mode`` is one of ``"flip"`` (``p_flip``), ``"sample"`` (``p_sample``),
    ``"pair"`` (``P(0|1), P(1|0)``) or ``"explicit"`` (a matrix).
    """
    if mode == "flip":
        return flip_ntm(*args, m=m)
    if mode == "sample":
        return sample_ntm(*args, m=m)
    if mode == "pair":
        return pair_ntm(*args)
    if mode == "explicit":
        return check_ntm(args[0])
    raise ValueError(f"unknown NTM mode {mode!r}")


def generate_rl(h: int, w: int, p_generate: float, seed) -> np.ndarray:
    """Random label: every pixel foreground independently with ``p_generate``."""
    p = _prob("p_generate", p_generate)
    return (as_rng(seed).random((h, w)) < p).astype(np.uint8)


def dynamic_ntm(m: int, epoch: int, seed: int, min_crd: float = 0.2) -> np.ndarray:
    """A random full-rank NTM for one training epoch.

    Columns are drawn from a flat Dirichlet and redrawn until the matrix has
    rank ``m`` and every column pair is at least ``min_crd`` apart.
    """
    if m < 2:
        raise NTMError("dynamic NTMs need m >= 2")
    rng = stage_rng(seed, "dynamic_ntm", epoch)
    while True:
        q = rng.dirichlet(np.ones(m), size=m).T
        q /= q.sum(axis=0, keepdims=True)
        if ntm_rank(q) == m and crd(q).min_value >= min_crd:
            return q


def pcl(y, kind: str, radius: int = 2) -> np.ndarray:
    """Perturbed clean label by ``"dilate"``, ``"erode"`` or ``"skeleton"``."""
    if kind == "dilate":
        return dilate(y, radius)
    if kind == "erode":
        return erode(y, radius)
    if kind == "skeleton":
        return skeletonize(y)
    raise ValueError(f"unknown PCL kind {kind!r}")
