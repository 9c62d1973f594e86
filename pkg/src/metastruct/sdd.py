"""Spatial density distributions (SDD) of label images.

The density of class ``m`` at a pixel is the count of class-``m`` pixels in
the ``(2h+1) x (2h+1)`` window around it (uniform kernel). In the default
``"local"`` normalization the count is divided by the in-image window area,
so channels sum to one everywhere. ``"global"`` instead scales counts by
``1 / (2 N h)`` with ``N`` the number of class-``m`` pixels.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from metastruct.masks import MaskError, as_label_image, infer_num_classes
from metastruct.ntm import check_ntm

NORMALIZATIONS = ("local", "global")


def box_count(mask, h: int) -> np.ndarray:
    """Exact integer count of true pixels in each clipped (2h+1)^2 window."""
    a = np.asarray(mask).astype(np.int64)
    H, W = a.shape
    ii = np.zeros((H + 1, W + 1), dtype=np.int64)
    ii[1:, 1:] = a.cumsum(0).cumsum(1)
    r0 = np.clip(np.arange(H) - h, 0, H)
    r1 = np.clip(np.arange(H) + h + 1, 0, H)
    c0 = np.clip(np.arange(W) - h, 0, W)
    c1 = np.clip(np.arange(W) + h + 1, 0, W)
    return (ii[r1][:, c1] - ii[r0][:, c1] - ii[r1][:, c0] + ii[r0][:, c0])


def window_area(shape, h: int) -> np.ndarray:
    return box_count(np.ones(shape, dtype=bool), h)


def density_map(y, m: int, h: int, normalization: str = "local") -> np.ndarray:
    """Density channel of class ``m`` at bandwidth ``h``."""
    if h < 1:
        raise ValueError(f"bandwidth must be >= 1, got {h}")
    y = as_label_image(y)
    counts = box_count(y == m, h)
    if normalization == "local":
        return counts / window_area(y.shape, h)
    if normalization == "global":
        n = int(np.count_nonzero(y == m))
        if n == 0:
            return np.zeros(y.shape)
        return counts / (2.0 * n * h)
    raise ValueError(f"normalization must be one of {NORMALIZATIONS}")


def density_maps(y, h: int, num_classes: int | None = None, normalization: str = "local") -> np.ndarray:
    """Stack of all class channels, shape ``(M, H, W)``."""
    y = as_label_image(y, num_classes)
    m = num_classes or infer_num_classes(y)
    return np.stack([density_map(y, c, h, normalization) for c in range(m)])


def density_curve(d, row: int) -> np.ndarray:
    d = np.asarray(d)
    if not 0 <= row < d.shape[0]:
        raise IndexError(f"row {row} outside [0, {d.shape[0]})")
    return d[row].copy()


def outline_crossings(y, row: int) -> np.ndarray:
    """Column positions where the clean label changes along ``row``.

    Each marker sits on the first pixel after the change.
    """
    y = as_label_image(y)
    if not 0 <= row < y.shape[0]:
        raise IndexError(f"row {row} outside [0, {y.shape[0]})")
    return np.flatnonzero(np.diff(y[row]) != 0) + 1


def predicted_interior_density(q, m: int, i: int, normalization: str = "local",
                               h: int | None = None, n: int | None = None) -> float:
    """Expected class-``m`` density deep inside true class ``i``.

    Locally this is just ``q[m, i]``; the global scale needs ``h`` and the
    class-``m`` point count ``n``.
    """
    q = check_ntm(q)
    p = float(q[m, i])
    if normalization == "local":
        return p
    if normalization == "global":
        if h is None or not n:
            raise ValueError("global normalization needs h and a positive point count n")
        return 2.0 * h / n * p
    raise ValueError(f"normalization must be one of {NORMALIZATIONS}")


def binomial_sigma(p, h: int):
    """Sampling spread of a local density at level ``p``, floored at one count."""
    area = (2 * h + 1) ** 2
    p = np.clip(p, 0.0, 1.0)
    return np.maximum(np.sqrt(p * (1 - p) / area), 1.0 / area)


def interior_mask(y, h: int, region: int | None = None) -> np.ndarray:
    """Pixels whose full window lies inside the image and inside one region.

    With ``region`` given, only that class's interior is returned.
    """
    y = as_label_image(y)
    H, W = y.shape
    inside = np.zeros(y.shape, dtype=bool)
    inside[h:H - h, h:W - h] = True
    full = window_area(y.shape, h) == (2 * h + 1) ** 2
    classes = [region] if region is not None else np.unique(y)
    out = np.zeros(y.shape, dtype=bool)
    for c in classes:
        out |= box_count(y == c, h) == (2 * h + 1) ** 2
    return out & inside & full


def boundary_distance(y) -> np.ndarray:
    """Chebyshev distance from each pixel to the nearest pixel of another class."""
    y = as_label_image(y)
    edge = np.zeros(y.shape, dtype=bool)
    edge[:-1, :] |= y[:-1, :] != y[1:, :]
    edge[1:, :] |= y[:-1, :] != y[1:, :]
    edge[:, :-1] |= y[:, :-1] != y[:, 1:]
    edge[:, 1:] |= y[:, :-1] != y[:, 1:]
    edge[:-1, :-1] |= y[:-1, :-1] != y[1:, 1:]
    edge[1:, 1:] |= y[:-1, :-1] != y[1:, 1:]
    edge[:-1, 1:] |= y[:-1, 1:] != y[1:, :-1]
    edge[1:, :-1] |= y[:-1, 1:] != y[1:, :-1]
    if not edge.any():
        return np.full(y.shape, np.inf)
    return ndimage.distance_transform_cdt(~edge, metric="chessboard").astype(float)


@dataclass
class MetaStructureSummary:
    """Meta-structure clusters found in a label image."""

    num_classes: int
    levels: list = field(default_factory=list)
    shares: list = field(default_factory=list)
    bandwidth: int = 0

    def to_dict(self) -> dict:
        return {
            "D": self.num_classes,
            "bandwidth": self.bandwidth,
            "clusters": [{"density": [float(v) for v in lv], "share": float(s)}
                         for lv, s in zip(self.levels, self.shares)],
        }


def stable_pixels(maps: np.ndarray, h: int) -> np.ndarray:
    """Pixels whose density vector matches the vectors ``h`` pixels away.

    Windows straddling a density transition disagree with some shifted
    window; those pixels are the boundary band and are left unclustered.
    """
    _, H, W = maps.shape
    stable = np.zeros((H, W), dtype=bool)
    stable[2 * h:H - 2 * h, 2 * h:W - 2 * h] = True
    core = (slice(2 * h, H - 2 * h), slice(2 * h, W - 2 * h))
    for di in (-h, 0, h):
        for dj in (-h, 0, h):
            if di == dj == 0:
                continue
            shifted = np.roll(maps, (-di, -dj), axis=(1, 2))
            mean = 0.5 * (maps + shifted)
            tol = 3 * np.sqrt(2) * binomial_sigma(mean, h)
            ok = (np.abs(maps - shifted) <= tol).all(axis=0)
            stable[core] &= ok[core]
    return stable


def _box_close(x: np.ndarray, center: np.ndarray, h: int, k: float) -> np.ndarray:
    """Rows of ``x`` within ``k`` binomial sigmas of ``center`` in every channel."""
    tol = k * binomial_sigma(center, h)
    return (np.abs(x - center) <= tol).all(axis=-1)


def _same_mode(a: np.ndarray, b: np.ndarray, h: int) -> bool:
    tol = 3 * np.maximum(binomial_sigma(a, h), binomial_sigma(b, h))
    return bool((np.abs(a - b) <= tol).all())


def find_density_clusters(vectors: np.ndarray, h: int, min_share: float = 0.01,
                          n_seeds: int = 200, n_probe: int = 4000):
    """Peel density modes off a set of density vectors, densest first.

    Each round takes the seed vector with the most neighbours inside a
    one-sigma box, mean-shifts it within a 1.5-sigma box, then removes the
    4-sigma box around it. A mode within three sigma of an earlier one is
    merged into it. Stops once a mode holds less than ``min_share`` of the
    vectors. Returns ``(centers, shares)`` with vectors reassigned to their
    nearest centre for the final means and shares.
    """
    n = len(vectors)
    remaining = np.ones(n, dtype=bool)
    centers: list[np.ndarray] = []
    floor = max(min_share * n, 1)
    while remaining.sum() >= floor:
        idx = np.flatnonzero(remaining)
        pool = vectors[idx]
        seeds = pool[np.linspace(0, idx.size - 1, min(n_seeds, idx.size)).astype(int)]
        probe = pool[np.linspace(0, idx.size - 1, min(n_probe, idx.size)).astype(int)]
        tol = binomial_sigma(seeds, h)
        support = np.zeros(len(seeds), dtype=np.int64)
        for start in range(0, len(seeds), 64):
            blk = slice(start, start + 64)
            close = np.abs(probe[None, :, :] - seeds[blk, None, :]) <= tol[blk, None, :]
            support[blk] = close.all(axis=2).sum(axis=1)
        center = seeds[int(np.argmax(support))]
        for _ in range(10):
            near = _box_close(pool, center, h, 1.5)
            if not near.any():
                break
            shifted = pool[near].mean(axis=0)
            if np.allclose(shifted, center, atol=1e-12):
                break
            center = shifted
        members = _box_close(pool, center, h, 4.0)
        if members.sum() < floor:
            break
        remaining[idx[members]] = False
        if not any(_same_mode(center, c, h) for c in centers):
            centers.append(center)
    if not centers:
        return [vectors.mean(axis=0)], [1.0]
    owner = _nearest(vectors, centers)
    counts = np.bincount(owner, minlength=len(centers))
    centers = [vectors[owner == k].mean(axis=0) if counts[k] else c for k, c in enumerate(centers)]
    return centers, (counts / n).tolist()


def _nearest(x: np.ndarray, centers) -> np.ndarray:
    best = np.zeros(x.shape[0], dtype=np.int64)
    best_d = np.full(x.shape[0], np.inf)
    for k, c in enumerate(centers):
        sig = np.sqrt(np.clip(c * (1 - c), 1e-4, None))
        d = (np.abs(x - c) / sig).max(axis=1)
        upd = d < best_d
        best[upd] = k
        best_d[upd] = d[upd]
    return best


def nearest_cluster(maps: np.ndarray, centers) -> np.ndarray:
    """Per-pixel index of the closest cluster centre in sigma-scaled distance."""
    M, H, W = maps.shape
    return _nearest(maps.reshape(M, -1).T, centers).reshape(H, W)


def count_semantic_classes(y_star, h: int = 8, num_classes: int | None = None,
                           min_share: float = 0.01) -> MetaStructureSummary:
    """Estimate how many meta-structures (distinct density regimes) a label holds.

    Density vectors of pixels outside the boundary band are clustered by
    mode peeling (see :func:`find_density_clusters`, merge tolerance three
    binomial sigmas); clusters covering at least ``min_share`` of those
    pixels are counted.
    """
    y_star = as_label_image(y_star, num_classes)
    H, W = y_star.shape
    if H < 2 * h + 1 or W < 2 * h + 1:
        raise MaskError(f"image {H}x{W} smaller than the {2 * h + 1}-pixel window")
    maps = density_maps(y_star, h, num_classes)
    stable = stable_pixels(maps, h)
    if not stable.any():
        # no pixel far enough from the border: treat the image as one regime
        mean = maps.reshape(maps.shape[0], -1).mean(axis=1)
        return MetaStructureSummary(1, [mean.tolist()], [1.0], h)
    vectors = maps[:, stable].T
    centers, shares = find_density_clusters(vectors, h, min_share)
    keep = [k for k, s in enumerate(shares) if s >= min_share] or [int(np.argmax(shares))]
    centers = [centers[k] for k in keep]
    shares = [shares[k] for k in keep]
    order = np.argsort(shares, kind="stable")[::-1]
    return MetaStructureSummary(
        num_classes=max(1, len(centers)),
        levels=[centers[k].tolist() for k in order],
        shares=[shares[k] for k in order],
        bandwidth=h,
    )
