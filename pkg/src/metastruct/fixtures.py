"""Deterministic synthetic scenes for density analysis and iGTT runs."""

from dataclasses import dataclass, field

import numpy as np

from metastruct.seeding import stage_rng

KINDS = ("circle-in-rectangle", "stripes-3", "blobs-with-intensity")


@dataclass(frozen=True)
class FixtureSpec:
    kind: str = "circle-in-rectangle"
    size: int = 256
    seed: int = 0
    params: dict = field(default_factory=dict)


def circle_in_rectangle(size: int = 256, radius: int = 64, center: tuple | None = None) -> np.ndarray:
    """Binary scene: class 1 inside a centred disk, class 0 elsewhere."""
    cy, cx = center if center is not None else (size // 2, size // 2)
    yy, xx = np.mgrid[:size, :size]
    return (((yy - cy) ** 2 + (xx - cx) ** 2) <= radius ** 2).astype(np.uint8)


def stripes3(size: int = 256, width: int | None = None) -> np.ndarray:
    """Three vertical bands labelled 0, 1, 2 from left to right."""
    width = size if width is None else width
    cols = (np.arange(width) * 3) // width
    return np.broadcast_to(cols, (size, width)).astype(np.uint8).copy()


def blobs(size: int = 128, seed: int = 0, n_blobs: int = 16, radius: tuple = (8, 12),
          fg_mean: float = 0.7, bg_mean: float = 0.3, noise: float = 0.1):
    """Random disks plus a noisy intensity image.

    Returns ``(mask, intensity)``; intensities are Gaussian around
    ``fg_mean`` / ``bg_mean`` and clipped to [0, 1].
    """
    rng = stage_rng(seed, "fixture-blobs")
    yy, xx = np.mgrid[:size, :size]
    mask = np.zeros((size, size), dtype=bool)
    lo, hi = radius
    for _ in range(n_blobs):
        r = rng.integers(lo, hi + 1)
        cy, cx = rng.integers(r, size - r, size=2)
        mask |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    means = np.where(mask, fg_mean, bg_mean)
    intensity = np.clip(means + noise * rng.standard_normal((size, size)), 0.0, 1.0)
    return mask.astype(np.uint8), intensity


def gen_fixture(spec: FixtureSpec):
    """Build the scene described by ``spec``.

    Returns the label image, or ``(mask, intensity)`` for the blobs kind.
    """
    if spec.size < 64:
        raise ValueError(f"fixture size must be >= 64, got {spec.size}")
    p = dict(spec.params)
    if spec.kind == "circle-in-rectangle":
        return circle_in_rectangle(spec.size, p.get("radius", 64))
    if spec.kind == "stripes-3":
        return stripes3(spec.size, p.get("width"))
    if spec.kind == "blobs-with-intensity":
        return blobs(spec.size, spec.seed, **p)
    raise ValueError(f"unknown fixture kind {spec.kind!r}; expected one of {KINDS}")
