"""Extraction-of-meta-structure (EMS) refinement of a coarse binary mask."""

from dataclasses import dataclass

import numpy as np

from metastruct.masks import as_binary
from metastruct.morphology import skeletonize
from metastruct.seeding import as_rng


@dataclass(frozen=True)
class EmsParams:
    r: int = 1
    p_sample: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"shift radius must be >= 0, got {self.r}")
        if not 0.0 < self.p_sample <= 1.0:
            raise ValueError(f"p_sample must lie in (0, 1], got {self.p_sample}")


def shift_pixels(mask, r: int, rng) -> np.ndarray:
    """Move every foreground pixel by an independent offset in [-r, r]^2.

    Offsets are clipped at the image border; pixels landing on the same spot
    merge into one.
    """
    m = as_binary(mask)
    out = np.zeros(m.shape, dtype=bool)
    ys, xs = np.nonzero(m)
    if r == 0 or ys.size == 0:
        out[ys, xs] = True
        return out
    dy = rng.integers(-r, r + 1, size=ys.size)
    dx = rng.integers(-r, r + 1, size=ys.size)
    out[np.clip(ys + dy, 0, m.shape[0] - 1), np.clip(xs + dx, 0, m.shape[1] - 1)] = True
    return out


def ems_refine(s_tilde, params: EmsParams, rng=None) -> np.ndarray:
    """Skeletonize, randomly shift within ``r``, then keep pixels with ``p_sample``.

    ``rng`` overrides ``params.seed`` when a caller threads its own generator.
    """
    rng = as_rng(params.seed if rng is None else rng)
    skeleton = skeletonize(s_tilde).astype(bool)
    shifted = shift_pixels(skeleton, params.r, rng)
    keep = rng.random(shifted.shape) < params.p_sample
    return (shifted & keep).astype(np.uint8)
