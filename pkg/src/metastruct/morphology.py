"""Binary morphology on masks: square-element dilation/erosion and thinning.

Pixels outside the image are background for every operation here.
"""

import numpy as np
from scipy import ndimage

from metastruct.masks import MaskError, as_binary

EIGHT = np.ones((3, 3), dtype=bool)


def _square(radius: int) -> np.ndarray:
    if radius < 1:
        raise MaskError(f"structuring element radius must be >= 1, got {radius}")
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def dilate(y, radius: int = 1) -> np.ndarray:
    """Dilate a binary mask by a (2r+1)x(2r+1) square."""
    m = as_binary(y)
    out = ndimage.binary_dilation(m, structure=_square(radius), border_value=0)
    return out.astype(np.uint8)


def erode(y, radius: int = 1) -> np.ndarray:
    """Erode a binary mask by a (2r+1)x(2r+1) square; the outside counts as background."""
    m = as_binary(y)
    out = ndimage.binary_erosion(m, structure=_square(radius), border_value=0)
    return out.astype(np.uint8)


def count_components(y) -> int:
    """Number of 8-connected foreground components."""
    _, n = ndimage.label(as_binary(y), structure=EIGHT)
    return int(n)


def _neighbours(img: np.ndarray):
    # P2..P9 clockwise from north, on a zero-padded copy
    p = np.pad(img, 1)
    h, w = img.shape
    c = lambda di, dj: p[1 + di:1 + di + h, 1 + dj:1 + dj + w]
    return [c(-1, 0), c(-1, 1), c(0, 1), c(1, 1), c(1, 0), c(1, -1), c(0, -1), c(-1, -1)]


def _deletable(nb, first: bool):
    p2, p3, p4, p5, p6, p7, p8, p9 = nb
    b = sum(n.astype(np.int8) for n in nb)
    seq = nb + [nb[0]]
    a = sum((~seq[k] & seq[k + 1]).astype(np.int8) for k in range(8))
    cond = (b >= 2) & (b <= 6) & (a == 1)
    if first:
        cond &= ~(p2 & p4 & p6) & ~(p4 & p6 & p8)
    else:
        cond &= ~(p2 & p4 & p8) & ~(p2 & p6 & p8)
    return cond


def _topology_kept(before: np.ndarray, after: np.ndarray) -> bool:
    lab, n = ndimage.label(before, structure=EIGHT)
    _, n_after = ndimage.label(after, structure=EIGHT)
    if n_after != n:
        return False
    survivors = np.unique(lab[after])
    return survivors.size == n


def _sequential_pass(img: np.ndarray, candidates: np.ndarray, first: bool) -> bool:
    # Serial deletion re-checks each pixel on the current image. With a single
    # 0->1 transition and at least two neighbours, removing a pixel cannot
    # split or erase a component.
    changed = False
    h, w = img.shape
    for i, j in zip(*np.nonzero(candidates)):
        i0, i1, j0, j1 = max(i - 1, 0), min(i + 2, h), max(j - 1, 0), min(j + 2, w)
        patch = np.zeros((3, 3), dtype=bool)
        patch[i0 - i + 1:i1 - i + 1, j0 - j + 1:j1 - j + 1] = img[i0:i1, j0:j1]
        nb = [np.array(v) for v in (patch[0, 1], patch[0, 2], patch[1, 2], patch[2, 2],
                                    patch[2, 1], patch[2, 0], patch[1, 0], patch[0, 0])]
        if _deletable(nb, first):
            img[i, j] = False
            changed = True
    return changed


def _break_solid_blocks(img: np.ndarray) -> None:
    # A pixel whose 3x3 block is all foreground can survive Zhang-Suen when
    # holes pin its neighbours (B = 7). Removing the north neighbour of such a
    # pixel never changes 8-connectivity: every foreground pixel around that
    # neighbour touches the block, so its ring stays one component.
    while True:
        full = ndimage.binary_erosion(img, structure=EIGHT, border_value=0)
        if not full.any():
            return
        for i, j in zip(*np.nonzero(full)):
            if img[i - 1:i + 2, j - 1:j + 2].all():
                img[i - 1, j] = False


def skeletonize(y) -> np.ndarray:
    """Zhang-Suen thinning with 8-connectivity.

    Each sub-iteration removes its candidates in parallel. When a parallel
    removal would erase or split a component (2-pixel-thick diagonals, 2x2
    blocks) that sub-iteration is redone serially instead. A final pass
    removes any remaining pixel that sits in a solid 3x3 block.
    """
    img = as_binary(y).copy()
    while True:
        changed = False
        for first in (True, False):
            cand = img & _deletable(_neighbours(img), first)
            if not cand.any():
                continue
            trial = img & ~cand
            if _topology_kept(img, trial):
                img = trial
                changed = True
            else:
                changed |= _sequential_pass(img, cand, first)
        if not changed:
            break
    _break_solid_blocks(img)
    return img.astype(np.uint8)
