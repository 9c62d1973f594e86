"""Noise transition matrices (NTMs) and the complete randomization distance.

An NTM ``q`` is stored as an ``M x M`` array with ``q[j, i]`` the probability
that a pixel of true class ``i`` is observed as class ``j``; every column is a
distribution. Class indices are 0-based.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

COLUMN_SUM_TOL = 1e-9


class NTMError(ValueError):
    """Raised for malformed or invalid noise transition matrices."""


@dataclass(frozen=True)
class Verdict:
    valid: bool
    column: int | None = None
    reason: str = ""

    def __bool__(self):
        return self.valid


@dataclass
class CRDResult:
    """Pairwise column distances of an NTM."""

    table: np.ndarray
    min_pair: tuple[int, int]
    min_value: float
    pairs: dict = field(default_factory=dict)


def as_ntm(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise NTMError(f"NTM must be square, got shape {q.shape}")
    if q.shape[0] < 2:
        raise NTMError("NTM needs at least two classes")
    return q


def validate_ntm(q) -> Verdict:
    """Check entries lie in [0, 1] and each column sums to 1.

    Returns a falsy :class:`Verdict` naming the first offending column.
    """
    q = as_ntm(q)
    m = q.shape[0]
    for i in range(m):
        col = q[:, i]
        if not np.all(np.isfinite(col)):
            return Verdict(False, i, f"column {i} has non-finite entries")
        if np.any(col < 0):
            return Verdict(False, i, f"column {i} has a negative entry")
        if np.any(col > 1):
            return Verdict(False, i, f"column {i} has an entry above 1")
        total = float(col.sum())
        if abs(total - 1.0) > COLUMN_SUM_TOL:
            return Verdict(False, i, f"column {i} sums to {total:.12g}")
    return Verdict(True)


def check_ntm(q) -> np.ndarray:
    """Return ``q`` as an array, raising :class:`NTMError` if it is invalid."""
    q = as_ntm(q)
    verdict = validate_ntm(q)
    if not verdict:
        raise NTMError(verdict.reason)
    return q


def ntm_rank(q) -> int:
    """Numerical rank by Gaussian elimination with partial pivoting.

    A pivot counts when its magnitude exceeds ``1e-9 * M``.
    """
    a = check_ntm(q).copy()
    m = a.shape[0]
    tol = 1e-9 * m
    rank = 0
    row = 0
    for col in range(m):
        if row == m:
            break
        pivot = row + int(np.argmax(np.abs(a[row:, col])))
        if abs(a[pivot, col]) <= tol:
            continue
        a[[row, pivot]] = a[[pivot, row]]
        a[row + 1:] -= np.outer(a[row + 1:, col] / a[row, col], a[row])
        row += 1
        rank += 1
    return rank


def crd(q) -> CRDResult:
    """Complete randomization distance: L1 distance between every column pair.

    ``d[u, v] = sum_k |q[k, u] - q[k, v]|``. A value of 2 means the two
    classes map to disjoint observed classes; 0 means they are
    indistinguishable after corruption.
    """
    q = check_ntm(q)
    m = q.shape[0]
    table = np.abs(q[:, :, None] - q[:, None, :]).sum(axis=0)
    pairs = {(u, v): float(table[u, v]) for u, v in combinations(range(m), 2)}
    min_pair = min(pairs, key=lambda uv: (pairs[uv], uv))
    return CRDResult(table=table, min_pair=min_pair, min_value=pairs[min_pair], pairs=pairs)


def identity_ntm(m: int) -> np.ndarray:
    return np.eye(m)


def ntm_to_dict(q) -> dict:
    q = as_ntm(q)
    return {"m": int(q.shape[0]), "columns": q.T.tolist()}


def ntm_from_dict(obj: dict) -> np.ndarray:
    try:
        m = int(obj["m"])
        cols = np.asarray(obj["columns"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise NTMError(f"malformed NTM object: {exc}") from exc
    if cols.shape != (m, m):
        raise NTMError(f"expected {m} columns of length {m}, got shape {cols.shape}")
    return check_ntm(cols.T)
