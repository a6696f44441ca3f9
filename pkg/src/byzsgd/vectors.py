"""Dense vector helpers: validation, l_p norms and pairwise distance matrices.

Gradients and parameters are plain 1-D ``float64`` numpy arrays. A stack of
``n`` submitted gradients is an ``(n, d)`` array whose row order is the
worker-id order.
"""

from __future__ import annotations

import enum
from typing import Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform


class _Infinity(enum.Enum):
    INFINITY = "inf"

    def __repr__(self) -> str:
        return "INF"

    def __str__(self) -> str:
        return "inf"


INF = _Infinity.INFINITY
"""The l_infinity norm order."""

NormOrder = Union[int, _Infinity]


def norm_order(p) -> NormOrder:
    """Validate ``p`` as a norm order; accepts positive ints, ``INF`` or "inf"."""
    if p is INF:
        return INF
    if isinstance(p, str):
        text = p.strip().lower()
        if text in ("inf", "infinity"):
            return INF
        try:
            p = int(text)
        except ValueError:
            raise ValueError(f"invalid norm order {p!r}") from None
    if isinstance(p, (bool, float)) or not isinstance(p, (int, np.integer)):
        # float("inf") is deliberately rejected: use INF.
        raise TypeError(f"norm order must be a positive int or INF, got {p!r}")
    if p < 1:
        raise ValueError(f"norm order must be >= 1, got {p}")
    return int(p)


def as_gradvec(v, name: str = "vector") -> np.ndarray:
    """Return ``v`` as a finite, non-empty 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite coordinates")
    return arr


def as_stack(vectors, name: str = "vectors") -> np.ndarray:
    """Stack a sequence of equal-length vectors into a finite ``(n, d)`` array."""
    if isinstance(vectors, np.ndarray):
        arr = np.asarray(vectors, dtype=np.float64)
    else:
        rows = [np.asarray(v, dtype=np.float64) for v in vectors]
        if not rows:
            raise ValueError(f"{name} is empty")
        dims = {r.shape for r in rows}
        if len(dims) != 1:
            raise ValueError(f"{name} have mismatched dimensions: {sorted(dims)}")
        arr = np.stack(rows)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must form a non-empty (n, d) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contain non-finite coordinates")
    return arr


def lp_norm(v, p: NormOrder = 2) -> float:
    p = norm_order(p)
    v = as_gradvec(v)
    a = np.abs(v)
    if p is INF:
        return float(a.max())
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(np.dot(a, a)))
    # Scale by the max to avoid overflow in a**p.
    m = a.max()
    if m == 0.0:
        return 0.0
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


def lp_dist(a, b, p: NormOrder = 2) -> float:
    a = as_gradvec(a, "a")
    b = as_gradvec(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    return lp_norm(a - b, p)


def _scipy_metric(p: NormOrder) -> tuple[str, dict]:
    if p is INF:
        return "chebyshev", {}
    if p == 1:
        return "cityblock", {}
    if p == 2:
        return "euclidean", {}
    return "minkowski", {"p": p}


def pairwise_distances(vectors, p: NormOrder = 2) -> np.ndarray:
    """Symmetric ``(n, n)`` matrix of l_p distances with an exact zero diagonal."""
    p = norm_order(p)
    x = as_stack(vectors)
    if x.shape[0] < 2:
        return np.zeros((x.shape[0], x.shape[0]))
    metric, kw = _scipy_metric(p)
    return squareform(pdist(x, metric, **kw))


def distances_to(point, vectors, p: NormOrder = 2) -> np.ndarray:
    """l_p distance from ``point`` to every row of ``vectors``."""
    p = norm_order(p)
    x = as_stack(vectors)
    point = as_gradvec(point, "point")
    if point.size != x.shape[1]:
        raise ValueError(f"dimension mismatch: {point.size} vs {x.shape[1]}")
    metric, kw = _scipy_metric(p)
    return cdist(point[None, :], x, metric, **kw)[0]


def pnorm_pow(diff: np.ndarray, p: NormOrder, axis: int = -1) -> np.ndarray:
    """Row-wise ``sum |x|^p`` (or ``max |x|`` for INF) along ``axis``.

    Building block for distance updates that change a single coordinate.
    """
    a = np.abs(diff)
    if p is INF:
        return a.max(axis=axis)
    if p == 1:
        return a.sum(axis=axis)
    if p == 2:
        return np.einsum("...i,...i->...", a, a) if axis == -1 else (a * a).sum(axis=axis)
    return (a ** p).sum(axis=axis)


def root(powsum, p: NormOrder):
    """Inverse of :func:`pnorm_pow` for finite ``p``; identity for INF."""
    if p is INF or p == 1:
        return powsum
    if p == 2:
        return np.sqrt(powsum)
    return np.asarray(powsum) ** (1.0 / p)


def mean_of(vectors: Sequence) -> np.ndarray:
    return as_stack(vectors).mean(axis=0)
