"""Gradient aggregation rules (GARs).

Every rule takes an ``(n, d)`` stack of submitted gradients (row order is
worker order), the declared Byzantine count ``f`` and a norm order ``p``,
and returns an :class:`AggregationOutcome`. Distance-based rules accept a
precomputed distance matrix so that callers (Bulyan, the attack search, the
simulator) can share one matrix between several evaluations.

All tie-breaks are deterministic: lowest worker index for vector selection,
smallest value then lowest index for the coordinate-wise steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .vectors import NormOrder, as_stack, distances_to, norm_order, pairwise_distances

DEFAULT_BRUTE_CAP = 10**6


class QuorumError(ValueError):
    """Raised when too few vectors are submitted for the declared ``f``."""

    def __init__(self, rule: str, n: int, f: int, required: int):
        self.rule, self.n, self.f, self.required = rule, n, f, required
        super().__init__(f"{rule} requires n >= {required} for f={f}, got n={n}")


class BruteFeasibilityError(RuntimeError):
    """Raised when Brute would enumerate more subsets than allowed."""


@dataclass(frozen=True)
class AggregationOutcome:
    aggregate: np.ndarray
    selected_indices: tuple[int, ...]
    scores: Optional[np.ndarray] = field(default=None, compare=False)


def _prepare(vectors, f: int) -> np.ndarray:
    x = as_stack(vectors)
    if not 0 <= f < x.shape[0]:
        raise ValueError(f"need 0 <= f < n, got f={f}, n={x.shape[0]}")
    return x


def _distances(x: np.ndarray, p: NormOrder, distances) -> np.ndarray:
    if distances is None:
        return pairwise_distances(x, p)
    d = np.asarray(distances, dtype=np.float64)
    if d.shape != (x.shape[0], x.shape[0]):
        raise ValueError(f"distance matrix shape {d.shape} does not match n={x.shape[0]}")
    return d


# -- average -----------------------------------------------------------------


def average(vectors, f: int = 0, p: NormOrder = 2, *, distances=None) -> AggregationOutcome:
    x = _prepare(vectors, f)
    return AggregationOutcome(x.mean(axis=0), tuple(range(x.shape[0])))


# -- Krum --------------------------------------------------------------------


def krum_scores(distances: np.ndarray, f: int) -> np.ndarray:
    """Sum of squared distances to the ``n - f - 2`` nearest other vectors."""
    n = distances.shape[0]
    if n < 2 * f + 3:
        raise QuorumError("krum", n, f, 2 * f + 3)
    k = n - f - 2
    sq = np.square(distances)
    np.fill_diagonal(sq, np.inf)
    nearest = np.sort(sq, axis=1)[:, :k]
    return nearest.sum(axis=1)


def krum_select(distances: np.ndarray, f: int) -> tuple[int, np.ndarray]:
    scores = krum_scores(distances, f)
    return int(np.argmin(scores)), scores


def krum(vectors, f: int, p: NormOrder = 2, *, distances=None) -> AggregationOutcome:
    x = _prepare(vectors, f)
    if x.shape[0] < 2 * f + 3:
        raise QuorumError("krum", x.shape[0], f, 2 * f + 3)
    idx, scores = krum_select(_distances(x, norm_order(p), distances), f)
    return AggregationOutcome(x[idx].copy(), (idx,), scores)


# -- GeoMed (medoid) ---------------------------------------------------------


def medoid_select(distances: np.ndarray) -> tuple[int, np.ndarray]:
    scores = distances.sum(axis=1)
    return int(np.argmin(scores)), scores


def medoid_geomed(vectors, f: int = 0, p: NormOrder = 2, *, distances=None) -> AggregationOutcome:
    """Medoid of the submitted vectors (smallest index among minimisers)."""
    x = _prepare(vectors, f)
    if x.shape[0] < 2:
        raise QuorumError("geomed", x.shape[0], f, 2)
    idx, scores = medoid_select(_distances(x, norm_order(p), distances))
    return AggregationOutcome(x[idx].copy(), (idx,), scores)


geomed = medoid_geomed


# -- Brute -------------------------------------------------------------------


def subset_count(n: int, k: int) -> int:
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    return math.comb(n, k)


def brute_select(distances: np.ndarray, f: int, max_subsets: int = DEFAULT_BRUTE_CAP) -> tuple[int, ...]:
    """Lexicographically first ``(n - f)``-subset of minimal diameter.

    Subsets are walked in lexicographic order; a branch is cut as soon as its
    running diameter reaches the best one found, which also implements the
    tie-break (earlier subsets win).
    """
    n = distances.shape[0]
    if n < 2 * f + 1:
        raise QuorumError("brute", n, f, 2 * f + 1)
    k = n - f
    total = subset_count(n, k)
    if total > max_subsets:
        raise BruteFeasibilityError(
            f"brute would enumerate C({n},{k}) = {total} subsets (cap {max_subsets}); "
            "the rule is combinatorial in n and f"
        )
    if k == n:
        return tuple(range(n))

    best = math.inf
    best_set: tuple[int, ...] = ()
    chosen: list[int] = []

    def walk(start: int, diameter: float) -> None:
        nonlocal best, best_set
        if len(chosen) == k:
            best, best_set = diameter, tuple(chosen)
            return
        last = n - (k - len(chosen))
        for i in range(start, last + 1):
            d = max(diameter, distances[i, chosen].max()) if chosen else diameter
            if d >= best:
                continue
            chosen.append(i)
            walk(i + 1, d)
            chosen.pop()

    walk(0, 0.0)
    return best_set


def brute(
    vectors,
    f: int,
    p: NormOrder = 2,
    *,
    distances=None,
    max_subsets: int = DEFAULT_BRUTE_CAP,
) -> AggregationOutcome:
    x = _prepare(vectors, f)
    if x.shape[0] < 2 * f + 1:
        raise QuorumError("brute", x.shape[0], f, 2 * f + 1)
    subset = brute_select(_distances(x, norm_order(p), distances), f, max_subsets)
    return AggregationOutcome(x[list(subset)].mean(axis=0), subset)


# -- coordinate-wise steps of Bulyan ------------------------------------------


def _check_trim(values, beta: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] == 0:
        raise ValueError("coordinate trimming needs a non-empty (theta, d) array")
    if not 1 <= beta <= v.shape[0]:
        raise ValueError(f"need 1 <= beta <= theta={v.shape[0]}, got beta={beta}")
    return v


def coordinate_trim(values, beta: int) -> np.ndarray:
    """Per column of a ``(theta, d)`` array, average the ``beta`` values
    closest to the column's 1-D medoid.

    The medoid of a column is the lower median (every minimiser of the sum of
    absolute deviations among the column's own values; ties go to the smaller
    value). Closeness ties go to the smaller value. The chosen values form a
    contiguous run of the sorted column, grown outwards from the median.
    """
    v = _check_trim(values, beta)
    theta, d = v.shape
    s = np.sort(v, axis=0)
    mid = (theta - 1) // 2
    med = s[mid]
    lo = np.full(d, mid)
    hi = np.full(d, mid)
    cols = np.arange(d)
    for _ in range(beta - 1):
        has_left = lo > 0
        has_right = hi < theta - 1
        left_gap = np.abs(s[np.maximum(lo - 1, 0), cols] - med)
        right_gap = np.abs(s[np.minimum(hi + 1, theta - 1), cols] - med)
        go_left = has_left & (~has_right | (left_gap <= right_gap))
        lo = lo - go_left
        hi = hi + ~go_left
    rows = np.arange(theta)[:, None]
    window = (rows >= lo) & (rows <= hi)
    return np.where(window, s, 0.0).sum(axis=0) / beta


def trim_members(values, beta: int) -> np.ndarray:
    """Row positions kept by :func:`coordinate_trim`, as a ``(beta, d)`` array.

    Same closeness order, with equal values resolved by lower row.
    """
    vt = _check_trim(values, beta).T
    theta = vt.shape[1]
    med = np.sort(vt, axis=1)[:, (theta - 1) // 2]
    gap = np.abs(vt - med[:, None])
    rows = np.broadcast_to(np.arange(theta), vt.shape)
    return np.lexsort((rows, vt, gap), axis=-1)[:, :beta].T


def coord_median(values) -> float:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("coord_median of an empty sequence")
    return float(np.sort(v)[(v.size - 1) // 2])


def trimmed_coord_mean(values, beta: int) -> float:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("trimmed_coord_mean of an empty sequence")
    return float(coordinate_trim(v[:, None], beta)[0])


# -- Bulyan --------------------------------------------------------------------

_INNER_QUORUM: dict[str, Callable[[int], int]] = {
    "krum": lambda f: 2 * f + 3,
    "geomed": lambda f: 2,
    "brute": lambda f: 2 * f + 1,
}


def _largest_legal_f(inner: str, n: int, f: int) -> Optional[int]:
    need = _INNER_QUORUM[inner]
    for g in range(f, -1, -1):
        if n >= need(g):
            return g
    return None


def bulyan_select(
    distances: np.ndarray,
    f: int,
    inner: str = "krum",
    *,
    vectors: Optional[np.ndarray] = None,
    p: NormOrder = 2,
    max_subsets: int = DEFAULT_BRUTE_CAP,
) -> list[int]:
    """Recursive selection phase: ``theta = n - 2f`` picks by the inner rule.

    Each pick runs the inner rule on the vectors still in the received set and
    moves the received vector closest to the inner output into the selection.
    The distance matrix is only sliced, never recomputed.

    The last two picks see ``2f + 2`` and ``2f + 1`` vectors, below Krum's
    ``2f + 3`` quorum; there the inner rule runs with the largest ``f`` its
    quorum allows (and with fewer than 3 vectors left, Krum degrades to taking
    the lowest remaining index).
    """
    if inner not in _INNER_QUORUM:
        raise ValueError(f"unknown inner rule {inner!r}")
    if inner == "brute" and vectors is None:
        raise ValueError("bulyan:brute needs the vectors to locate the subset mean")
    n = distances.shape[0]
    if n < 4 * f + 3:
        raise QuorumError(f"bulyan:{inner}", n, f, 4 * f + 3)
    theta = n - 2 * f
    remaining = list(range(n))
    selection: list[int] = []
    while len(selection) < theta:
        g = _largest_legal_f(inner, len(remaining), f)
        if g is None:
            pos = 0
        else:
            sub = distances[np.ix_(remaining, remaining)]
            if inner == "krum":
                pos, _ = krum_select(sub, g)
            elif inner == "geomed":
                pos, _ = medoid_select(sub)
            else:
                subset = brute_select(sub, g, max_subsets)
                rows = vectors[remaining]
                center = rows[list(subset)].mean(axis=0)
                pos = int(np.argmin(distances_to(center, rows, p)))
        selection.append(remaining.pop(pos))
    return selection


def bulyan(
    vectors,
    f: int,
    inner: str = "krum",
    p: NormOrder = 2,
    *,
    distances=None,
    max_subsets: int = DEFAULT_BRUTE_CAP,
) -> AggregationOutcome:
    x = _prepare(vectors, f)
    n = x.shape[0]
    if n < 4 * f + 3:
        raise QuorumError(f"bulyan:{inner}", n, f, 4 * f + 3)
    p = norm_order(p)
    dist = _distances(x, p, distances)
    selection = bulyan_select(dist, f, inner, vectors=x, p=p, max_subsets=max_subsets)
    beta = len(selection) - 2 * f
    agg = coordinate_trim(x[selection], beta)
    return AggregationOutcome(agg, tuple(selection))


def bulyan_params(n: int, f: int) -> tuple[int, int]:
    """``(theta, beta)`` for Bulyan with ``n`` inputs and ``f`` Byzantine."""
    if n < 4 * f + 3:
        raise QuorumError("bulyan", n, f, 4 * f + 3)
    theta = n - 2 * f
    return theta, theta - 2 * f


# -- registry ------------------------------------------------------------------

RULE_IDS = (
    "average",
    "krum",
    "geomed",
    "brute",
    "bulyan:krum",
    "bulyan:geomed",
    "bulyan:brute",
)


def _bulyan_with(inner: str):
    def rule(vectors, f, p=2, *, distances=None):
        return bulyan(vectors, f, inner, p, distances=distances)

    rule.__name__ = f"bulyan_{inner}"
    return rule


_RULES = {
    "average": average,
    "krum": krum,
    "geomed": medoid_geomed,
    "brute": brute,
    "bulyan:krum": _bulyan_with("krum"),
    "bulyan:geomed": _bulyan_with("geomed"),
    "bulyan:brute": _bulyan_with("brute"),
}


def get_rule(rule_id: str):
    try:
        return _RULES[rule_id]
    except KeyError:
        raise ValueError(f"unknown rule {rule_id!r}; choose from {', '.join(RULE_IDS)}") from None


def aggregate(rule_id: str, vectors, f: int, p: NormOrder = 2, *, distances=None) -> AggregationOutcome:
    return get_rule(rule_id)(vectors, f, p, distances=distances)


def min_workers(rule_id: str, f: int) -> int:
    """Smallest ``n`` the rule accepts with ``f`` declared Byzantine workers."""
    get_rule(rule_id)
    if rule_id.startswith("bulyan"):
        return 4 * f + 3
    if rule_id == "krum":
        return 2 * f + 3
    if rule_id == "brute":
        return 2 * f + 1
    if rule_id == "geomed":
        return max(2, f + 1)
    return f + 1


def check_quorum(rule_id: str, n: int, f: int) -> None:
    need = min_workers(rule_id, f)
    if n < need:
        raise QuorumError(rule_id, n, f, need)
