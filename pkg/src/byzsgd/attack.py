"""The omniscient adversary.

Every Byzantine worker submits the same vector ``B = mean(honest) + gamma * E``
where ``E`` is either a unit basis vector (``lp-single``) or the all-ones
vector (``linf-all``). The interesting quantity is the largest ``gamma`` for
which an aggregation rule still lets ``B`` through, estimated here by a
bracketing search against an explicit "selected" predicate.

:class:`AttackGeometry` keeps the honest part of one round so that many
``gamma`` values can be probed without recomputing honest-honest distances.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Optional

import numpy as np

from . import gar
from .vectors import (
    INF,
    NormOrder,
    as_gradvec,
    as_stack,
    distances_to,
    norm_order,
    pairwise_distances,
    pnorm_pow,
    root,
)


class AttackMode(enum.Enum):
    SINGLE_COORD = "lp-single"
    ALL_COORDS = "linf-all"


ATTACK_IDS = ("lp-single", "linf-all", "none")


class UnboundedMarginError(RuntimeError):
    """The rule kept accepting the crafted vector at every probed gamma."""

    def __init__(self, rule: str, gamma: float):
        self.rule, self.gamma = rule, gamma
        super().__init__(f"{rule} still selects the crafted vector at gamma={gamma:.3g}; margin is unbounded")


@dataclass(frozen=True)
class AttackSpec:
    """What the Byzantine workers submit and when.

    ``gamma_scale``, when set, replaces the fixed ``gamma``: at every attacked
    epoch the adversary measures the margin on the actual honest gradients and
    uses ``gamma_scale`` times it. ``window`` is ``[start, stop)``; a ``stop``
    of ``None`` keeps the attack on for the whole run.
    """

    mode: AttackMode = AttackMode.SINGLE_COORD
    coord: int = 0
    gamma: float = 0.0
    window: tuple[int, Optional[int]] = (0, None)
    gamma_scale: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", AttackMode(self.mode))
        object.__setattr__(self, "window", tuple(self.window))
        if self.coord < 0:
            raise ValueError(f"attacked coordinate must be >= 0, got {self.coord}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if self.gamma_scale is not None and self.gamma_scale < 0:
            raise ValueError("gamma_scale must be >= 0")
        start, stop = self.window
        if start < 0 or (stop is not None and stop < start):
            raise ValueError(f"invalid attack window {self.window}")

    def active(self, epoch: int) -> bool:
        start, stop = self.window
        return epoch >= start and (stop is None or epoch < stop)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "coord": self.coord,
            "gamma": self.gamma,
            "window": list(self.window),
            "gamma_scale": self.gamma_scale,
        }

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> Optional["AttackSpec"]:
        if data is None or data.get("mode", "none") == "none":
            return None
        return cls(
            mode=AttackMode(data["mode"]),
            coord=int(data.get("coord", 0)),
            gamma=float(data.get("gamma", 0.0)),
            window=tuple(data.get("window", (0, None))),
            gamma_scale=data.get("gamma_scale"),
        )


@dataclass(frozen=True)
class MarginSearch:
    gamma_lo: float = 0.0
    gamma_hi: float = 1.0
    tol_rel: float = 1e-2
    max_iters: int = 60
    trials_per_probe: int = 32
    success_frac: float = 0.5
    max_doublings: int = 40

    def __post_init__(self):
        if not self.gamma_lo < self.gamma_hi:
            raise ValueError("need gamma_lo < gamma_hi")
        if self.tol_rel <= 0:
            raise ValueError("tol_rel must be > 0")
        if not 0 < self.success_frac <= 1:
            raise ValueError("success_frac must be in (0, 1]")
        if self.trials_per_probe < 1:
            raise ValueError("trials_per_probe must be >= 1")


@dataclass(frozen=True)
class GaussianModel:
    """Independent coordinates ``v_j ~ N(mu_j, sigma_j^2)``."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = as_gradvec(self.mu, "mu")
        sigma = as_gradvec(self.sigma, "sigma")
        if mu.shape != sigma.shape:
            raise ValueError("mu and sigma dimensions differ")
        if np.any(sigma < 0):
            raise ValueError("sigma must be non-negative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def uniform(cls, d: int, s: float, mu=0.0) -> "GaussianModel":
        return cls(np.broadcast_to(np.asarray(mu, float), (d,)).copy(), np.full(d, float(s)))

    @property
    def dim(self) -> int:
        return self.mu.size

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.mu + self.sigma * rng.standard_normal((count, self.dim))


def attack_direction(mode: AttackMode, coord: int, d: int) -> np.ndarray:
    if mode is AttackMode.ALL_COORDS:
        return np.ones(d)
    if not 0 <= coord < d:
        raise ValueError(f"attacked coordinate {coord} out of range for d={d}")
    e = np.zeros(d)
    e[coord] = 1.0
    return e


def craft_attack(honest, spec: AttackSpec, gamma: Optional[float] = None) -> np.ndarray:
    """``mean(honest) + gamma * E``; submitted identically by every Byzantine worker."""
    h = as_stack(honest, "honest gradients")
    g = spec.gamma if gamma is None else gamma
    out = h.mean(axis=0)
    if spec.mode is AttackMode.ALL_COORDS:
        out += g
    else:
        if not 0 <= spec.coord < h.shape[1]:
            raise ValueError(f"attacked coordinate {spec.coord} out of range for d={h.shape[1]}")
        out[spec.coord] += g
    return out


class Probe(NamedTuple):
    selected: bool  # the crafted vector made it into the rule's selection
    attacked_value: float  # aggregate's value at the attacked coordinate
    outcome: Optional[gar.AggregationOutcome]


class AttackGeometry:
    """Honest submissions of one round, ready for cheap probing at many gamma.

    For ``lp-single`` the honest-to-B distances follow from one scalar per
    honest worker, since ``B - V_i`` only moves along the attacked
    coordinate; the rules then run on a composed distance matrix. Workers
    are ordered honest first, Byzantine last.
    """

    def __init__(
        self,
        honest,
        n_byzantine: int,
        p: NormOrder = 2,
        mode: AttackMode = AttackMode.SINGLE_COORD,
        coord: int = 0,
        keep_vectors: bool = True,
    ):
        h = as_stack(honest, "honest gradients")
        self.p = norm_order(p)
        self.mode = AttackMode(mode)
        self.n_honest, self.dim = h.shape
        self.n_byzantine = int(n_byzantine)
        if not 0 <= coord < self.dim:
            raise ValueError(f"attacked coordinate {coord} out of range for d={self.dim}")
        self.coord = coord
        mean = h.mean(axis=0)
        self.mean_at_coord = float(mean[coord])
        self.honest_at_coord = h[:, coord].copy()
        self.honest_distances = pairwise_distances(h, self.p)
        if self.mode is AttackMode.SINGLE_COORD:
            diff = h - mean
            self._offset = diff[:, coord].copy()
            diff[:, coord] = 0.0
            self._rest = pnorm_pow(diff, self.p)
        self._honest = h if keep_vectors or self.mode is AttackMode.ALL_COORDS else None
        self._mean = mean if self._honest is not None else None

    @property
    def n(self) -> int:
        return self.n_honest + self.n_byzantine

    def crafted(self, gamma: float) -> np.ndarray:
        if self._mean is None:
            raise RuntimeError("geometry was built without vectors")
        return self._mean + gamma * attack_direction(self.mode, self.coord, self.dim)

    def vectors(self, gamma: float) -> np.ndarray:
        if self._honest is None:
            raise RuntimeError("geometry was built without vectors")
        b = self.crafted(gamma)
        return np.vstack([self._honest, np.broadcast_to(b, (self.n_byzantine, self.dim))])

    def honest_to_crafted(self, gamma: float) -> np.ndarray:
        if self.mode is AttackMode.ALL_COORDS:
            return distances_to(self.crafted(gamma), self._honest, self.p)
        moved = np.abs(self._offset - gamma)
        if self.p is INF:
            return np.maximum(self._rest, moved)
        return root(self._rest + pnorm_pow(moved[:, None], self.p), self.p)

    def distance_matrix(self, gamma: float) -> np.ndarray:
        h, n = self.n_honest, self.n
        out = np.zeros((n, n))
        out[:h, :h] = self.honest_distances
        if self.n_byzantine:
            col = self.honest_to_crafted(gamma)
            out[:h, h:] = col[:, None]
            out[h:, :h] = col[None, :]
        return out

    def probe(self, rule: str, gamma: float, declared_f: Optional[int] = None) -> Probe:
        """Run ``rule`` against ``B(gamma)`` and report whether B got through."""
        f = self.n_byzantine if declared_f is None else declared_f
        h, e = self.n_honest, self.coord
        byz_value = self.mean_at_coord + gamma
        column = np.concatenate([self.honest_at_coord, np.full(self.n_byzantine, byz_value)])

        if rule == "average":
            return Probe(self.n_byzantine > 0, float(column.mean()), None)

        full_path = rule == "bulyan:brute" or (
            rule.startswith("bulyan") and self.mode is AttackMode.ALL_COORDS
        )
        if full_path:
            x = self.vectors(gamma)
            dist = self.distance_matrix(gamma)
            out = gar.aggregate(rule, x, f, self.p, distances=dist)
            sel = list(out.selected_indices)
            if rule.startswith("bulyan"):
                beta = len(sel) - 2 * f
                members = gar.trim_members(x[sel], beta)
                rows = np.asarray(sel)[members]
                if self.mode is AttackMode.ALL_COORDS:
                    hit = bool(np.any(rows >= h))
                else:
                    hit = bool(np.any(rows[:, e] >= h))
            else:
                hit = any(i >= h for i in sel)
            return Probe(hit, float(out.aggregate[e]), out)

        dist = self.distance_matrix(gamma)
        if rule == "krum":
            idx, _ = gar.krum_select(dist, f)
            return Probe(idx >= h, float(column[idx]), None)
        if rule == "geomed":
            idx, _ = gar.medoid_select(dist)
            return Probe(idx >= h, float(column[idx]), None)
        if rule == "brute":
            subset = gar.brute_select(dist, f)
            return Probe(any(i >= h for i in subset), float(column[list(subset)].mean()), None)
        if rule.startswith("bulyan:"):
            inner = rule.split(":", 1)[1]
            sel = gar.bulyan_select(dist, f, inner)
            beta = len(sel) - 2 * f
            values = column[sel]
            means = gar.coordinate_trim(values[:, None], beta)
            members = gar.trim_members(values[:, None], beta)
            hit = any(sel[m] >= h for m in members[:, 0])
            return Probe(hit, float(means[0]), None)
        gar.get_rule(rule)
        raise ValueError(f"rule {rule!r} cannot be probed")

    def typical_distance(self) -> float:
        """Mean l_p distance of honest vectors to their mean; the natural gamma scale."""
        return float(np.mean(self.honest_to_crafted(0.0)))


def search_threshold(
    selected_fraction: Callable[[float], float],
    search: MarginSearch,
    rule: str = "rule",
) -> float:
    """Largest gamma whose selected fraction stays >= ``search.success_frac``.

    Grows the bracket geometrically from ``gamma_hi`` until the predicate
    fails, then bisects to ``tol_rel``. Returns ``gamma_lo`` when even the
    lower end fails.
    """
    ok = lambda g: selected_fraction(g) >= search.success_frac
    lo, hi = search.gamma_lo, search.gamma_hi
    if not ok(lo):
        return lo
    doublings = 0
    while ok(hi):
        lo, hi = hi, 2.0 * hi
        doublings += 1
        if doublings > search.max_doublings:
            raise UnboundedMarginError(rule, hi)
    for _ in range(search.max_iters):
        if hi - lo <= search.tol_rel * hi:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def trial_geometries(
    model: GaussianModel,
    n_honest: int,
    n_byzantine: int,
    p: NormOrder,
    mode: AttackMode,
    trials: int,
    seed: int,
    coord: int = 0,
    keep_vectors: bool = False,
) -> Iterator[AttackGeometry]:
    """One geometry per trial, each from its own ``(seed, trial)`` stream."""
    for k in range(trials):
        honest = model.sample(trial_rng(seed, k), n_honest)
        yield AttackGeometry(honest, n_byzantine, p, mode, coord, keep_vectors=keep_vectors)


def estimate_gamma_max(
    rule: str,
    model: GaussianModel,
    n: int,
    f: int,
    p: NormOrder = 2,
    mode: AttackMode = AttackMode.SINGLE_COORD,
    search: MarginSearch = MarginSearch(),
    seed: int = 0,
    coord: int = 0,
) -> float:
    """Bracketing estimate of the largest gamma the rule still lets through.

    Each probe reuses the same ``trials_per_probe`` honest draws (common
    random numbers), so the selected fraction is a deterministic function of
    gamma for a given seed.
    """
    gar.check_quorum(rule, n, f)
    p = norm_order(p)
    mode = AttackMode(mode)
    n_honest = n - f
    lean = mode is AttackMode.SINGLE_COORD and rule != "bulyan:brute"

    def build():
        return trial_geometries(
            model, n_honest, f, p, mode, search.trials_per_probe, seed, coord, keep_vectors=not lean
        )

    cached = list(build()) if lean else None

    def fraction(gamma: float) -> float:
        geoms = cached if cached is not None else build()
        hits = sum(g.probe(rule, gamma, f).selected for g in geoms)
        return hits / search.trials_per_probe

    return search_threshold(fraction, search, rule)


def round_margin(geometry: AttackGeometry, rule: str, declared_f: int, search: Optional[MarginSearch] = None) -> float:
    """Exact-predicate margin for one concrete round (what an omniscient adversary measures)."""
    if search is None:
        scale = geometry.typical_distance()
        if scale == 0.0:
            return 0.0
        search = MarginSearch(gamma_lo=0.0, gamma_hi=scale, tol_rel=1e-2, trials_per_probe=1, success_frac=1.0)
    return search_threshold(lambda g: float(geometry.probe(rule, g, declared_f).selected), search, rule)


# -- closed-form margin predictions -------------------------------------------


def delta_bar(sigma) -> float:
    """Average folded deviation of a coordinate difference, ``2 sum(sigma) / (d sqrt(pi))``."""
    s = as_gradvec(sigma, "sigma")
    return float(2.0 * s.sum() / (s.size * math.sqrt(math.pi)))


def _finite_p(p) -> int:
    p = norm_order(p)
    if p is INF:
        raise ValueError("closed-form margin predictions need a finite p")
    return p


def predicted_gamma_brute(d: int, p: NormOrder, dbar: float) -> float:
    """Upper bound on the margin against Brute at ``n = 2f + 1``."""
    p = _finite_p(p)
    if d < 1 or dbar < 0:
        raise ValueError("need d >= 1 and dbar >= 0")
    return ((1.0 - 2.0 ** (-p / 2.0)) * d) ** (1.0 / p) * dbar


def predicted_gamma_krum_geomed(d: int, p: NormOrder, q: int, f: float, b: int, dbar: float) -> float:
    """Approximate margin against Krum (``q=2``) or GeoMed (``q=1``) at ``n = 2f + 3``.

    ``b`` is the number of crafted vectors among an honest vector's nearest
    neighbours. A non-positive inner term means no margin and gives 0.
    """
    p = _finite_p(p)
    if q not in (1, 2):
        raise ValueError(f"q must be 1 (GeoMed) or 2 (Krum), got {q}")
    if b not in (0, 1):
        raise ValueError(f"b must be 0 or 1, got {b}")
    inner = ((f + 1 - b) / (2 - b)) ** (p / q) - 2.0 ** (-p / 2.0)
    if inner <= 0:
        return 0.0
    return inner ** (1.0 / p) * d ** (1.0 / p) * dbar
