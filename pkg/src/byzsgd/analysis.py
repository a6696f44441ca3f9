"""Monte-Carlo studies of aggregation rules on the Gaussian gradient model.

* :func:`check_resilience_condition1` estimates ``E[F]`` and compares its
  projection on the true gradient with ``(1 - sin alpha) |G|^2``.
* :func:`measure_bulyan_leeway` measures how far the aggregate can be pushed
  at the attacked coordinate, as a function of ``d``.
* :func:`gamma_scaling_study` fits the attack margin against ``d``.
* :func:`complexity_study` fits aggregation wall time against ``n``.

Scaling results come back as a :class:`ScalingReport` with a log-log
least-squares fit.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import gar
from .attack import (
    AttackGeometry,
    AttackMode,
    GaussianModel,
    MarginSearch,
    UnboundedMarginError,
    delta_bar,
    estimate_gamma_max,
    predicted_gamma_brute,
    predicted_gamma_krum_geomed,
    trial_geometries,
    trial_rng,
)
from .vectors import INF, NormOrder, norm_order

SCALING_COLUMNS = ("sweep_value", "measured", "predicted", "slope", "residual")


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    return value


# -- log-log fits ---------------------------------------------------------------


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    residual: float  # RMS of the log-space residuals


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    """Ordinary least squares of ``log y`` on ``log x``.

    Non-positive measurements make the fit undefined and give ``nan``s.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 3:
        raise ValueError("need >= 3 points for a slope")
    if x.shape != y.shape:
        raise ValueError("x and y lengths differ")
    if np.any(np.diff(x) <= 0) or x[0] <= 0:
        raise ValueError("sweep values must be positive and strictly increasing")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        return LogLogFit(math.nan, math.nan, math.nan)
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return LogLogFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))


@dataclass
class ScalingReport:
    study: str
    sweep_name: str  # "d" or "n"
    sweep: list
    measured: list
    predicted: Optional[list] = None
    slope: float = math.nan
    intercept: float = math.nan
    residual: float = math.nan
    unbounded: bool = False
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @classmethod
    def fitted(cls, study, sweep_name, sweep, measured, **kw) -> "ScalingReport":
        fit = loglog_fit(sweep, measured)
        return cls(study, sweep_name, list(sweep), [float(m) for m in measured],
                   slope=fit.slope, intercept=fit.intercept, residual=fit.residual, **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SCALING_COLUMNS)
        pred = self.predicted or [math.nan] * len(self.sweep)
        for s, m, q in zip(self.sweep, self.measured, pred):
            w.writerow([s, repr(float(m)), repr(float(q)), repr(self.slope), repr(self.residual)])
        return buf.getvalue()

    def summary(self) -> dict:
        out = asdict(self)
        out["status"] = "unbounded" if self.unbounded else "ok"
        return _jsonable(out)

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)

    def write(self, out_dir, stem: Optional[str] = None) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.study
        csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
        csv_path.write_text(self.to_csv())
        json_path.write_text(self.to_json() + "\n")
        return csv_path, json_path


# -- condition 1 ----------------------------------------------------------------


@dataclass
class ResilienceReport:
    rule: str
    trials: int
    mean_inner_product: float
    bound: float
    alpha: float
    angle: float  # angle between the Monte-Carlo mean of F and G
    moments: dict  # r -> E|F|^r
    gradient_norm: float
    gamma: Optional[float] = None

    @property
    def positive(self) -> bool:
        return self.mean_inner_product > 0

    @property
    def holds(self) -> bool:
        return self.positive and self.mean_inner_product >= self.bound

    def summary(self) -> dict:
        out = asdict(self)
        out["positive"] = self.positive
        out["holds"] = self.holds
        return _jsonable(out)

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


ByzantineStrategy = Union[str, Callable[[np.ndarray, np.random.Generator], np.ndarray]]


def _quick_search(trials: int) -> MarginSearch:
    return MarginSearch(trials_per_probe=trials, tol_rel=1e-2)


def check_resilience_condition1(
    rule: str,
    model: GaussianModel,
    n: int,
    f: int,
    byzantine_strategy: ByzantineStrategy = "crafted",
    trials: int = 2000,
    alpha: float = math.pi / 4,
    seed: int = 0,
    p: NormOrder = 2,
    *,
    gamma: Optional[float] = None,
    margin_trials: int = 200,
    coord: int = 0,
) -> ResilienceReport:
    """Estimate ``E[F]`` for ``rule`` with ``f`` of the ``n`` inputs adversarial.

    Strategies: ``"crafted"`` submits ``mean(honest) + gamma * e_coord`` with
    ``gamma`` defaulting to half the measured margin; ``"opposite"`` submits
    ``-10 G``; ``"honest"`` fills the slots with extra honest draws. A
    callable receives ``(honest, rng)`` and returns the ``(f, d)`` block.
    """
    gar.check_quorum(rule, n, f)
    p = norm_order(p)
    g = model.mu
    g_sq = float(g @ g)
    if g_sq == 0.0:
        raise ValueError("the true gradient (model mean) is zero; condition 1 is vacuous")
    aggregate = gar.get_rule(rule)
    n_honest = n - f

    if byzantine_strategy == "crafted" and f > 0 and gamma is None:
        try:
            gamma = 0.5 * estimate_gamma_max(rule, model, n, f, p, search=_quick_search(margin_trials),
                                             seed=seed + 1, coord=coord)
        except UnboundedMarginError:
            gamma = 10.0 * math.sqrt(g_sq) * math.sqrt(model.dim)

    def byzantine(honest, rng):
        if f == 0:
            return np.empty((0, model.dim))
        if callable(byzantine_strategy):
            return np.asarray(byzantine_strategy(honest, rng), dtype=np.float64).reshape(f, model.dim)
        if byzantine_strategy == "crafted":
            b = honest.mean(axis=0)
            b[coord] += gamma
            return np.broadcast_to(b, (f, model.dim))
        if byzantine_strategy == "opposite":
            return np.broadcast_to(-10.0 * g, (f, model.dim))
        if byzantine_strategy == "honest":
            return model.sample(rng, f)
        raise ValueError(f"unknown Byzantine strategy {byzantine_strategy!r}")

    total = np.zeros(model.dim)
    powers = {2: 0.0, 3: 0.0, 4: 0.0}
    for k in range(trials):
        rng = trial_rng(seed, k)
        honest = model.sample(rng, n_honest)
        x = np.vstack([honest, byzantine(honest, rng)])
        out = aggregate(x, f, p).aggregate
        total += out
        norm = float(np.linalg.norm(out))
        for r in powers:
            powers[r] += norm**r
    mean_f = total / trials
    inner = float(mean_f @ g)
    norm_mean = float(np.linalg.norm(mean_f))
    cos = inner / (norm_mean * math.sqrt(g_sq)) if norm_mean > 0 else -1.0
    angle = float(math.acos(min(1.0, max(-1.0, cos))))
    return ResilienceReport(
        rule=rule,
        trials=trials,
        mean_inner_product=inner,
        bound=(1.0 - math.sin(alpha)) * g_sq,
        alpha=alpha,
        angle=angle,
        moments={r: s / trials for r, s in powers.items()},
        gradient_norm=math.sqrt(g_sq),
        gamma=gamma,
    )


# -- leeway at the attacked coordinate -------------------------------------------

DEFAULT_LEEWAY_GRID = tuple(round(0.1 * k, 1) for k in range(41))


def measure_bulyan_leeway(
    s: float,
    n: int,
    f: int,
    dims: Sequence[int],
    gamma_grid: Sequence[float] = DEFAULT_LEEWAY_GRID,
    trials: int = 200,
    seed: int = 0,
    p: NormOrder = 2,
    rule: str = "bulyan:krum",
    coord: int = 0,
) -> ScalingReport:
    """Worst mean deviation ``|F[e] - g_k[e]|`` over a gamma sweep, per dimension.

    ``gamma_grid`` is in units of ``delta_bar * d**(1/p)`` so that the same
    grid tracks a margin growing with ``d``. The deviation is averaged over
    trials and honest workers; the reported value is the worst grid point.
    """
    gar.check_quorum(rule, n, f)
    p = norm_order(p)
    dims = [int(d) for d in dims]
    root_p = 1.0 if p is INF else None
    measured, worst_gamma = [], []
    for d in dims:
        model = GaussianModel.uniform(d, s)
        unit = delta_bar(model.sigma) * (root_p if root_p is not None else d ** (1.0 / p))
        geoms = list(trial_geometries(model, n - f, f, p, AttackMode.SINGLE_COORD, trials, seed, coord,
                                      keep_vectors=rule == "bulyan:brute"))
        best, best_gamma = 0.0, 0.0
        for mult in gamma_grid:
            gamma = mult * unit
            dev = 0.0
            for geo in geoms:
                value = geo.probe(rule, gamma, f).attacked_value
                dev += float(np.mean(np.abs(value - geo.honest_at_coord)))
            dev /= trials
            if dev > best:
                best, best_gamma = dev, gamma
        measured.append(best)
        worst_gamma.append(best_gamma)
    return ScalingReport.fitted(
        "leeway", "d", dims, measured,
        params=dict(rule=rule, s=s, n=n, f=f, p=str(p), trials=trials, seed=seed,
                    gamma_grid=list(gamma_grid)),
        extra=dict(worst_gamma=worst_gamma),
    )


# -- margin scaling -------------------------------------------------------------


def quorum_size(rule: str, f: int) -> int:
    """Default worker count for the studies.

    The rule's own minimal quorum. Rules whose quorum does not grow with ``f``
    (average, geomed) get Krum's ``2f + 3`` so they are compared at equal n
    with an honest majority.
    """
    n = gar.min_workers(rule, f)
    if rule in ("average", "geomed"):
        n = max(n, 2 * f + 3)
    return n


def gamma_scaling_study(
    rule: str,
    p: NormOrder,
    f: int,
    dims: Sequence[int],
    s: float = 1.0,
    search: MarginSearch = MarginSearch(trials_per_probe=2000),
    seed: int = 0,
    n: Optional[int] = None,
    mode: AttackMode = AttackMode.SINGLE_COORD,
) -> ScalingReport:
    """Measured margin versus ``d`` at the rule's minimal quorum, with closed-form overlays.

    The ``predicted`` column holds the closed form where one exists (Brute,
    and Krum/GeoMed with no crafted vector among the neighbours); the other
    Krum/GeoMed variant is kept in ``extra``.
    """
    p = norm_order(p)
    dims = [int(d) for d in dims]
    if len(dims) < 3:
        raise ValueError("need >= 3 points for a slope")
    n = quorum_size(rule, f) if n is None else n
    params = dict(rule=rule, p=str(p), f=f, n=n, s=s, seed=seed, mode=AttackMode(mode).value,
                  trials_per_probe=search.trials_per_probe, tol_rel=search.tol_rel)
    measured, pred, pred_alt = [], [], []
    for d in dims:
        model = GaussianModel.uniform(d, s)
        try:
            measured.append(estimate_gamma_max(rule, model, n, f, p, mode, search, seed))
        except UnboundedMarginError:
            return ScalingReport("gamma_scan", "d", dims, [math.inf] * len(dims), unbounded=True, params=params)
        dbar = delta_bar(model.sigma)
        if p is INF or rule not in ("brute", "krum", "geomed"):
            pred.append(math.nan)
            pred_alt.append(math.nan)
        elif rule == "brute":
            pred.append(predicted_gamma_brute(d, p, dbar))
            pred_alt.append(math.nan)
        else:
            q = 2 if rule == "krum" else 1
            pred.append(predicted_gamma_krum_geomed(d, p, q, f, 0, dbar))
            pred_alt.append(predicted_gamma_krum_geomed(d, p, q, f, 1, dbar))
    return ScalingReport.fitted("gamma_scan", "d", dims, measured, predicted=pred, params=params,
                                extra=dict(predicted_b1=pred_alt))


# -- cost scaling ---------------------------------------------------------------


def default_f(n: int) -> int:
    return (n - 3) // 4


def complexity_study(
    rule: str,
    d: int,
    ns: Sequence[int],
    repetitions: int = 5,
    seed: int = 0,
    f_of_n: Callable[[int], int] = default_f,
    p: NormOrder = 2,
) -> ScalingReport:
    """Median wall time of one aggregation (distances included) versus ``n``."""
    ns = [int(v) for v in ns]
    aggregate = gar.get_rule(rule)
    times = []
    for n in ns:
        f = max(0, f_of_n(n))
        gar.check_quorum(rule, n, f)
        x = np.random.default_rng([seed, n]).standard_normal((n, d))
        aggregate(x, f, p)  # warm-up
        samples = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            aggregate(x, f, p)
            samples.append(time.perf_counter() - t0)
        times.append(float(np.median(samples)))
    return ScalingReport.fitted("complexity", "n", ns, times,
                                params=dict(rule=rule, d=d, repetitions=repetitions, seed=seed))
