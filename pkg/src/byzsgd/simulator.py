"""Synchronous parameter-server SGD with an omniscient adversary.

One aggregation, hence one parameter update, per epoch. Workers ``0 ..
n_honest-1`` are honest, the remaining ``n_byzantine`` slots belong to the
adversary. While the attack window is open the adversary reads the honest
gradients and fills its slots with the crafted vector; outside the window
its slots submit ordinary gradients, so ``n`` never changes mid-run.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from . import gar
from .attack import AttackGeometry, AttackSpec, round_margin
from .tasks import GradientTask, make_task
from .vectors import norm_order

CSV_HEADER = (
    "epoch",
    "loss",
    "accuracy",
    "lr",
    "agg_norm",
    "attacked_coord_agg",
    "attacked_coord_param",
    "byz_selected_count",
)


class SimulationDiverged(RuntimeError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"parameters became non-finite at epoch {epoch}")


def learning_rate(epoch: int, eta0: float, r_eta: float) -> float:
    """Fading schedule ``eta0 * r_eta / (epoch + r_eta)``."""
    return eta0 * r_eta / (epoch + r_eta)


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "quadratic"
    task_params: dict = field(default_factory=dict)
    n_honest: int = 10
    n_byzantine: int = 0
    rule: str = "average"
    declared_f: Optional[int] = None
    attack: Optional[AttackSpec] = None
    eta0: float = 1.0
    r_eta: float = 10000.0
    batch_size: int = 83
    epochs: int = 100
    master_seed: int = 0
    eval_every: int = 10
    p: object = 2

    def __post_init__(self):
        if isinstance(self.attack, dict):
            object.__setattr__(self, "attack", AttackSpec.from_dict(self.attack))
        object.__setattr__(self, "p", norm_order(self.p))
        if self.declared_f is None:
            object.__setattr__(self, "declared_f", self.n_byzantine)
        if self.n_honest < 1 or self.n_byzantine < 0:
            raise ValueError("need n_honest >= 1 and n_byzantine >= 0")
        if self.epochs < 1 or self.eval_every < 1 or self.batch_size < 1:
            raise ValueError("epochs, eval_every and batch_size must be >= 1")
        if self.eta0 <= 0 or self.r_eta <= 0:
            raise ValueError("eta0 and r_eta must be > 0")
        gar.check_quorum(self.rule, self.n, self.declared_f)
        if self.attack is not None and self.attack.gamma_scale is not None and self.rule == "average":
            raise ValueError("gamma_scale needs a rule with a bounded margin; give average a fixed gamma")

    @property
    def n(self) -> int:
        return self.n_honest + self.n_byzantine

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["attack"] = self.attack.to_dict() if self.attack else None
        out["p"] = str(self.p) if not isinstance(self.p, int) else self.p
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


class LogRecord(NamedTuple):
    epoch: int
    loss: float
    accuracy: float
    lr: float
    agg_norm: float
    attacked_coord_agg: float
    attacked_coord_param: float
    byz_selected_count: int


@dataclass
class TrainingLog:
    records: list[LogRecord] = field(default_factory=list)
    gammas: list[float] = field(default_factory=list)  # gamma used at each attacked epoch
    final_params: Optional[np.ndarray] = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            w.writerow([r.epoch] + [repr(float(v)) for v in r[1:7]] + [r.byz_selected_count])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())


def _honest_gradients(task, x, cfg, epoch, workers) -> np.ndarray:
    return np.stack([
        task.sample_gradient(x, cfg.batch_size, np.random.default_rng([cfg.master_seed, w, epoch]))
        for w in workers
    ])


def run_experiment(config: ExperimentConfig, task: Optional[GradientTask] = None) -> TrainingLog:
    """Run the training loop; fully determined by ``config`` (and ``task``, if given)."""
    cfg = config
    if task is None:
        task = make_task(cfg.task, cfg.task_params, cfg.master_seed)
    rule = gar.get_rule(cfg.rule)
    attack = cfg.attack
    coord = attack.coord if attack else 0
    if coord >= task.dim:
        raise ValueError(f"attacked coordinate {coord} out of range for d={task.dim}")

    x = task.init_params(cfg.master_seed)
    log = TrainingLog()
    loss, acc = task.evaluate(x)
    log.records.append(LogRecord(0, loss, acc, learning_rate(0, cfg.eta0, cfg.r_eta), 0.0, 0.0, float(x[coord]), 0))

    for t in range(cfg.epochs):
        lr = learning_rate(t, cfg.eta0, cfg.r_eta)
        honest = _honest_gradients(task, x, cfg, t, range(cfg.n_honest))
        distances = None
        if attack is not None and cfg.n_byzantine and attack.active(t):
            geom = AttackGeometry(honest, cfg.n_byzantine, cfg.p, attack.mode, coord)
            if attack.gamma_scale is not None:
                gamma = attack.gamma_scale * round_margin(geom, cfg.rule, cfg.declared_f)
            else:
                gamma = attack.gamma
            log.gammas.append(gamma)
            vectors = geom.vectors(gamma)
            if cfg.rule != "average":
                distances = geom.distance_matrix(gamma)
        elif cfg.n_byzantine:
            extra = _honest_gradients(task, x, cfg, t, range(cfg.n_honest, cfg.n))
            vectors = np.vstack([honest, extra])
        else:
            vectors = honest

        out = rule(vectors, cfg.declared_f, cfg.p, distances=distances)
        x = x - lr * out.aggregate
        if not np.all(np.isfinite(x)):
            raise SimulationDiverged(t)

        done = t + 1
        if done % cfg.eval_every == 0 or done == cfg.epochs:
            loss, acc = task.evaluate(x)
            byz = sum(1 for i in out.selected_indices if i >= cfg.n_honest)
            log.records.append(LogRecord(
                done, loss, acc, lr, float(np.linalg.norm(out.aggregate)),
                float(out.aggregate[coord]), float(x[coord]), byz,
            ))
    log.final_params = x
    return log
