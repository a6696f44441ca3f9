"""Byzantine-resilient gradient aggregation and a simulated parameter server.

Aggregation rules live in :mod:`byzsgd.gar`, the adversary in
:mod:`byzsgd.attack`, the training loop in :mod:`byzsgd.simulator` and the
Monte-Carlo studies in :mod:`byzsgd.analysis`.
"""

__version__ = "0.1.0"

from .gar import (
    RULE_IDS,
    AggregationOutcome,
    BruteFeasibilityError,
    QuorumError,
    aggregate,
    average,
    brute,
    bulyan,
    geomed,
    krum,
    medoid_geomed,
)
from .attack import AttackMode, AttackSpec, GaussianModel, MarginSearch, craft_attack, estimate_gamma_max
from .simulator import ExperimentConfig, TrainingLog, learning_rate, run_experiment
from .vectors import INF

__all__ = [
    "RULE_IDS",
    "AggregationOutcome",
    "BruteFeasibilityError",
    "QuorumError",
    "aggregate",
    "average",
    "brute",
    "bulyan",
    "geomed",
    "krum",
    "medoid_geomed",
    "AttackMode",
    "AttackSpec",
    "GaussianModel",
    "MarginSearch",
    "craft_attack",
    "estimate_gamma_max",
    "ExperimentConfig",
    "TrainingLog",
    "learning_rate",
    "run_experiment",
    "INF",
]
