"""Server round loop, client training and aggregation."""

from app.federation.aggregation import aggregate_reps, aggregate_weights
from app.federation.client import classwise_reps, local_training
from app.federation.engine import FederationEngine, evaluate, run_experiment, run_round
from app.federation.models import (
    ClientMetrics,
    ClientState,
    ClientUpdate,
    ExperimentResult,
    RepBank,
    RepEntry,
    RoundReport,
    ServerState,
)

__all__ = [
    "ClientMetrics",
    "ClientState",
    "ClientUpdate",
    "ExperimentResult",
    "FederationEngine",
    "RepBank",
    "RepEntry",
    "RoundReport",
    "ServerState",
    "aggregate_reps",
    "aggregate_weights",
    "classwise_reps",
    "evaluate",
    "local_training",
    "run_experiment",
    "run_round",
]
