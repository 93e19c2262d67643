"""
Federation engine for the FedSSC simulator.

Runs the server round loop: broadcast the global model and bank, train
every client, aggregate weights and representations, evaluate.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.config import TrainConfig
from app.data.models import ClientShard, LabeledDataset, PartitionSpec
from app.data.partition import dirichlet_partition, equalize_shards, heterogeneity, partition_summary
from app.errors import SimulatorError, TrainingError
from app.federation.aggregation import aggregate_reps, aggregate_weights
from app.federation.client import local_training
from app.federation.models import (
    ClientMetrics,
    ClientState,
    ClientUpdate,
    ExperimentResult,
    RepBank,
    RoundReport,
    ServerState,
)
from app.losses.contrastive import reset_zero_norm_warning
from app.nn.architecture import ModelArchitecture, resolve_architecture
from app.nn.model import init_model, predict
from app.nn.weights import ModelWeights
from app.utils.logging import RunLogger, get_logger
from app.utils.seeding import derive_seed

logger = get_logger(__name__)

RoundCallback = Callable[[RoundReport], None]


def evaluate(w: ModelWeights, test: LabeledDataset, batch_size: int = 512) -> float:
    """Top-1 accuracy of w on test; ties in the logits go to the lowest class."""
    if len(test) == 0:
        raise SimulatorError("Cannot evaluate on an empty test set")
    predictions = predict(w, test.samples, batch_size=batch_size)
    return float(np.mean(predictions == test.labels))


def _mean_metric(metrics: List[ClientMetrics], name: str) -> Optional[float]:
    values = [getattr(m, name) for m in metrics if getattr(m, name) is not None]
    return float(np.mean(values)) if values else None


def _train_client(
    cs: ClientState,
    server: ServerState,
    cfg: TrainConfig,
    train: LabeledDataset,
) -> Tuple[ClientUpdate, ClientMetrics]:
    try:
        weights, bank, metrics = local_training(cs, server.weights, server.bank, cfg, server.round, train)
    except SimulatorError as e:
        if "device" not in e.details:
            e.details["device"] = cs.device_id
        raise
    except Exception as e:
        raise TrainingError("Client failed", {"device": cs.device_id, "round": server.round, "cause": str(e)}) from e
    return ClientUpdate(weights=weights, bank=bank), metrics


def run_round(
    server: ServerState,
    clients: List[ClientState],
    cfg: TrainConfig,
    train: LabeledDataset,
    test: LabeledDataset,
    executor: Optional[ThreadPoolExecutor] = None,
) -> Tuple[ServerState, RoundReport]:
    """
    One communication round with full participation.

    Args:
        server: State of round t
        clients: Every client, in device id order
        cfg: Experiment configuration
        train: Training set the shards index into
        test: Held-out set for the global model
        executor: Pool for parallel client training (sequential when None)

    Returns:
        (state of round t+1, report of round t)

    Raises:
        TrainingError: a client failed; details carry its device id
    """
    t = server.round
    if t >= cfg.rounds:
        raise TrainingError("All rounds already completed", {"round": t, "rounds": cfg.rounds})
    started = time.perf_counter()
    ctx = cfg.context(t)

    if executor is None:
        outcomes = [_train_client(cs, server, cfg, train) for cs in clients]
    else:
        outcomes = list(executor.map(lambda cs: _train_client(cs, server, cfg, train), clients))

    updates = [update for update, _ in outcomes]
    metrics = [m for _, m in outcomes]
    device_ids = [cs.device_id for cs in clients]

    new_weights = aggregate_weights(
        [(update.weights, cs.shard.num_samples) for update, cs in zip(updates, clients)],
        device_ids=device_ids,
    )
    if cfg.shares_representations:
        ordered_banks = [update.bank for _, update in sorted(zip(device_ids, updates), key=lambda item: item[0])]
        merged = aggregate_reps(
            ordered_banks, cfg.bank_strategy, cfg.k_samples, seed=derive_seed(server.seed, "bank", t)
        )
        new_bank = RepBank(entries=merged.entries, round=t + 1)
    else:
        new_bank = RepBank.empty(round=t + 1)

    for cs, update in zip(clients, updates):
        cs.prev_weights = update.weights

    acc = evaluate(new_weights, test, cfg.eval_batch_size)
    report = RoundReport(
        round=t + 1,
        acc=acc,
        l_class=_mean_metric(metrics, "l_class"),
        l_moon=_mean_metric(metrics, "l_moon"),
        l_glob=_mean_metric(metrics, "l_glob"),
        mu_glob=ctx.mu_glob,
        classes_in_bank=len(server.bank),
        wall_ms=(time.perf_counter() - started) * 1000.0,
    )
    return ServerState(weights=new_weights, bank=new_bank, round=t + 1, seed=server.seed), report


class FederationEngine:
    """
    Drives one experiment from partitioning to the final global model.

    Responsibilities:
    - Partition the training set and create the client states
    - Initialise the global model and the empty global bank
    - Run the configured number of rounds and collect reports
    """

    def __init__(self, cfg: TrainConfig, train: LabeledDataset, test: LabeledDataset, run_id: Optional[str] = None):
        """
        Initialize the engine.

        Args:
            cfg: Experiment configuration
            train: Training set to partition
            test: Held-out evaluation set
            run_id: Identifier bound into log events
        """
        self.cfg = cfg
        self.train = train
        self.test = test
        self.run_logger = RunLogger(run_id)

        self.arch: Optional[ModelArchitecture] = None
        self.shards: List[ClientShard] = []
        self.clients: List[ClientState] = []
        self.server: Optional[ServerState] = None
        self._initialized = False

    def initialize(self) -> ServerState:
        """Partition the data and create the round-0 server state."""
        cfg = self.cfg
        if self.train.input_shape != self.test.input_shape or self.train.num_classes != self.test.num_classes:
            raise SimulatorError(
                "Training and test sets differ in shape or classes",
                {"train": self.train.input_shape, "test": self.test.input_shape},
            )
        self.arch = resolve_architecture(
            cfg.architecture,
            self.train.input_shape,
            self.train.num_classes,
            projection_dim=cfg.projection_dim,
            mlp_hidden=cfg.mlp_hidden,
        )

        spec = PartitionSpec(beta=cfg.beta, num_clients=cfg.num_clients, seed=derive_seed(cfg.seed, "partition"))
        shards = dirichlet_partition(self.train, spec)
        if cfg.equalize_shards:
            shards = equalize_shards(shards, self.train, derive_seed(cfg.seed, "equalize"))
        self.shards = shards
        self.clients = [ClientState(device_id=shard.device_id, shard=shard) for shard in shards]

        weights = init_model(self.arch, derive_seed(cfg.seed, "init"))
        self.server = ServerState(weights=weights, bank=RepBank.empty(round=0), round=0, seed=cfg.seed)
        self._initialized = True

        self.run_logger.info(
            "Experiment initialized",
            preset=cfg.preset,
            architecture=self.arch.name,
            parameters=weights.num_parameters(),
            shard_sizes=partition_summary(shards)["num_samples"],
            heterogeneity=round(heterogeneity(shards, self.train), 4),
        )
        return self.server

    def _workers(self) -> int:
        return max(1, min(self.cfg.threads, len(self.clients)))

    def run(self, on_round: Optional[RoundCallback] = None) -> ExperimentResult:
        """
        Run every configured round.

        Args:
            on_round: Called with each report as soon as it exists

        Returns:
            ExperimentResult with one report per round and the final model
        """
        if not self._initialized:
            self.initialize()
        reset_zero_norm_warning()

        reports: List[RoundReport] = []
        workers = self._workers()
        executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        try:
            while self.server.round < self.cfg.rounds:
                self.server, report = run_round(self.server, self.clients, self.cfg, self.train, self.test, executor)
                reports.append(report)
                self.run_logger.info(
                    "Round complete",
                    round=report.round, acc=round(report.acc, 4), l_class=report.l_class,
                    l_moon=report.l_moon, l_glob=report.l_glob, mu_glob=report.mu_glob,
                    classes_in_bank=report.classes_in_bank, wall_ms=round(report.wall_ms, 1),
                )
                if on_round is not None:
                    on_round(report)
        finally:
            if executor is not None:
                executor.shutdown(wait=True)

        best = max((r.acc for r in reports), default=None)
        self.run_logger.info("Experiment finished", rounds=len(reports), best_acc=best)
        return ExperimentResult(reports=reports, final_weights=self.server.weights, shards=self.shards)


def run_experiment(
    cfg: TrainConfig,
    train: LabeledDataset,
    test: LabeledDataset,
    run_id: Optional[str] = None,
    on_round: Optional[RoundCallback] = None,
) -> ExperimentResult:
    """Partition, initialise and run cfg.rounds rounds."""
    engine = FederationEngine(cfg, train, test, run_id=run_id)
    engine.initialize()
    return engine.run(on_round=on_round)
