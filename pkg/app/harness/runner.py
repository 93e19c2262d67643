"""
Single-experiment runner: load data, train, archive.
"""

import uuid
from pathlib import Path
from typing import Optional, Tuple

from app.config import TrainConfig
from app.data.cifar10 import load_cifar10
from app.data.models import LabeledDataset
from app.data.partition import partition_summary
from app.data.synthetic import load_synthetic, make_synthetic, save_synthetic
from app.errors import SimulatorError
from app.federation.engine import run_experiment
from app.harness.archive import MetricsArchive, record_run, save_archive
from app.utils.logging import RunLogger, get_logger
from app.utils.seeding import derive_seed

logger = get_logger(__name__)

SYNTHETIC_TRAIN = "train.fssc"
SYNTHETIC_TEST = "test.fssc"


def new_run_id(preset: str) -> str:
    return f"{preset}-{uuid.uuid4().hex[:8]}"


def load_datasets(cfg: TrainConfig) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Load or generate the (train, test) pair named by the config.

    Synthetic data is read from data_dir when both files exist there;
    otherwise it is generated from the seed and cached in data_dir if set.
    """
    if cfg.dataset == "cifar10":
        return load_cifar10(cfg.resolved_data_dir())

    directory = Path(cfg.data_dir) if cfg.data_dir else None
    if directory is not None and (directory / SYNTHETIC_TRAIN).exists() and (directory / SYNTHETIC_TEST).exists():
        train = load_synthetic(directory / SYNTHETIC_TRAIN)
        test = load_synthetic(directory / SYNTHETIC_TEST)
        logger.info("Loaded synthetic data", directory=str(directory), train=len(train), test=len(test))
        return train, test

    train, test = make_synthetic(
        cfg.synthetic_classes,
        cfg.synthetic_dim,
        cfg.synthetic_per_class,
        cfg.synthetic_separation,
        seed=derive_seed(cfg.seed, "synthetic"),
    )
    if directory is not None:
        save_synthetic(directory / SYNTHETIC_TRAIN, train)
        save_synthetic(directory / SYNTHETIC_TEST, test)
    return train, test


def execute_run(
    cfg: TrainConfig,
    data: Optional[Tuple[LabeledDataset, LabeledDataset]] = None,
    run_id: Optional[str] = None,
    save: bool = True,
) -> MetricsArchive:
    """
    Run one experiment and archive it.

    Args:
        cfg: Resolved configuration
        data: Pre-loaded (train, test); loaded from cfg when None
        run_id: Defaults to <preset>-<random suffix>
        save: Write archive files and database rows

    Returns:
        MetricsArchive of the run
    """
    run_id = run_id or new_run_id(cfg.preset)
    run_logger = RunLogger(run_id)

    train, test = data if data is not None else load_datasets(cfg)
    run_logger.info("Experiment started", preset=cfg.preset, dataset=cfg.dataset, rounds=cfg.rounds, seed=cfg.seed)
    try:
        result = run_experiment(cfg, train, test, run_id=run_id)
    except SimulatorError as e:
        run_logger.error("Experiment failed", error=str(e))
        if save:
            record_run(MetricsArchive(run_id=run_id, config=cfg), status="failed", error=str(e))
        raise

    archive = MetricsArchive(
        run_id=run_id,
        config=cfg,
        reports=result.reports,
        shard_sizes=partition_summary(result.shards)["num_samples"],
    )
    if save:
        save_archive(archive, final_weights=result.final_weights)
    summary = archive.summary
    run_logger.info(
        "Experiment summary",
        best_accuracy=summary["best_accuracy"],
        final_accuracy=summary["final_accuracy"],
        rounds_to_target=summary["rounds_to_target"],
    )
    return archive
