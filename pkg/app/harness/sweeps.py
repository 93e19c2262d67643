"""
Parameter sweeps: non-IID severity across methods and the number of
representations averaged per class.
"""

from typing import Dict, List, Optional, Sequence, Tuple

from app.config import TrainConfig, derive_config
from app.data.models import LabeledDataset
from app.harness.archive import MetricsArchive
from app.harness.runner import execute_run, load_datasets
from app.utils.logging import get_logger

logger = get_logger(__name__)

BETA_VALUES = (0.2, 0.5, 1.0, 5.0)
BETA_METHODS = ("fedavg", "moon", "fedssc")
K_VALUES = (1, 2, 5, 10)
K_METHOD = "glob_only"


def sweep_beta(
    base: TrainConfig,
    betas: Sequence[float] = BETA_VALUES,
    methods: Sequence[str] = BETA_METHODS,
    data: Optional[Tuple[LabeledDataset, LabeledDataset]] = None,
    save: bool = True,
) -> Dict[Tuple[float, str], MetricsArchive]:
    """
    Run every method at every Dirichlet concentration.

    Args:
        base: Configuration shared by all runs
        betas: Concentrations to sweep
        methods: Presets compared at each concentration
        data: Pre-loaded (train, test)
        save: Archive every run

    Returns:
        Archives keyed by (beta, method)
    """
    data = data if data is not None else load_datasets(base)
    results: Dict[Tuple[float, str], MetricsArchive] = {}
    for beta in betas:
        for method in methods:
            cfg = derive_config(base, preset=method, beta=float(beta))
            archive = execute_run(cfg, data=data, run_id=f"beta{beta:g}-{method}-s{cfg.seed}", save=save)
            results[(float(beta), method)] = archive
            logger.info("Sweep point done", beta=beta, method=method, best_accuracy=archive.summary["best_accuracy"])
    return results


def sweep_k(
    base: TrainConfig,
    k_values: Sequence[int] = K_VALUES,
    method: str = K_METHOD,
    data: Optional[Tuple[LabeledDataset, LabeledDataset]] = None,
    save: bool = True,
) -> Dict[int, MetricsArchive]:
    """Run one method with sample_k banks for each k."""
    data = data if data is not None else load_datasets(base)
    results: Dict[int, MetricsArchive] = {}
    for k in k_values:
        cfg = derive_config(base, preset=method, bank_strategy="sample_k", k_samples=int(k))
        archive = execute_run(cfg, data=data, run_id=f"k{k}-{method}-s{cfg.seed}", save=save)
        results[int(k)] = archive
        logger.info("Sweep point done", k_samples=k, method=method, best_accuracy=archive.summary["best_accuracy"])
    return results


def sweep_table(results: Dict, label: str) -> List[str]:
    """Plain-text lines summarising a sweep."""
    lines = [f"{label:>12}  {'best':>8}  {'final':>8}  {'to_target':>9}"]
    for key, archive in results.items():
        summary = archive.summary
        name = "/".join(str(part) for part in key) if isinstance(key, tuple) else str(key)
        to_target = summary["rounds_to_target"]
        lines.append(
            f"{name:>12}  {summary['best_accuracy'] or 0:8.4f}  {summary['final_accuracy'] or 0:8.4f}  "
            f"{'-' if to_target is None else to_target:>9}"
        )
    return lines
