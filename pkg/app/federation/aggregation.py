"""
Server-side aggregation of client weights and class representation banks.
"""

from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from app.errors import ShapeError, TrainingError
from app.federation.models import RepBank, RepEntry
from app.nn.weights import ModelWeights
from app.utils.logging import get_logger

logger = get_logger(__name__)

BankStrategy = Literal["sample_k", "single_random", "mean_all"]
BANK_STRATEGIES = ("sample_k", "single_random", "mean_all")


def aggregate_weights(
    contributions: Sequence[Tuple[ModelWeights, int]],
    device_ids: Optional[Sequence[int]] = None,
) -> ModelWeights:
    """
    Sample-weighted mean of client weights: sum_i (N_i / N) w_i.

    Contributions are reduced in ascending device id order (list order
    when no ids are given), accumulating in float64.

    Args:
        contributions: (weights, N_i) per device
        device_ids: Device id of each contribution, used for ordering and errors

    Returns:
        Aggregated weights in the dtype of the first contribution

    Raises:
        TrainingError: empty input or a non-positive N_i
        ShapeError: a contribution with a different architecture, naming the device
    """
    if not contributions:
        raise TrainingError("Nothing to aggregate")
    ids = list(device_ids) if device_ids is not None else list(range(len(contributions)))
    if len(ids) != len(contributions):
        raise TrainingError("One device id per contribution is required", {"ids": len(ids), "contributions": len(contributions)})

    ordered = sorted(zip(ids, contributions), key=lambda item: item[0])
    reference = ordered[0][1][0]
    for device, (weights, n_samples) in ordered:
        if weights.fingerprint != reference.fingerprint:
            raise ShapeError(
                "Client weights do not match the global architecture",
                {"device": device, "expected": reference.fingerprint, "got": weights.fingerprint},
            )
        if n_samples <= 0:
            raise TrainingError("Client sample count must be positive", {"device": device, "n_samples": n_samples})

    total = float(sum(n for _, (_, n) in ordered))
    dtype = reference.dtype
    arrays = {}
    for name in reference.names():
        acc = np.zeros(reference[name].shape, dtype=np.float64)
        for _, (weights, n_samples) in ordered:
            acc += weights[name].astype(np.float64) * (n_samples / total)
        arrays[name] = acc.astype(dtype)
    return ModelWeights(reference.arch, arrays)


def aggregate_reps(
    banks: Sequence[RepBank],
    strategy: BankStrategy = "sample_k",
    k_samples: int = 5,
    seed: int = 0,
) -> RepBank:
    """
    Combine client banks into the global bank.

    Args:
        banks: Client banks of one round
        strategy: sample_k averages min(k_samples, available) randomly chosen
            device vectors per class; single_random keeps one random device;
            mean_all takes the unweighted mean over every device
        k_samples: Vectors averaged per class under sample_k
        seed: Seed of the device choice

    Returns:
        Bank holding only classes with at least one contribution
    """
    if strategy not in BANK_STRATEGIES:
        raise TrainingError("Unknown bank strategy", {"strategy": strategy})
    if k_samples < 1:
        raise TrainingError("k_samples must be at least 1", {"k_samples": k_samples})
    if not banks:
        return RepBank.empty()

    stamp = max(bank.round for bank in banks)
    candidates = {}
    for bank in banks:
        for cls in bank.classes():
            candidates.setdefault(cls, []).append(bank[cls])

    rng = np.random.default_rng(seed)
    entries = {}
    for cls in sorted(candidates):
        available: List[RepEntry] = candidates[cls]
        if strategy == "mean_all":
            chosen = available
        else:
            size = 1 if strategy == "single_random" else min(k_samples, len(available))
            picks = np.sort(rng.choice(len(available), size=size, replace=False))
            chosen = [available[i] for i in picks]

        dtype = chosen[0].vector.dtype
        mean = np.mean([entry.vector.astype(np.float64) for entry in chosen], axis=0)
        entries[cls] = RepEntry(
            vector=mean.astype(dtype),
            count=sum(entry.count for entry in chosen),
            sources=tuple(sorted(device for entry in chosen for device in entry.sources)),
        )

    logger.debug("Aggregated class representations", strategy=strategy, classes=len(entries), banks=len(banks))
    return RepBank(entries=entries, round=stamp)
