"""
Dirichlet non-IID partitioning of a labelled dataset across devices.

For every class k a proportion vector p_k ~ Dir(beta, ..., beta) over the
P devices is drawn, and the class's (shuffled) samples are handed out by
those proportions. Fractional allocations are rounded with the
largest-remainder method so class totals are conserved exactly.
"""

from typing import Dict, List

import numpy as np

from app.data.models import ClientShard, LabeledDataset, PartitionSpec
from app.errors import PartitionError
from app.utils.logging import get_logger

logger = get_logger(__name__)

MAX_REDRAWS = 100


def largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """
    Integer allocation of total items following proportions.

    Floors every share, then hands the remaining items to the largest
    fractional parts (ties to the lower device id).
    """
    exact = proportions * total
    counts = np.floor(exact).astype(np.int64)
    remainder = int(total - counts.sum())
    if remainder > 0:
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:remainder]] += 1
    return counts


def _draw(ds: LabeledDataset, spec: PartitionSpec, rng: np.random.Generator) -> List[np.ndarray]:
    buckets: List[List[np.ndarray]] = [[] for _ in range(spec.num_clients)]
    for cls in range(ds.num_classes):
        class_indices = np.flatnonzero(ds.labels == cls)
        if class_indices.size == 0:
            continue
        class_indices = rng.permutation(class_indices)
        proportions = rng.dirichlet(np.full(spec.num_clients, spec.beta))
        counts = largest_remainder(proportions, class_indices.size)
        for device, chunk in enumerate(np.split(class_indices, np.cumsum(counts)[:-1])):
            buckets[device].append(chunk)
    return [np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64) for parts in buckets]


def dirichlet_partition(ds: LabeledDataset, spec: PartitionSpec) -> List[ClientShard]:
    """
    Partition ds across spec.num_clients devices.

    Args:
        ds: Non-empty training set
        spec: Concentration, device count and seed

    Returns:
        One ClientShard per device, disjoint and covering ds

    Raises:
        PartitionError: preconditions violated, or some device still empty after 100 redraws
    """
    if len(ds) == 0:
        raise PartitionError("Cannot partition an empty dataset")
    present = ds.class_counts()[ds.class_counts() > 0]
    if spec.num_clients > int(present.min()):
        raise PartitionError(
            "More devices than samples in the smallest class",
            {"num_clients": spec.num_clients, "smallest_class": int(present.min())},
        )

    rng = np.random.default_rng(spec.seed)
    sizes: List[int] = []
    for attempt in range(MAX_REDRAWS):
        assignment = _draw(ds, spec, rng)
        sizes = [part.size for part in assignment]
        if min(sizes) > 0:
            if attempt:
                logger.warning("Partition redrawn", attempts=attempt + 1, beta=spec.beta)
            return [ClientShard.from_indices(device, part, ds) for device, part in enumerate(assignment)]

    raise PartitionError(
        "A device received no samples after repeated redraws",
        {"redraws": MAX_REDRAWS, "beta": spec.beta, "num_clients": spec.num_clients, "last_sizes": sizes},
    )


def equalize_shards(shards: List[ClientShard], ds: LabeledDataset, seed: int) -> List[ClientShard]:
    """Subsample every shard down to the smallest N_i (seeded)."""
    target = min(shard.num_samples for shard in shards)
    rng = np.random.default_rng(seed)
    equalized = []
    for shard in shards:
        kept = np.sort(rng.choice(shard.indices, size=target, replace=False))
        equalized.append(ClientShard.from_indices(shard.device_id, kept, ds))
    return equalized


def heterogeneity(shards: List[ClientShard], ds: LabeledDataset) -> float:
    """Mean over devices of the L1 distance between device and global class distributions."""
    global_dist = ds.class_counts() / len(ds)
    distances = [
        np.abs(shard.class_counts / shard.num_samples - global_dist).sum()
        for shard in shards
    ]
    return float(np.mean(distances))


def partition_summary(shards: List[ClientShard]) -> Dict[str, List]:
    """Realised shard sizes and per-class counts, for logs and archives."""
    return {
        "num_samples": [shard.num_samples for shard in shards],
        "class_counts": [shard.class_counts.tolist() for shard in shards],
    }
