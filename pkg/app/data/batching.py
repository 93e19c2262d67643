"""
Seeded mini-batch iteration over a client shard.
"""

from typing import Iterator, Tuple

import numpy as np

from app.data.models import ClientShard, LabeledDataset
from app.errors import PartitionError, SimulatorError

Batch = Tuple[np.ndarray, np.ndarray]


def batches(
    shard: ClientShard,
    ds: LabeledDataset,
    batch_size: int,
    epoch_seed: int,
) -> Iterator[Batch]:
    """
    Shuffle the shard with epoch_seed and cut it into consecutive batches.

    Args:
        shard: Device shard
        ds: Dataset the shard indexes into
        batch_size: Rows per batch; the last batch may be short
        epoch_seed: Seed of the shuffle

    Returns:
        Iterator of (inputs, labels)
    """
    if batch_size < 1:
        raise SimulatorError("Batch size must be at least 1", {"batch_size": batch_size})
    if shard.num_samples == 0:
        raise PartitionError("Cannot iterate an empty shard", {"device": shard.device_id})

    order = np.random.default_rng(epoch_seed).permutation(shard.indices)
    return _iterate(order, ds, batch_size)


def _iterate(order: np.ndarray, ds: LabeledDataset, batch_size: int) -> Iterator[Batch]:
    for start in range(0, order.size, batch_size):
        chunk = order[start:start + batch_size]
        yield ds.samples[chunk], ds.labels[chunk]
