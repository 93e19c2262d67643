"""
Data models for datasets and client shards.
"""

from dataclasses import dataclass
from typing import Dict, Literal

import numpy as np

from app.errors import DataFormatError, PartitionError

Provenance = Literal["cifar10", "synthetic"]


@dataclass
class LabeledDataset:
    """Immutable labelled samples; shards index into it."""
    samples: np.ndarray
    labels: np.ndarray
    num_classes: int
    provenance: Provenance

    def __post_init__(self) -> None:
        if len(self.samples) != len(self.labels):
            raise DataFormatError(
                "Samples and labels differ in length",
                {"samples": len(self.samples), "labels": len(self.labels)},
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataFormatError("Label outside [0, C)", {"num_classes": self.num_classes})
        self.samples.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def input_shape(self) -> tuple:
        return tuple(self.samples.shape[1:])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass(frozen=True)
class PartitionSpec:
    """Dirichlet concentration, device count and seed."""
    beta: float
    num_clients: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise PartitionError("Dirichlet concentration must be positive", {"beta": self.beta})
        if self.num_clients < 1:
            raise PartitionError("Need at least one device", {"num_clients": self.num_clients})


@dataclass
class ClientShard:
    """One device's slice of the training set."""
    device_id: int
    indices: np.ndarray
    class_counts: np.ndarray

    def __post_init__(self) -> None:
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indices.size == 0:
            raise PartitionError("Shard is empty", {"device": self.device_id})
        if np.unique(self.indices).size != self.indices.size:
            raise PartitionError("Shard indices are not unique", {"device": self.device_id})
        if int(self.class_counts.sum()) != self.indices.size:
            raise PartitionError("Class counts do not add up to the shard size", {"device": self.device_id})

    @classmethod
    def from_indices(cls, device_id: int, indices: np.ndarray, ds: LabeledDataset) -> "ClientShard":
        indices = np.asarray(indices, dtype=np.int64)
        counts = np.bincount(ds.labels[indices], minlength=ds.num_classes)
        return cls(device_id=device_id, indices=indices, class_counts=counts)

    @property
    def num_samples(self) -> int:
        return int(self.indices.size)

    def counts_by_class(self) -> Dict[int, int]:
        return {cls: int(n) for cls, n in enumerate(self.class_counts) if n > 0}
