"""Datasets, non-IID partitioning and batch iteration."""

from app.data.batching import batches
from app.data.cifar10 import load_cifar10, write_cifar10_batch
from app.data.models import ClientShard, LabeledDataset, PartitionSpec
from app.data.partition import dirichlet_partition, equalize_shards, heterogeneity, partition_summary
from app.data.synthetic import load_synthetic, make_synthetic, save_synthetic

__all__ = [
    "ClientShard",
    "LabeledDataset",
    "PartitionSpec",
    "batches",
    "dirichlet_partition",
    "equalize_shards",
    "heterogeneity",
    "load_cifar10",
    "load_synthetic",
    "make_synthetic",
    "partition_summary",
    "save_synthetic",
    "write_cifar10_batch",
]
