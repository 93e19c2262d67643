"""
Synthetic Gaussian-cluster datasets and their flat binary export format.

File layout (little-endian): magic "FSSC", u32 version, u32 classes,
u32 dim, u64 count, then count records of (u16 label, dim x f32).
"""

import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from app.data.models import LabeledDataset
from app.errors import DataFormatError, SimulatorError

MAGIC = b"FSSC"
VERSION = 1
TRAIN_FRACTION = 0.8
_HEADER = struct.Struct("<4sIIIQ")


def class_means(num_classes: int, dim: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    """
    Mutually distant cluster centres.

    With num_classes <= dim the centres are separation * e_k (all pairwise
    distances separation * sqrt(2)); otherwise random directions on the
    sphere of radius separation.
    """
    if num_classes <= dim:
        means = np.zeros((num_classes, dim))
        means[np.arange(num_classes), np.arange(num_classes)] = separation
        return means
    directions = rng.normal(size=(num_classes, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return separation * directions


def make_synthetic(
    num_classes: int,
    dim: int,
    n_per_class: int,
    separation: float,
    seed: int,
) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Unit-variance Gaussian clusters split 80/20 per class.

    Args:
        num_classes: C >= 2
        dim: Input dimension >= 2
        n_per_class: Samples drawn per class
        separation: Scale of the cluster centres (0 makes all classes identical)
        seed: Generator seed

    Returns:
        (train, test)
    """
    if num_classes < 2 or dim < 2:
        raise SimulatorError("Synthetic data needs C >= 2 and dim >= 2", {"classes": num_classes, "dim": dim})
    if n_per_class < 2 or separation < 0:
        raise SimulatorError(
            "Synthetic data needs n_per_class >= 2 and separation >= 0",
            {"n_per_class": n_per_class, "separation": separation},
        )

    rng = np.random.default_rng(seed)
    means = class_means(num_classes, dim, separation, rng)
    n_train = int(n_per_class * TRAIN_FRACTION)

    train_x, train_y, test_x, test_y = [], [], [], []
    for cls in range(num_classes):
        points = means[cls] + rng.normal(size=(n_per_class, dim))
        train_x.append(points[:n_train])
        test_x.append(points[n_train:])
        train_y.append(np.full(n_train, cls))
        test_y.append(np.full(n_per_class - n_train, cls))

    def _assemble(xs, ys) -> LabeledDataset:
        x = np.concatenate(xs).astype(np.float32)
        y = np.concatenate(ys).astype(np.int64)
        order = rng.permutation(len(y))
        return LabeledDataset(samples=x[order], labels=y[order], num_classes=num_classes, provenance="synthetic")

    return _assemble(train_x, train_y), _assemble(test_x, test_y)


def save_synthetic(path: Union[str, Path], ds: LabeledDataset) -> Path:
    """Write a flat-input dataset in the FSSC format."""
    path = Path(path)
    if ds.samples.ndim != 2:
        raise DataFormatError("FSSC stores flat samples only", {"shape": ds.samples.shape})
    dim = ds.samples.shape[1]
    record = np.dtype([("label", "<u2"), ("x", "<f4", (dim,))])
    body = np.empty(len(ds), dtype=record)
    body["label"] = ds.labels
    body["x"] = ds.samples
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        handle.write(_HEADER.pack(MAGIC, VERSION, ds.num_classes, dim, len(ds)))
        handle.write(body.tobytes())
    return path


def load_synthetic(path: Union[str, Path]) -> LabeledDataset:
    """Read a dataset written by save_synthetic."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise DataFormatError("FSSC file is truncated", {"file": path.name})
    magic, version, num_classes, dim, count = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise DataFormatError("Not an FSSC file", {"file": path.name})
    record = np.dtype([("label", "<u2"), ("x", "<f4", (dim,))])
    if len(data) != _HEADER.size + count * record.itemsize:
        raise DataFormatError("FSSC file size does not match its header", {"file": path.name, "count": count})
    body = np.frombuffer(data, dtype=record, count=count, offset=_HEADER.size)
    return LabeledDataset(
        samples=body["x"].astype(np.float32),
        labels=body["label"].astype(np.int64),
        num_classes=int(num_classes),
        provenance="synthetic",
    )
