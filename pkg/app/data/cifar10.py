"""
CIFAR-10 binary format loader.

Each record is 3073 bytes: one label byte followed by 3072 pixel bytes,
the red, green and blue 32x32 planes in row-major order.
"""

from pathlib import Path
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from app.data.models import LabeledDataset
from app.errors import DataFormatError
from app.utils.logging import get_logger

logger = get_logger(__name__)

RECORD_BYTES = 3073
IMAGE_SHAPE = (3, 32, 32)
NUM_CLASSES = 10
TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILES = ("test_batch.bin",)

CHANNEL_MEAN = np.array([0.4914, 0.4822, 0.4465], dtype=np.float32)
CHANNEL_STD = np.array([0.2470, 0.2435, 0.2616], dtype=np.float32)


def read_records(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read one binary batch file.

    Args:
        path: Path to a CIFAR-10 .bin file

    Returns:
        (labels as uint8 (n,), raw pixels as uint8 (n, 3, 32, 32))

    Raises:
        DataFormatError: size not a multiple of 3073, or label byte > 9
    """
    path = Path(path)
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % RECORD_BYTES != 0:
        raise DataFormatError(
            "CIFAR-10 file size is not a multiple of 3073 bytes",
            {"file": path.name, "size": int(raw.size)},
        )
    records = raw.reshape(-1, RECORD_BYTES)
    labels = records[:, 0]
    bad = np.flatnonzero(labels >= NUM_CLASSES)
    if bad.size:
        raise DataFormatError(
            "CIFAR-10 label byte out of range",
            {"file": path.name, "record": int(bad[0]), "label": int(labels[bad[0]])},
        )
    pixels = records[:, 1:].reshape((-1,) + IMAGE_SHAPE)
    return labels.copy(), pixels.copy()


def normalize(pixels: np.ndarray) -> np.ndarray:
    """Scale bytes to [0, 1] then standardise each channel with fixed constants."""
    scaled = pixels.astype(np.float32) / np.float32(255.0)
    return (scaled - CHANNEL_MEAN[None, :, None, None]) / CHANNEL_STD[None, :, None, None]


def denormalize(samples: np.ndarray) -> np.ndarray:
    """Invert normalize back to bytes."""
    scaled = samples * CHANNEL_STD[None, :, None, None] + CHANNEL_MEAN[None, :, None, None]
    return np.clip(np.rint(scaled * 255.0), 0, 255).astype(np.uint8)


def load_files(paths: Iterable[Union[str, Path]]) -> LabeledDataset:
    """Concatenate and normalise several batch files."""
    labels, pixels = [], []
    for path in paths:
        file_labels, file_pixels = read_records(path)
        labels.append(file_labels)
        pixels.append(file_pixels)
    return LabeledDataset(
        samples=normalize(np.concatenate(pixels)),
        labels=np.concatenate(labels).astype(np.int64),
        num_classes=NUM_CLASSES,
        provenance="cifar10",
    )


def load_cifar10(directory: Union[str, Path]) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Load the standard train and test batches.

    Args:
        directory: Folder holding data_batch_1..5.bin and test_batch.bin

    Returns:
        (train, test) datasets, 50000 and 10000 samples for the full set
    """
    directory = Path(directory)
    missing = [name for name in TRAIN_FILES + TEST_FILES if not (directory / name).exists()]
    if missing:
        raise DataFormatError("CIFAR-10 batches not found", {"directory": str(directory), "missing": missing})

    train = load_files(directory / name for name in TRAIN_FILES)
    test = load_files(directory / name for name in TEST_FILES)
    logger.info("Loaded CIFAR-10", directory=str(directory), train=len(train), test=len(test))
    return train, test


def write_cifar10_batch(
    path: Union[str, Path],
    ds: LabeledDataset,
    indices: Sequence[int],
) -> Path:
    """
    Write samples of a CIFAR-10 dataset back to the binary record format.

    Args:
        path: Output file
        ds: Normalised CIFAR-10 dataset
        indices: Samples to write, in order

    Returns:
        The written path
    """
    path = Path(path)
    indices = np.asarray(indices, dtype=np.int64)
    records = np.empty((indices.size, RECORD_BYTES), dtype=np.uint8)
    records[:, 0] = ds.labels[indices].astype(np.uint8)
    records[:, 1:] = denormalize(ds.samples[indices]).reshape(indices.size, -1)
    path.parent.mkdir(parents=True, exist_ok=True)
    records.tofile(path)
    return path
