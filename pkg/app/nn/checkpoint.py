"""
Binary model checkpoints.

Layout (little-endian): magic "FSSW", u32 version, 16-byte ASCII
architecture fingerprint, u64 parameter count, then every parameter array
as f32 in layer order.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from app.errors import DataFormatError, ShapeError
from app.nn.architecture import ModelArchitecture
from app.nn.weights import ModelWeights

MAGIC = b"FSSW"
VERSION = 1
_HEADER = struct.Struct("<4sI16sQ")


def save_checkpoint(path: Union[str, Path], w: ModelWeights) -> Path:
    """Write weights to path and return it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(MAGIC, VERSION, w.fingerprint.encode("ascii"), w.num_parameters())
    with path.open("wb") as handle:
        handle.write(header)
        for _, array in w:
            handle.write(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return path


def load_checkpoint(path: Union[str, Path], arch: ModelArchitecture) -> ModelWeights:
    """
    Read weights written by save_checkpoint.

    Raises:
        DataFormatError: bad magic, version or size
        ShapeError: the checkpoint belongs to another architecture
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise DataFormatError("Checkpoint is truncated", {"file": str(path)})

    magic, version, fingerprint, count = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise DataFormatError("Not a FSSW checkpoint", {"file": str(path)})
    if fingerprint.decode("ascii") != arch.fingerprint:
        raise ShapeError(
            "Checkpoint architecture does not match",
            {"expected": arch.fingerprint, "got": fingerprint.decode("ascii")},
        )
    if count != arch.num_parameters() or len(data) != _HEADER.size + 4 * count:
        raise DataFormatError("Checkpoint size does not match its header", {"file": str(path)})

    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).astype(np.float32)
    arrays = {}
    offset = 0
    for name, shape, _ in arch.parameter_shapes():
        size = int(np.prod(shape))
        arrays[name] = values[offset:offset + size].reshape(shape).copy()
        offset += size
    return ModelWeights(arch, arrays)
