"""
Seed derivation for independent random streams.

Every consumer of randomness (initialisation, partitioning, batch order,
bank sampling) gets its own seed derived from the master seed and a key,
so the order in which clients run cannot change any result.
"""

import zlib
from typing import Union

import numpy as np

SeedKey = Union[int, str]


def _as_word(key: SeedKey) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ValueError(f"Seed keys must be non-negative, got {key}")
    return int(key)


def derive_seed(master: int, *keys: SeedKey) -> int:
    """
    Derive a 32-bit seed from the master seed and a tuple of keys.

    Args:
        master: Master seed of the experiment
        *keys: Integers or strings naming the stream (e.g. "batches", device, round)

    Returns:
        Seed usable with numpy.random.default_rng
    """
    sequence = np.random.SeedSequence([_as_word(master), *(_as_word(k) for k in keys)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
