"""
Named parameter collections: model weights, gradients and optimizer velocity.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Tuple, TypeVar

import numpy as np

from app.errors import ShapeError
from app.nn.architecture import ModelArchitecture

P = TypeVar("P", bound="ParameterSet")

_ALLOWED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


@dataclass
class ParameterSet:
    """
    Ordered mapping from layer parameter name to array, tied to an architecture.

    float32 is the working precision; float64 copies exist only for
    finite-difference checks.
    """
    arch: ModelArchitecture
    arrays: Dict[str, np.ndarray]

    def __post_init__(self) -> None:
        expected = self.arch.parameter_shapes()
        names = [name for name, _, _ in expected]
        if list(self.arrays.keys()) != names:
            raise ShapeError(
                f"{type(self).__name__} layout does not match the architecture",
                {"expected": names, "got": list(self.arrays.keys())},
            )
        for (name, shape, _), array in zip(expected, self.arrays.values()):
            if array.shape != shape:
                raise ShapeError(
                    f"Parameter {name} has the wrong shape",
                    {"expected": shape, "got": array.shape},
                )
            if array.dtype not in _ALLOWED_DTYPES:
                raise ShapeError(f"Parameter {name} must be float32 or float64", {"dtype": str(array.dtype)})

    @property
    def fingerprint(self) -> str:
        return self.arch.fingerprint

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.arrays.values())).dtype

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self.arrays.items())

    def __len__(self) -> int:
        return len(self.arrays)

    def names(self) -> List[str]:
        return list(self.arrays.keys())

    def num_parameters(self) -> int:
        return int(sum(array.size for array in self.arrays.values()))

    def map(self: P, fn: Callable[[np.ndarray], np.ndarray]) -> P:
        """Apply fn to every array and wrap the result in the same type."""
        return type(self)(self.arch, {name: fn(array) for name, array in self.arrays.items()})

    def copy(self: P) -> P:
        return self.map(np.copy)

    def astype(self: P, dtype) -> P:
        return self.map(lambda array: array.astype(dtype, copy=True))

    def zeros_like(self) -> "Gradients":
        return Gradients(self.arch, {name: np.zeros_like(array) for name, array in self.arrays.items()})

    def is_finite(self) -> bool:
        return all(np.isfinite(array).all() for array in self.arrays.values())

    def non_finite_layers(self) -> List[str]:
        return [name for name, array in self.arrays.items() if not np.isfinite(array).all()]

    def check_congruent(self, other: "ParameterSet", what: str = "parameters") -> None:
        """Raise ShapeError unless other has the same architecture."""
        if other.fingerprint != self.fingerprint:
            raise ShapeError(
                f"Architecture mismatch between {what}",
                {"expected": self.fingerprint, "got": other.fingerprint},
            )

    def equals(self, other: "ParameterSet") -> bool:
        """Bitwise equality of every array."""
        if other.fingerprint != self.fingerprint:
            return False
        return all(np.array_equal(a, b) for (_, a), (_, b) in zip(self, other))


class ModelWeights(ParameterSet):
    """Parameters of an encoder/projection/classifier network."""


class Gradients(ParameterSet):
    """Derivatives of a scalar objective, shaped like ModelWeights."""

    def scale(self, factor: float) -> "Gradients":
        return self.map(lambda array: array * array.dtype.type(factor))


def zeros(arch: ModelArchitecture, dtype=np.float32) -> ModelWeights:
    """All-zero weights for an architecture."""
    return ModelWeights(
        arch,
        {name: np.zeros(shape, dtype=dtype) for name, shape, _ in arch.parameter_shapes()},
    )
