"""
Exception hierarchy for the FedSSC simulator.
"""

from dataclasses import dataclass, field
from typing import Any, Dict


@dataclass
class SimulatorError(Exception):
    """Base exception for every simulator failure."""
    message: str
    details: Dict[str, Any] = field(default_factory=dict)

    def __str__(self) -> str:
        if self.details:
            extra = ", ".join(f"{key}={value}" for key, value in self.details.items())
            return f"{self.message} ({extra})"
        return self.message


class ShapeError(SimulatorError):
    """Architecture, weights or batch shapes do not chain."""


class ConfigError(SimulatorError):
    """Invalid or inconsistent configuration."""

    @property
    def keys(self) -> list[str]:
        return list(self.details.get("keys", []))


class DataFormatError(SimulatorError):
    """A dataset file does not follow its binary format."""


class PartitionError(SimulatorError):
    """A dataset cannot be partitioned as requested."""


class NumericalError(SimulatorError):
    """A non-finite value reached the optimizer."""


class TrainingError(SimulatorError):
    """Local training or a federation round failed."""
