"""
Data models for federation rounds.
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from app.data.models import ClientShard
from app.errors import NumericalError, ShapeError
from app.nn.weights import Gradients, ModelWeights


@dataclass(frozen=True)
class RepEntry:
    """One class representation with its provenance."""
    vector: np.ndarray
    count: int  # samples behind the vector
    sources: Tuple[int, ...]  # contributing device ids


@dataclass
class RepBank:
    """Class-wise projected representations keyed by class id."""
    entries: Dict[int, RepEntry] = field(default_factory=dict)
    round: int = 0

    def __post_init__(self) -> None:
        dims = {entry.vector.shape for entry in self.entries.values()}
        if len(dims) > 1:
            raise ShapeError("Bank vectors differ in shape", {"shapes": sorted(dims)})
        for cls, entry in self.entries.items():
            if not np.isfinite(entry.vector).all():
                raise NumericalError("Non-finite class representation", {"class": cls})

    @classmethod
    def empty(cls, round: int = 0) -> "RepBank":
        return cls(entries={}, round=round)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, cls: int) -> bool:
        return cls in self.entries

    def __getitem__(self, cls: int) -> RepEntry:
        return self.entries[cls]

    def classes(self) -> List[int]:
        return sorted(self.entries)

    def matrix(self, classes: Optional[Iterable[int]] = None) -> np.ndarray:
        """Stack the vectors of classes (default: all, ascending) into rows."""
        classes = self.classes() if classes is None else list(classes)
        return np.stack([self.entries[cls].vector for cls in classes])

    def vector(self, cls: int) -> np.ndarray:
        return self.entries[cls].vector


@dataclass
class ClientState:
    """State a device keeps between rounds."""
    device_id: int
    shard: ClientShard
    prev_weights: Optional[ModelWeights] = None
    velocity: Optional[Gradients] = None


@dataclass
class ServerState:
    """Global model, global bank and round index."""
    weights: ModelWeights
    bank: RepBank
    round: int
    seed: int


@dataclass(frozen=True)
class ClientUpdate:
    """Everything a device sends to the server after a round."""
    weights: ModelWeights
    bank: RepBank


@dataclass
class ClientMetrics:
    """Mean loss components of one device over its local batches."""
    device_id: int
    l_class: Optional[float]
    l_moon: Optional[float]
    l_glob: Optional[float]
    batches: int
    skipped_rows: int = 0


@dataclass
class RoundReport:
    """One line of the report stream."""
    round: int
    acc: float
    l_class: Optional[float]
    l_moon: Optional[float]
    l_glob: Optional[float]
    mu_glob: float
    classes_in_bank: int
    wall_ms: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RoundReport":
        return cls(**{name: data[name] for name in cls.__dataclass_fields__})

    def comparable(self) -> Dict[str, Any]:
        """Report fields without wall time."""
        data = self.to_dict()
        data.pop("wall_ms")
        return data


@dataclass
class ExperimentResult:
    """Reports of every round plus the final global model."""
    reports: List[RoundReport]
    final_weights: ModelWeights
    shards: List[ClientShard] = field(default_factory=list)

    @property
    def accuracies(self) -> List[float]:
        return [report.acc for report in self.reports]
