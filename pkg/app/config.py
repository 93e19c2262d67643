"""
Configuration management for the FedSSC simulator.
Supports environment variables, key=value config files and CLI overrides.
"""

import io
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.errors import ConfigError
from app.harness.presets import PRESETS, preset_values
from app.losses.contrastive import ContrastiveContext
from app.losses.schedule import ScheduleSpec, mu_glob_at_round

load_dotenv()

_SECTION_RE = re.compile(r"^\s*\[[^\]]*\]\s*$")

DEFAULT_CIFAR10_DIR = "data/cifar-10-batches-bin"


class InconsistentConfig(ValueError):
    """Cross-field violation; remembers which keys are involved."""

    def __init__(self, problems: Dict[str, str]):
        self.problems = problems
        super().__init__("; ".join(f"{key}: {message}" for key, message in problems.items()))


class TrainConfig(BaseModel):
    """Every hyperparameter of one experiment."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # Method
    preset: Literal["fedavg", "moon", "fedssc", "glob_only", "centralized"] = Field(
        default="fedssc", description="Method preset"
    )
    tau: float = Field(default=0.5, gt=0, description="Contrastive temperature")
    mu_moon: float = Field(default=5.0, ge=0, description="Weight of the model-contrastive loss")
    mu_glob_start: float = Field(default=1.0, ge=0, description="Initial weight of the class-wise contrastive loss")
    mu_glob_end: float = Field(default=0.0001, ge=0, description="Final weight of the class-wise contrastive loss")

    # Federation
    rounds: int = Field(default=100, ge=0, description="Communication rounds T")
    warmup_rounds: int = Field(default=5, ge=0, description="Rounds T0 at the initial mu_glob")
    num_clients: int = Field(default=10, ge=1, description="Devices P")
    local_epochs: int = Field(default=10, ge=0, description="Local epochs E per round")
    beta: float = Field(default=0.5, gt=0, description="Dirichlet concentration")
    eligibility_threshold: int = Field(default=10, ge=1, description="Minimum class samples to share a representation")
    bank_strategy: Literal["sample_k", "single_random", "mean_all"] = Field(
        default="sample_k", description="How the server combines class representations"
    )
    k_samples: int = Field(default=5, ge=1, description="Representations averaged per class under sample_k")
    persist_velocity: bool = Field(default=False, description="Keep client momentum across rounds")
    equalize_shards: bool = Field(default=False, description="Truncate shards to the smallest N_i")

    # Optimizer
    lr: float = Field(default=0.01, gt=0, description="Learning rate")
    momentum: float = Field(default=0.9, ge=0, lt=1, description="SGD momentum")
    weight_decay: float = Field(default=0.00001, ge=0, description="SGD weight decay")
    batch_size: int = Field(default=64, ge=1, description="Mini-batch size")

    # Data
    dataset: Literal["cifar10", "synthetic"] = Field(default="cifar10", description="Dataset selector")
    data_dir: Optional[str] = Field(default=None, description="CIFAR-10 batches, or where synthetic data is cached")
    synthetic_classes: int = Field(default=4, ge=2, description="Synthetic class count")
    synthetic_dim: int = Field(default=32, ge=2, description="Synthetic input dimension")
    synthetic_per_class: int = Field(default=400, ge=2, description="Synthetic samples per class")
    synthetic_separation: float = Field(default=2.5, ge=0, description="Synthetic cluster separation")

    # Model
    architecture: Literal["auto", "small_cnn", "mlp"] = Field(default="auto", description="Architecture preset")
    projection_dim: int = Field(default=256, ge=1, description="Projection head width")
    mlp_hidden: int = Field(default=64, ge=1, description="Hidden width of the mlp preset")

    # Run
    seed: int = Field(default=0, ge=0, description="Master seed")
    target_accuracy: float = Field(default=0.68, ge=0, le=1, description="Accuracy for rounds-to-target")
    eval_batch_size: int = Field(default=512, ge=1, description="Batch size for evaluation and projections")
    threads: int = Field(default=1, ge=1, description="Clients trained in parallel")
    output_dir: str = Field(default="runs", description="Where run archives are written")
    database_url: str = Field(default="sqlite:///runs/fedssc.db", description="Run history database")

    @model_validator(mode="after")
    def _check_consistency(self) -> "TrainConfig":
        problems: Dict[str, str] = {}
        if self.mu_glob_start < self.mu_glob_end:
            problems["mu_glob_end"] = "must not exceed mu_glob_start"
        if self.preset in ("fedavg", "centralized") and self.mu_moon != 0:
            problems["mu_moon"] = f"must be 0 for preset {self.preset}"
        if self.preset in ("fedavg", "moon", "centralized"):
            if self.mu_glob_start != 0:
                problems["mu_glob_start"] = f"must be 0 for preset {self.preset}"
            if self.mu_glob_end != 0:
                problems["mu_glob_end"] = f"must be 0 for preset {self.preset}"
        if self.preset == "glob_only" and self.mu_moon != 0:
            problems["mu_moon"] = "must be 0 for preset glob_only"
        if self.preset == "centralized" and self.num_clients != 1:
            problems["num_clients"] = "must be 1 for preset centralized"
        if self.shares_representations and 0 < self.rounds <= self.warmup_rounds:
            hint = f"pass --warmup-rounds below {self.rounds} for short runs"
            problems["rounds"] = f"must exceed warmup_rounds ({self.warmup_rounds}); {hint}"
            problems["warmup_rounds"] = f"must be below rounds ({self.rounds}); {hint}"
        if problems:
            raise InconsistentConfig(problems)
        return self

    @property
    def shares_representations(self) -> bool:
        return self.mu_glob_start > 0

    @property
    def schedule(self) -> ScheduleSpec:
        """Decay schedule; a run no longer than its warmup stays at the start weight."""
        total = max(self.rounds, self.warmup_rounds + 1)
        return ScheduleSpec(self.mu_glob_start, self.mu_glob_end, total, self.warmup_rounds)

    def context(self, t: int) -> ContrastiveContext:
        """Loss weights in effect in round t."""
        return ContrastiveContext(tau=self.tau, mu_moon=self.mu_moon, mu_glob=mu_glob_at_round(t, self.schedule))

    def resolved_data_dir(self) -> Optional[str]:
        if self.data_dir:
            return self.data_dir
        return DEFAULT_CIFAR10_DIR if self.dataset == "cifar10" else None


def get_config_from_env() -> Dict[str, Any]:
    """Settings taken from environment variables."""
    values: Dict[str, Any] = {}
    env_map = {
        "FEDSSC_THREADS": "threads",
        "FEDSSC_OUTPUT_DIR": "output_dir",
        "FEDSSC_DATABASE_URL": "database_url",
    }
    for env_name, key in env_map.items():
        value = os.getenv(env_name)
        if value:
            values[key] = value
    return values


def _normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def read_config_text(text: str) -> Dict[str, str]:
    """
    Parse key=value lines; [section] headers only group keys and are dropped.

    Raises:
        ConfigError: a key without a value, or a key given twice
    """
    lines = [line for line in text.splitlines() if not _SECTION_RE.match(line)]
    keys_seen: List[str] = []
    for line in lines:
        stripped = line.strip()
        if stripped and not stripped.startswith("#") and "=" in stripped:
            keys_seen.append(_normalize_key(stripped.split("=", 1)[0]))
    duplicates = sorted({key for key in keys_seen if keys_seen.count(key) > 1})
    if duplicates:
        raise ConfigError("Config keys given more than once", {"keys": duplicates})

    raw = dotenv_values(stream=io.StringIO("\n".join(lines)), interpolate=False)
    missing = [_normalize_key(key) for key, value in raw.items() if value is None]
    if missing:
        raise ConfigError("Config keys without a value", {"keys": missing})
    return {_normalize_key(key): value for key, value in raw.items()}


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError("Config file not found", {"keys": [], "path": str(path)})
    return read_config_text(path.read_text())


def _offending_keys(error: ValidationError) -> List[str]:
    keys: List[str] = []
    for item in error.errors():
        cause = (item.get("ctx") or {}).get("error")
        if isinstance(cause, InconsistentConfig):
            keys.extend(cause.problems.keys())
        elif item.get("loc"):
            keys.append(str(item["loc"][0]))
    return sorted(dict.fromkeys(keys))


def build_config(values: Mapping[str, Any]) -> TrainConfig:
    """Validate merged values, converting pydantic errors into one ConfigError."""
    try:
        return TrainConfig(**values)
    except ValidationError as e:
        keys = _offending_keys(e)
        messages = [f"{'.'.join(str(p) for p in item['loc']) or 'config'}: {item['msg']}" for item in e.errors()]
        raise ConfigError("Invalid configuration: " + "; ".join(messages), {"keys": keys}) from e


def parse_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    text: Optional[str] = None,
) -> TrainConfig:
    """
    Resolve a TrainConfig.

    Precedence, lowest first: defaults, environment, preset, file, overrides.

    Args:
        path: Optional key=value config file
        overrides: CLI values (None entries are ignored)
        text: Config text instead of a file

    Returns:
        Validated TrainConfig

    Raises:
        ConfigError: listing every offending key
    """
    file_values = read_config_text(text) if text is not None else (read_config_file(path) if path else {})
    cli_values = {_normalize_key(k): v for k, v in (overrides or {}).items() if v is not None}

    preset = cli_values.get("preset") or file_values.get("preset") or "fedssc"
    merged: Dict[str, Any] = dict(get_config_from_env())
    if preset in PRESETS:
        merged.update(preset_values(preset))
    merged.update(file_values)
    merged.update(cli_values)
    merged["preset"] = preset
    return build_config(merged)


_SECTIONS = {
    "method": ("preset", "tau", "mu_moon", "mu_glob_start", "mu_glob_end"),
    "federation": (
        "rounds", "warmup_rounds", "num_clients", "local_epochs", "beta", "eligibility_threshold",
        "bank_strategy", "k_samples", "persist_velocity", "equalize_shards",
    ),
    "optimizer": ("lr", "momentum", "weight_decay", "batch_size"),
    "data": (
        "dataset", "data_dir", "synthetic_classes", "synthetic_dim", "synthetic_per_class", "synthetic_separation",
    ),
    "model": ("architecture", "projection_dim", "mlp_hidden"),
    "run": ("seed", "target_accuracy", "eval_batch_size", "threads", "output_dir", "database_url"),
}


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: TrainConfig) -> str:
    """Serialise a config in the key=value format parse_config reads."""
    values = cfg.model_dump()
    lines: List[str] = []
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            if values[key] is not None:
                lines.append(f"{key} = {_format_value(values[key])}")
        lines.append("")
    return "\n".join(lines)


_METHOD_KEYS = ("mu_moon", "mu_glob_start", "mu_glob_end")


def derive_config(cfg: TrainConfig, **updates: Any) -> TrainConfig:
    """
    Copy of cfg with updates applied and validated.

    Switching the preset resets the loss weights to their defaults before
    the new preset's values are applied.
    """
    values = cfg.model_dump()
    preset = updates.get("preset", cfg.preset)
    if preset != cfg.preset:
        for key in _METHOD_KEYS:
            values[key] = TrainConfig.model_fields[key].default
        if cfg.preset == "centralized":
            values["num_clients"] = TrainConfig.model_fields["num_clients"].default
        if preset in PRESETS:
            values.update(preset_values(preset))
    values.update(updates)
    return build_config(values)
