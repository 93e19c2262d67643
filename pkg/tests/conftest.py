"""
Shared fixtures: tiny architectures, tiny datasets and fast configurations.
"""

import os
from typing import Any, Callable

import numpy as np
import pytest

from app.config import TrainConfig, build_config
from app.data.models import ClientShard, LabeledDataset
from app.data.synthetic import make_synthetic
from app.harness.presets import preset_values
from app.harness.verify import tiny_cnn, tiny_mlp
from app.nn.architecture import ModelArchitecture


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end-to-end runs, enabled with FEDSSC_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv("FEDSSC_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set FEDSSC_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def mlp_arch() -> ModelArchitecture:
    return tiny_mlp()


@pytest.fixture
def cnn_arch() -> ModelArchitecture:
    return tiny_cnn()


@pytest.fixture(scope="session")
def blobs():
    """Three well separated 8-dimensional clusters, 48 train / 12 test per class."""
    return make_synthetic(num_classes=3, dim=8, n_per_class=60, separation=4.0, seed=7)


@pytest.fixture
def toy_dataset() -> LabeledDataset:
    """Four classes with 25, 15, 9 and 11 samples."""
    rng = np.random.default_rng(3)
    labels = np.repeat(np.arange(4), [25, 15, 9, 11])
    samples = rng.normal(size=(labels.size, 5)).astype(np.float32)
    return LabeledDataset(samples=samples, labels=labels, num_classes=4, provenance="synthetic")


@pytest.fixture
def whole_shard(toy_dataset) -> ClientShard:
    return ClientShard.from_indices(0, np.arange(len(toy_dataset)), toy_dataset)


@pytest.fixture
def make_cfg(tmp_path) -> Callable[..., TrainConfig]:
    """Fast synthetic configuration; keyword arguments override."""

    def factory(**overrides: Any) -> TrainConfig:
        values = dict(
            preset="fedssc",
            dataset="synthetic",
            synthetic_classes=3,
            synthetic_dim=8,
            synthetic_per_class=60,
            synthetic_separation=4.0,
            rounds=3,
            warmup_rounds=1,
            local_epochs=1,
            num_clients=3,
            beta=1.0,
            batch_size=16,
            projection_dim=8,
            mlp_hidden=16,
            eligibility_threshold=5,
            output_dir=str(tmp_path / "runs"),
            database_url=f"sqlite:///{tmp_path / 'runs.db'}",
        )
        values.update(preset_values(overrides.get("preset", "fedssc")))
        values.update(overrides)
        return build_config(values)

    return factory
