"""
Tests for configuration parsing, validation and serialisation.
"""

import pytest

from app.config import (
    TrainConfig,
    build_config,
    derive_config,
    dump_config,
    parse_config,
    read_config_text,
)
from app.errors import ConfigError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("FEDSSC_THREADS", "FEDSSC_OUTPUT_DIR", "FEDSSC_DATABASE_URL"):
        monkeypatch.delenv(name, raising=False)


def test_defaults():
    cfg = parse_config()
    assert cfg.preset == "fedssc"
    assert (cfg.tau, cfg.mu_moon, cfg.mu_glob_start, cfg.mu_glob_end) == (0.5, 5.0, 1.0, 1e-4)
    assert (cfg.rounds, cfg.warmup_rounds, cfg.num_clients, cfg.local_epochs) == (100, 5, 10, 10)
    assert (cfg.lr, cfg.momentum, cfg.weight_decay, cfg.batch_size) == (0.01, 0.9, 1e-5, 64)
    assert cfg.beta == 0.5 and cfg.eligibility_threshold == 10
    assert cfg.shares_representations


def test_cli_override_beats_file_and_preset():
    cfg = parse_config(text="beta = 1.0\nrounds = 20\n", overrides={"beta": "0.2"})
    assert cfg.beta == 0.2
    assert cfg.rounds == 20


def test_preset_fills_method_weights():
    cfg = parse_config(overrides={"preset": "fedavg"})
    assert (cfg.mu_moon, cfg.mu_glob_start, cfg.mu_glob_end) == (0.0, 0.0, 0.0)
    assert not cfg.shares_representations


def test_centralized_preset_uses_one_device():
    assert parse_config(overrides={"preset": "centralized"}).num_clients == 1


def test_negative_weight_names_key():
    with pytest.raises(ConfigError) as exc:
        parse_config(overrides={"mu_moon": "-1"})
    assert exc.value.keys == ["mu_moon"]


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config(text="learning_rate = 0.1\n")
    assert "learning_rate" in exc.value.keys


def test_every_offending_key_is_listed():
    with pytest.raises(ConfigError) as exc:
        parse_config(overrides={"tau": "0", "batch_size": "0", "beta": "-2"})
    assert exc.value.keys == ["batch_size", "beta", "tau"]


def test_preset_consistency():
    with pytest.raises(ConfigError) as exc:
        parse_config(overrides={"preset": "fedavg", "mu_moon": "5"})
    assert exc.value.keys == ["mu_moon"]


def test_rounds_must_exceed_warmup_when_sharing():
    with pytest.raises(ConfigError) as exc:
        parse_config(overrides={"rounds": "5", "warmup_rounds": "5"})
    assert exc.value.keys == ["rounds", "warmup_rounds"]
    assert parse_config(overrides={"preset": "moon", "rounds": "5", "warmup_rounds": "5"}).rounds == 5


def test_decay_end_above_start():
    with pytest.raises(ConfigError) as exc:
        parse_config(overrides={"mu_glob_start": "0.1", "mu_glob_end": "0.5"})
    assert exc.value.keys == ["mu_glob_end"]


def test_sections_comments_and_dashes():
    values = read_config_text("[method]\n# the default method\npreset = moon\n\n[federation]\nlocal-epochs = 3\n")
    assert values == {"preset": "moon", "local_epochs": "3"}


def test_duplicate_key():
    with pytest.raises(ConfigError) as exc:
        read_config_text("[a]\nrounds = 1\n[b]\nrounds = 2\n")
    assert exc.value.keys == ["rounds"]


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_config("does/not/exist.ini")


def test_dump_then_parse_reproduces_config():
    cfg = build_config({"preset": "glob_only", "mu_moon": 0.0, "persist_velocity": True, "weight_decay": 3e-5, "seed": 9})
    text = dump_config(cfg)
    assert "[federation]" in text and "persist_velocity = true" in text
    assert parse_config(text=text) == cfg


def test_environment_supplies_threads(monkeypatch):
    monkeypatch.setenv("FEDSSC_THREADS", "4")
    assert parse_config().threads == 4
    assert parse_config(overrides={"threads": "2"}).threads == 2


def test_frozen():
    cfg = parse_config()
    with pytest.raises(Exception):
        cfg.rounds = 3


class TestDeriveConfig:
    def test_switching_preset_resets_method_weights(self):
        base = parse_config(overrides={"preset": "fedavg"})
        cfg = derive_config(base, preset="fedssc")
        assert (cfg.mu_moon, cfg.mu_glob_start) == (5.0, 1.0)

    def test_leaving_centralized_restores_device_count(self):
        base = parse_config(overrides={"preset": "centralized"})
        assert derive_config(base, preset="moon").num_clients == 10

    def test_same_preset_keeps_overrides(self):
        base = parse_config(overrides={"mu_moon": "2"})
        assert derive_config(base, beta=5.0).mu_moon == 2.0

    def test_result_is_validated(self):
        with pytest.raises(ConfigError):
            derive_config(parse_config(), preset="fedavg", mu_moon=1.0)


def test_context_follows_schedule():
    cfg = TrainConfig(rounds=100, warmup_rounds=5)
    assert cfg.context(0).mu_glob == 1.0
    assert cfg.context(100).mu_glob == 1e-4
