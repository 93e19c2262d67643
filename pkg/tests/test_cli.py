"""
End-to-end tests of the command line.
"""

import json

import pytest

from app.db.database import close_db
from app.errors import SimulatorError
from app.harness import verify
from app.harness.archive import REPORTS_FILE, SUMMARY_FILE
from app.main import build_parser, run_cli

FAST = ["--dataset", "synthetic", "--synthetic-per-class", "60", "--num-clients", "3", "--local-epochs", "1",
        "--projection-dim", "16", "--mlp-hidden", "16"]


@pytest.fixture(autouse=True)
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("FEDSSC_THREADS", raising=False)
    monkeypatch.setenv("FEDSSC_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("FEDSSC_DATABASE_URL", f"sqlite:///{tmp_path / 'history.db'}")
    close_db()
    yield tmp_path
    close_db()


def test_run_writes_one_report_per_round(workspace, capsys):
    code = run_cli(["run", "--preset", "fedavg", "--rounds", "5", "--run-id", "cli-run", *FAST])
    assert code == 0
    reports = (workspace / "runs" / "cli-run" / REPORTS_FILE).read_text().splitlines()
    assert [json.loads(line)["round"] for line in reports] == [1, 2, 3, 4, 5]
    summary = json.loads((workspace / "runs" / "cli-run" / SUMMARY_FILE).read_text())
    assert summary["preset"] == "fedavg" and summary["rounds"] == 5
    assert "cli-run: 5 rounds" in capsys.readouterr().out


def test_config_file_and_override(workspace):
    (workspace / "exp.ini").write_text("[federation]\nrounds = 4\nwarmup_rounds = 1\n")
    code = run_cli(["run", "--config", str(workspace / "exp.ini"), "--rounds", "2", "--run-id", "mixed", *FAST])
    assert code == 0
    assert len((workspace / "runs" / "mixed" / REPORTS_FILE).read_text().splitlines()) == 2


def test_invalid_value_exits_with_one(capsys):
    assert run_cli(["run", "--mu-moon", "-1", *FAST]) == 1
    assert "mu_moon" in capsys.readouterr().err


def test_missing_cifar_exits_with_one(workspace, capsys):
    assert run_cli(["run", "--dataset", "cifar10", "--data-dir", str(workspace / "nowhere")]) == 1
    assert "CIFAR-10" in capsys.readouterr().err


def test_verify_passes(capsys):
    assert run_cli(["verify", "--seeds", "2"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_export_plot(workspace, capsys):
    for preset in ("fedavg", "moon"):
        assert run_cli(["run", "--preset", preset, "--rounds", "2", "--run-id", preset, *FAST]) == 0
    capsys.readouterr()
    code = run_cli(["export-plot", str(workspace / "runs" / "fedavg"), str(workspace / "runs" / "moon")])
    lines = capsys.readouterr().out.splitlines()
    assert code == 0
    assert lines[0] == "round,fedavg,moon"
    assert len(lines) == 3


def test_sweep_k(workspace, capsys):
    code = run_cli(["sweep-k", "--k-values", "1", "2", "--rounds", "2", "--warmup-rounds", "1", *FAST])
    assert code == 0
    assert (workspace / "runs" / "k1-glob_only-s0").is_dir()
    assert (workspace / "runs" / "k2-glob_only-s0").is_dir()


def test_unknown_flag_is_rejected():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["run", "--learning-rate", "0.1"])
    assert exc.value.code == 2


def test_short_sharing_run_suggests_warmup_flag(capsys):
    assert run_cli(["run", "--preset", "fedssc", "--rounds", "5", *FAST]) == 1
    assert "--warmup-rounds below 5" in capsys.readouterr().err


def test_verify_reports_a_raising_check(monkeypatch, capsys):
    def broken():
        raise SimulatorError("schedule exploded")

    monkeypatch.setattr(verify, "check_schedule", broken)
    assert run_cli(["verify", "--seeds", "1"]) == 1
    out = capsys.readouterr().out
    assert "FAIL  mu_glob schedule" in out
    assert "schedule exploded" in out
    assert "PASS  weighted averaging" in out
