"""
Run archives: the report stream, the resolved config, the summary, the
final checkpoint and the run history rows in the database.
"""

import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from app.config import TrainConfig, dump_config, parse_config
from app.db.database import get_db_session, init_db
from app.db.models import ExperimentRun, RoundRecord
from app.errors import DataFormatError, SimulatorError
from app.federation.models import RoundReport
from app.nn.checkpoint import save_checkpoint
from app.nn.weights import ModelWeights
from app.utils.logging import get_logger

logger = get_logger(__name__)

REPORTS_FILE = "reports.jsonl"
CONFIG_FILE = "config.ini"
SUMMARY_FILE = "summary.json"
MODEL_FILE = "model.fssw"


def rounds_to_target(reports: Sequence[Union[RoundReport, float]], target: float) -> Optional[int]:
    """
    1-based index of the first report with accuracy >= target.

    Returns:
        The round count, or None when the target is never reached
    """
    for index, item in enumerate(reports, start=1):
        acc = item.acc if isinstance(item, RoundReport) else float(item)
        if acc >= target:
            return index
    return None


@dataclass
class MetricsArchive:
    """Everything recorded about one run."""
    run_id: str
    config: TrainConfig
    reports: List[RoundReport] = field(default_factory=list)
    shard_sizes: List[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        rounds = [report.round for report in self.reports]
        if any(b <= a for a, b in zip(rounds, rounds[1:])):
            raise SimulatorError("Report rounds must be strictly increasing", {"run_id": self.run_id})

    @property
    def summary(self) -> Dict[str, Any]:
        accuracies = [report.acc for report in self.reports]
        return {
            "run_id": self.run_id,
            "preset": self.config.preset,
            "rounds": len(self.reports),
            "best_accuracy": max(accuracies) if accuracies else None,
            "final_accuracy": accuracies[-1] if accuracies else None,
            "target_accuracy": self.config.target_accuracy,
            "rounds_to_target": rounds_to_target(accuracies, self.config.target_accuracy),
            "shard_sizes": list(self.shard_sizes),
        }

    @property
    def accuracies(self) -> List[float]:
        return [report.acc for report in self.reports]


def write_reports(path: Union[str, Path], reports: Sequence[RoundReport]) -> Path:
    """Write one JSON object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as handle:
        for report in reports:
            handle.write(report.to_json() + "\n")
    return path


def read_reports(path: Union[str, Path]) -> List[RoundReport]:
    path = Path(path)
    reports = []
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            reports.append(RoundReport.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as e:
            raise DataFormatError("Malformed report line", {"file": path.name, "line": number, "error": str(e)}) from e
    return reports


def archive_dir(cfg: TrainConfig, run_id: str) -> Path:
    return Path(cfg.output_dir) / run_id


def save_archive(
    archive: MetricsArchive,
    final_weights: Optional[ModelWeights] = None,
    directory: Optional[Union[str, Path]] = None,
    record_db: bool = True,
) -> Path:
    """
    Write the archive files and the run history rows.

    Args:
        archive: Run to store
        final_weights: Final global model, written as a checkpoint when given
        directory: Target directory, default <output_dir>/<run_id>
        record_db: Also store the run in the database

    Returns:
        The archive directory
    """
    target = Path(directory) if directory is not None else archive_dir(archive.config, archive.run_id)
    target.mkdir(parents=True, exist_ok=True)

    write_reports(target / REPORTS_FILE, archive.reports)
    (target / CONFIG_FILE).write_text(dump_config(archive.config))
    (target / SUMMARY_FILE).write_text(json.dumps(archive.summary, indent=2) + "\n")
    if final_weights is not None:
        save_checkpoint(target / MODEL_FILE, final_weights)

    if record_db:
        record_run(archive)
    logger.info("Archive written", run_id=archive.run_id, path=str(target), rounds=len(archive.reports))
    return target


def load_archive(directory: Union[str, Path]) -> MetricsArchive:
    """Read an archive written by save_archive."""
    directory = Path(directory)
    reports_path = directory / REPORTS_FILE
    if not reports_path.exists():
        raise DataFormatError("Archive has no report stream", {"directory": str(directory)})
    cfg = parse_config(directory / CONFIG_FILE)
    summary_path = directory / SUMMARY_FILE
    summary = json.loads(summary_path.read_text()) if summary_path.exists() else {}
    return MetricsArchive(
        run_id=summary.get("run_id", directory.name),
        config=cfg,
        reports=read_reports(reports_path),
        shard_sizes=summary.get("shard_sizes", []),
    )


def record_run(archive: MetricsArchive, status: str = "completed", error: Optional[str] = None) -> None:
    """Insert or replace the database rows of a run."""
    init_db(archive.config.database_url)
    summary = archive.summary
    with get_db_session() as session:
        run = session.query(ExperimentRun).filter_by(run_id=archive.run_id).first()
        if run is None:
            run = ExperimentRun(run_id=archive.run_id)
            session.add(run)
        else:
            session.query(RoundRecord).filter_by(run_pk=run.id).delete()

        run.preset = archive.config.preset
        run.dataset = archive.config.dataset
        run.seed = archive.config.seed
        run.status = status
        run.completed_at = datetime.utcnow()
        run.rounds = summary["rounds"]
        run.best_accuracy = summary["best_accuracy"]
        run.final_accuracy = summary["final_accuracy"]
        run.rounds_to_target = summary["rounds_to_target"]
        run.config_text = dump_config(archive.config)
        run.error_message = error
        session.flush()

        for report in archive.reports:
            session.add(RoundRecord(run_pk=run.id, **report.to_dict()))


def list_runs(database_url: str) -> List[Dict[str, Any]]:
    """Run history, oldest first."""
    init_db(database_url)
    with get_db_session() as session:
        runs = session.query(ExperimentRun).order_by(ExperimentRun.id).all()
        return [
            {
                "run_id": run.run_id,
                "preset": run.preset,
                "status": run.status,
                "rounds": run.rounds,
                "best_accuracy": run.best_accuracy,
                "rounds_to_target": run.rounds_to_target,
            }
            for run in runs
        ]
