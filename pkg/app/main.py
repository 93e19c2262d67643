"""
Main entry point for the FedSSC simulator.

Subcommands: run, sweep-beta, sweep-k, export-plot, verify.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from app import __version__
from app.config import TrainConfig, parse_config
from app.db.database import close_db
from app.errors import SimulatorError
from app.harness.archive import load_archive
from app.harness.plots import export_plot_csv
from app.harness.runner import execute_run
from app.harness.sweeps import BETA_METHODS, BETA_VALUES, K_METHOD, K_VALUES, sweep_beta, sweep_k, sweep_table
from app.harness.verify import run_verify
from app.utils.logging import get_logger, setup_logging

logger = get_logger(__name__)


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """One --flag per TrainConfig field; values are validated by the model."""
    parser.add_argument("--config", help="key=value config file ([sections] allowed)")
    group = parser.add_argument_group("overrides")
    for name, info in TrainConfig.model_fields.items():
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None, help=info.description)


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {name: getattr(args, name) for name in TrainConfig.model_fields if getattr(args, name, None) is not None}


def _resolve(args: argparse.Namespace) -> TrainConfig:
    return parse_config(args.config, _overrides(args))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedssc", allow_abbrev=False, description="Deterministic federated learning simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", allow_abbrev=False, help="Run one experiment and archive it")
    _add_config_arguments(run)
    run.add_argument("--run-id", default=None, help="Archive name, default <preset>-<random>")
    run.add_argument("--no-save", action="store_true", help="Skip the archive and database")

    beta = sub.add_parser("sweep-beta", allow_abbrev=False, help="Compare methods across Dirichlet concentrations")
    _add_config_arguments(beta)
    beta.add_argument("--betas", type=float, nargs="+", default=list(BETA_VALUES))
    beta.add_argument("--methods", nargs="+", default=list(BETA_METHODS))

    k = sub.add_parser("sweep-k", allow_abbrev=False, help="Vary the representations averaged per class")
    _add_config_arguments(k)
    k.add_argument("--k-values", type=int, nargs="+", default=list(K_VALUES))
    k.add_argument("--method", default=K_METHOD)

    plot = sub.add_parser("export-plot", allow_abbrev=False, help="CSV of accuracy per round for archived runs")
    plot.add_argument("archives", nargs="+", help="Archive directories")
    plot.add_argument("--output", default=None, help="CSV file, default stdout")

    verify = sub.add_parser("verify", allow_abbrev=False, help="Run the built-in oracle suite")
    verify.add_argument("--seeds", type=int, default=10)
    return parser


def _command_run(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    archive = execute_run(cfg, run_id=args.run_id, save=not args.no_save)
    summary = archive.summary
    print(
        f"{archive.run_id}: {summary['rounds']} rounds, best={summary['best_accuracy']}, "
        f"final={summary['final_accuracy']}, rounds_to_target={summary['rounds_to_target'] or 'not reached'}"
    )
    return 0


def _command_sweep_beta(args: argparse.Namespace) -> int:
    results = sweep_beta(_resolve(args), betas=args.betas, methods=args.methods)
    print("\n".join(sweep_table(results, "beta/method")))
    return 0


def _command_sweep_k(args: argparse.Namespace) -> int:
    results = sweep_k(_resolve(args), k_values=args.k_values, method=args.method)
    print("\n".join(sweep_table(results, "k")))
    return 0


def _command_export_plot(args: argparse.Namespace) -> int:
    archives = [load_archive(Path(directory)) for directory in args.archives]
    text = export_plot_csv(archives, args.output)
    if args.output is None:
        sys.stdout.write(text)
    return 0


def _command_verify(args: argparse.Namespace) -> int:
    report = run_verify(seeds=args.seeds)
    print("\n".join(report.lines()))
    return 0 if report.all_passed else 1


COMMANDS = {
    "run": _command_run,
    "sweep-beta": _command_sweep_beta,
    "sweep-k": _command_sweep_k,
    "export-plot": _command_export_plot,
    "verify": _command_verify,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments and dispatch a subcommand.

    Returns:
        0 on success, 1 on a simulator error or failed verification,
        2 on an unexpected exception
    """
    args = build_parser().parse_args(list(argv) if argv is not None else None)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except SimulatorError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception("Unexpected failure", command=args.command, error=str(e))
        return 2
    finally:
        close_db()


def main() -> None:
    """Main entry point."""
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
