"""
Command-line front end.

    nsa-spec run <config> [--out DIR] [--seed INT] [--jobs INT]
    nsa-spec verify <config> [--out DIR] [--seed INT] [--jobs INT]
    nsa-spec show <out_dir>
    nsa-spec history [--limit N]

Exit codes: 0 every check passed, 1 checks ran and at least one failed,
2 configuration or I/O error (nothing is written).
"""
import argparse
import hashlib
import json
import logging
import os
import time
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from nsaspec import db
from nsaspec.config_loader import retarget, load_config
from nsaspec.errors import ConfigError, NsaSpecError
from nsaspec.experiments import run_experiment
from nsaspec.report import Report, show_report, to_jsonable, write_report

load_dotenv()

logger = logging.getLogger(__name__)

LOG_LEVEL = os.getenv("NSA_SPEC_LOG_LEVEL", "INFO")

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG_ERROR = 2


def configure_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def config_digest(resolved: dict) -> str:
    text = json.dumps(to_jsonable(resolved), sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _record(experiment: str, config_path, digest: str, seed: int, exit_code: int,
            elapsed: float, report: Optional[Report] = None, error: Optional[str] = None) -> None:
    status = {EXIT_OK: "success", EXIT_CHECKS_FAILED: "failed"}.get(exit_code, "error")
    checks = report.checks if report is not None else []
    db.log_run(experiment, str(config_path), digest, seed, status=status,
               exit_code=exit_code,
               checks_passed=sum(c.passed for c in checks),
               checks_failed=sum(not c.passed for c in checks),
               elapsed_seconds=round(elapsed, 3), error=error,
               checks=[{"name": c.name, "passed": c.passed,
                        "value": _number_or_none(c.value),
                        "threshold": _number_or_none(c.threshold),
                        "margin": _number_or_none(c.margin),
                        "detail": c.detail} for c in checks])


def _number_or_none(value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    return float(value)


def run(config_path, out: Optional[str] = None, seed: Optional[int] = None,
        jobs: Optional[int] = None, experiment: Optional[str] = None) -> int:
    """
    Load, run and report one experiment.

    Args:
        config_path: JSON experiment config
        out, seed, jobs: command-line overrides
        experiment: run as this kind instead of the config's own (verify)

    Returns:
        int: the exit code
    """
    started = time.perf_counter()
    try:
        config = load_config(config_path).with_overrides(out=out, seed=seed, jobs=jobs)
        if experiment is not None:
            config = retarget(config, experiment)
    except ConfigError as exc:
        print(f"Configuration error: {exc}")
        _record(experiment or "unknown", config_path, "", seed or 0, EXIT_CONFIG_ERROR,
                time.perf_counter() - started, error=str(exc))
        return EXIT_CONFIG_ERROR

    digest = config_digest(config.resolved)
    print(f"Running {config.experiment} from {config_path} (seed {config.seed}, "
          f"{config.jobs} job(s))")

    report = Report(experiment=config.experiment, config=config.resolved)
    try:
        run_experiment(config, report)
    except NsaSpecError as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        report.add_check(config.experiment, False, detail=report.error)
        logger.error("%s stopped: %s", config.experiment, report.error)

    try:
        path = write_report(report, config.output_dir)
    except OSError as exc:
        print(f"Could not write results to {config.output_dir}: {exc}")
        _record(config.experiment, config_path, digest, config.seed, EXIT_CONFIG_ERROR,
                time.perf_counter() - started, report, error=str(exc))
        return EXIT_CONFIG_ERROR

    exit_code = EXIT_OK if report.passed else EXIT_CHECKS_FAILED
    elapsed = time.perf_counter() - started
    _record(config.experiment, config_path, digest, config.seed, exit_code, elapsed, report,
            error=report.error)

    passed = sum(c.passed for c in report.checks)
    print(f"\n{passed}/{len(report.checks)} checks passed in {elapsed:.1f}s")
    for check in report.checks:
        if not check.passed:
            print(f"  FAILED {check.name}: {check.detail or check.value}")
    print(f"Report written to {path}")
    return exit_code


def show(out_dir) -> int:
    try:
        show_report(out_dir)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"Cannot read a report in {out_dir}: {exc}")
        return EXIT_CONFIG_ERROR
    return EXIT_OK


def history(limit: int = 10) -> int:
    """Print the latest runs and per-experiment pass rates from the ledger."""
    runs = db.recent_runs(limit)

    print(f"\n{'='*78}")
    print(f"{'RUN HISTORY':^78}")
    print(f"{'='*78}\n")
    if not runs:
        print("No runs recorded yet.")
        return EXIT_OK

    for row in runs:
        print(f"#{row['id']:<5} {row['started_at']}  {row['experiment']:<16} "
              f"exit {row['exit_code']}  {row['checks_passed']}/"
              f"{row['checks_passed'] + row['checks_failed']} checks  "
              f"{row['elapsed_seconds']:.1f}s")
        if row.get("error_message"):
            print(f"       {row['error_message'][:70]}")

    print(f"\n{'Experiment':<18}{'Runs':>6}{'Passed':>8}{'Mean s':>10}")
    for row in db.pass_rates():
        print(f"{row['experiment']:<18}{row['runs']:>6}{row['passed']:>8}"
              f"{row['mean_seconds'] or 0:>10}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsa-spec",
        description="Spectra, resolvents and semigroups of non-selfadjoint quadratic "
                    "magnetic Schroedinger operators",
    )
    sub = parser.add_subparsers(dest="command")

    for name, text in (("run", "Run the experiment named in a config"),
                       ("verify", "Run every acceptance check on a config's potential")):
        command = sub.add_parser(name, help=text)
        command.add_argument("config", help="Path to a JSON experiment config")
        command.add_argument("--out", help="Output directory (overrides the config)")
        command.add_argument("--seed", type=int, help="Master seed (overrides the config)")
        command.add_argument("--jobs", type=int, help="Worker threads (overrides the config)")

    show_cmd = sub.add_parser("show", help="Summarize an output directory")
    show_cmd.add_argument("out_dir")

    history_cmd = sub.add_parser("history", help="Recent runs from the ledger")
    history_cmd.add_argument("--limit", type=int, default=10)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging()

    if args.command == "run":
        return run(args.config, args.out, args.seed, args.jobs)
    elif args.command == "verify":
        return run(args.config, args.out, args.seed, args.jobs, experiment="verify-all")
    elif args.command == "show":
        return show(Path(args.out_dir))
    elif args.command == "history":
        return history(args.limit)
    parser.print_help()
    return EXIT_CONFIG_ERROR
