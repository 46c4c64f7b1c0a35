"""
Run Ledger
==========

Every CLI run is recorded in a small SQLite database so past experiments can
be compared without digging through output folders.

KEY CONCEPTS:
-------------
1. The ledger lives in one .db file (data/nsa_spec_runs.db by default,
   NSA_SPEC_DB overrides it)
2. sqlite-utils creates the tables on first insert, so there is no schema file
3. `runs` has one row per invocation, `checks` one row per acceptance check,
   linked by run_id

COMMON OPERATIONS:
------------------
- init_database(): create the tables if they don't exist
- log_run(): record one invocation, returns its id
- log_check(): record one check result for a run
- recent_runs() / pass_rates(): what `history` prints

Example usage:
    from nsaspec.db import log_run, log_check

    run_id = log_run("eigs", "config/examples/eigs_1d.json", "ab12...", 0,
                     status="success", exit_code=0)
    log_check(run_id, "eigenvalues_found", True, value=3, threshold=1)
"""
import os
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional

import sqlite_utils
from dotenv import load_dotenv

load_dotenv()

# =============================================================================
# PATH CONFIGURATION
# =============================================================================

PROJECT_ROOT = Path(__file__).parent.parent
DATA_DIR = PROJECT_ROOT / "data"
DB_PATH = Path(os.getenv("NSA_SPEC_DB", str(DATA_DIR / "nsa_spec_runs.db")))

RUN_COLUMNS = {
    "id": int,
    "experiment": str,
    "config_path": str,
    "config_digest": str,
    "seed": int,
    "status": str,
    "exit_code": int,
    "checks_passed": int,
    "checks_failed": int,
    "elapsed_seconds": float,
    "error_message": str,
    "started_at": str,
}

CHECK_COLUMNS = {
    "id": int,
    "run_id": int,
    "name": str,
    "passed": int,
    "value": float,
    "threshold": float,
    "margin": float,
    "detail": str,
}


# =============================================================================
# DATABASE CONNECTION
# =============================================================================

def get_database() -> sqlite_utils.Database:
    """Open the ledger, creating its folder if needed."""
    DB_PATH.parent.mkdir(parents=True, exist_ok=True)
    return sqlite_utils.Database(DB_PATH)


def init_database() -> sqlite_utils.Database:
    """
    Create the `runs` and `checks` tables. Safe to call repeatedly.
    """
    db = get_database()
    if "runs" not in db.table_names():
        db["runs"].create(RUN_COLUMNS, pk="id")
    if "checks" not in db.table_names():
        db["checks"].create(CHECK_COLUMNS, pk="id", foreign_keys=[("run_id", "runs", "id")])
        db["checks"].create_index(["run_id"])
    return db


@contextmanager
def open_ledger() -> Iterator[sqlite_utils.Database]:
    """
    The initialized ledger for one block of work; the connection is closed on exit.

        with open_ledger() as db:
            db["runs"].count
    """
    db = init_database()
    try:
        yield db
    finally:
        db.conn.close()


# =============================================================================
# RUN LOGGING
# =============================================================================

def log_run(experiment: str, config_path: Optional[str], config_digest: str, seed: int,
            status: str = "success", exit_code: int = 0, checks_passed: int = 0,
            checks_failed: int = 0, elapsed_seconds: float = 0.0,
            error: Optional[str] = None, checks: Iterable[Dict] = ()) -> int:
    """
    Record one CLI invocation.

    Args:
        experiment: experiment kind, e.g. "verify-all"
        config_path: the config file that was run
        config_digest: sha256 of the resolved config, to spot identical reruns
        status: "success", "failed" or "error"
        exit_code: 0, 1 or 2
        error: message when the run stopped early
        checks: check rows (name, passed, value, threshold, margin, detail)
            written with the run over the same connection

    Returns:
        int: the new row id, used to attach checks

    To view the ledger:
        SELECT * FROM runs ORDER BY started_at DESC LIMIT 20;
    """
    with open_ledger() as db:
        run_id = db["runs"].insert({
            "experiment": experiment,
            "config_path": config_path,
            "config_digest": config_digest,
            "seed": seed,
            "status": status,
            "exit_code": exit_code,
            "checks_passed": checks_passed,
            "checks_failed": checks_failed,
            "elapsed_seconds": elapsed_seconds,
            "error_message": error,
            "started_at": datetime.now().isoformat(timespec="seconds"),
        }).last_pk
        rows = [_check_row(run_id, **check) for check in checks]
        if rows:
            db["checks"].insert_all(rows)
        return run_id


def _check_row(run_id: int, name: str, passed: bool, value: Optional[float] = None,
               threshold: Optional[float] = None, margin: Optional[float] = None,
               detail: str = "") -> Dict:
    return {
        "run_id": run_id,
        "name": name,
        "passed": int(bool(passed)),
        "value": value,
        "threshold": threshold,
        "margin": margin,
        "detail": detail,
    }


def log_check(run_id: int, name: str, passed: bool, value: Optional[float] = None,
              threshold: Optional[float] = None, margin: Optional[float] = None,
              detail: str = "") -> None:
    """Record one acceptance check of a run."""
    with open_ledger() as db:
        db["checks"].insert(_check_row(run_id, name, passed, value, threshold, margin, detail))


# =============================================================================
# UTILITY FUNCTIONS
# =============================================================================

def recent_runs(limit: int = 10) -> List[Dict]:
    """The newest runs first."""
    with open_ledger() as db:
        return list(db["runs"].rows_where(order_by="id desc", limit=limit))


def checks_for(run_id: int) -> List[Dict]:
    with open_ledger() as db:
        return list(db["checks"].rows_where("run_id = ?", [run_id], order_by="id"))


def pass_rates() -> List[Dict]:
    """
    Per experiment kind: number of runs and the share that exited 0.
    """
    with open_ledger() as db:
        return list(db.query(
            """
            SELECT experiment,
                   COUNT(*) AS runs,
                   SUM(CASE WHEN exit_code = 0 THEN 1 ELSE 0 END) AS passed,
                   ROUND(AVG(elapsed_seconds), 2) AS mean_seconds
            FROM runs
            GROUP BY experiment
            ORDER BY experiment
            """
        ))


def get_run_count() -> int:
    with open_ledger() as db:
        return db["runs"].count


if __name__ == "__main__":
    init_database()
    print(f"Ledger at: {DB_PATH}")
    print(f"Runs recorded: {get_run_count()}")
