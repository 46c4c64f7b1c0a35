"""
Report and table output.

Each run directory holds a report.json (the resolved config, the results, the
tolerances and every check with its margin) and one CSV per table. Floats are
written with 17 significant digits so a rerun with the same seed reproduces
the files byte for byte.
"""
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

FLOAT_FORMAT = "%.17g"

TABLE_COLUMNS = {
    "model_spectrum": ["re_mu", "im_mu", "nu", "multiplicity"],
    "assumptions": ["id", "passed", "method", "margin", "constant", "witness", "detail"],
    "eigs": ["h", "re_lambda", "im_lambda", "residual", "re_paired_mu", "im_paired_mu"],
    "asymptotics": ["h", "re_lambda", "im_lambda", "re_ratio", "im_ratio", "deviation"],
    "resolvent_line": ["h", "re_z", "im_z", "norm", "compensated"],
    "resolvent_parabolic": ["h", "re_z", "im_z", "norm", "compensated"],
    "resolvent_disc": ["h", "re_z", "im_z", "norm", "compensated"],
    "semigroup_decay": ["h", "t", "remainder", "fitted_rate", "a"],
    "semigroup_decay_control": ["h", "t", "remainder", "fitted_rate", "a"],
    "projections": ["h", "re_lambda", "im_lambda", "radius", "nodes", "idem_residual",
                    "re_trace", "im_trace", "rank", "norm", "drift", "commutator"],
}


@dataclass
class CheckResult:
    """One pass/fail check with the measured value and its threshold."""
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    margin: Optional[float] = None
    detail: str = ""


@dataclass
class Report:
    experiment: str
    config: Dict[str, Any]
    results: Dict[str, Any] = field(default_factory=dict)
    tolerances: Dict[str, Any] = field(default_factory=dict)
    checks: List[CheckResult] = field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def add_check(self, name: str, passed: bool, value=None, threshold=None,
                  margin=None, detail: str = "") -> CheckResult:
        check = CheckResult(name, bool(passed), _plain(value), _plain(threshold),
                            _plain(margin), detail)
        self.checks.append(check)
        return check

    def add_table(self, name: str, rows: List[Dict[str, Any]]) -> pd.DataFrame:
        frame = pd.DataFrame(rows, columns=TABLE_COLUMNS.get(name))
        if name in self.tables:
            frame = pd.concat([self.tables[name], frame], ignore_index=True)
        self.tables[name] = frame
        return frame


def _plain(value):
    if value is None:
        return None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


def to_jsonable(obj):
    """Complex numbers become [re, im]; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(obj.real)), to_jsonable(float(obj.imag))]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    return obj


def write_table(frame: pd.DataFrame, out_dir, name: str) -> Path:
    path = Path(out_dir) / f"{name}.csv"
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_report(report: Report, out_dir) -> Path:
    """Write report.json and every table. Returns the report path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, frame in report.tables.items():
        write_table(frame, out_dir, name)
    payload = {
        "experiment": report.experiment,
        "passed": report.passed,
        "error": report.error,
        "config": report.config,
        "results": report.results,
        "tolerances": report.tolerances,
        "checks": [asdict(c) for c in report.checks],
        "tables": sorted(f"{name}.csv" for name in report.tables),
    }
    path = out_dir / "report.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, indent=2, sort_keys=False)
    return path


def load_report(out_dir) -> Dict[str, Any]:
    with open(Path(out_dir) / "report.json", "r", encoding="utf-8") as f:
        return json.load(f)


def show_report(out_dir) -> None:
    """Print a summary of an existing output directory."""
    out_dir = Path(out_dir)
    data = load_report(out_dir)

    print(f"\n{'='*70}")
    print(f"{'RUN REPORT':^70}")
    print(f"{'='*70}\n")
    print(f"Experiment: {data['experiment']}")
    print(f"Directory:  {out_dir}")
    print(f"Seed:       {data['config'].get('seed')}")
    print(f"Result:     {'PASS' if data['passed'] else 'FAIL'}")
    if data.get("error"):
        print(f"Error:      {data['error']}")

    checks = data.get("checks", [])
    if checks:
        print(f"\nChecks ({sum(c['passed'] for c in checks)}/{len(checks)} passed):")
        for check in checks:
            mark = "ok  " if check["passed"] else "FAIL"
            value = check.get("value")
            threshold = check.get("threshold")
            numbers = ""
            if value is not None:
                numbers = f" value={value:.6g}" if isinstance(value, float) else f" value={value}"
            if threshold is not None:
                numbers += f" threshold={threshold}"
            print(f"  [{mark}] {check['name']}{numbers}")

    tables = data.get("tables", [])
    if tables:
        print("\nTables:")
        for name in tables:
            frame = pd.read_csv(out_dir / name)
            print(f"  {name:<28} {len(frame):>5} rows")
    print()
