"""
Tests for the nsa-spec command line.
=====================================

Every test points the run ledger at a temporary file, since the CLI records
each invocation (config errors included).

Run these tests with:
    pytest tests/test_cli.py -v

The full verify-all run is marked slow:
    pytest tests/test_cli.py -v -m slow
"""

import json
import sys
from pathlib import Path

import pandas as pd
import pytest

# Add parent directory to path so we can import the nsaspec package
sys.path.insert(0, str(Path(__file__).parent.parent))

import nsaspec.db as db_module
from nsaspec.cli import (
    EXIT_CHECKS_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    config_digest,
    main,
    run,
)
from nsaspec.config_loader import CONFIG_DIR

EXAMPLES = CONFIG_DIR / "examples"


@pytest.fixture(autouse=True)
def temp_ledger(tmp_path, monkeypatch):
    monkeypatch.setattr(db_module, "DB_PATH", tmp_path / "ledger.db")


# =============================================================================
# Tests for run
# =============================================================================

class TestRun:

    def test_model_spectrum_passes(self, tmp_path):
        out = tmp_path / "v2i"
        code = run(EXAMPLES / "model_spectrum_v2i.json", out=str(out))
        assert code == EXIT_OK

        frame = pd.read_csv(out / "model_spectrum.csv", dtype={"nu": str})
        assert frame["re_mu"][0] == pytest.approx(0.70711, abs=1e-5)
        assert frame["im_mu"][0] == pytest.approx(0.70711, abs=1e-5)

        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["passed"] is True
        assert report["config"]["output_dir"] == str(out)

    def test_same_seed_same_files(self, tmp_path):
        run(EXAMPLES / "model_spectrum_v2i.json", out=str(tmp_path / "a"))
        run(EXAMPLES / "model_spectrum_v2i.json", out=str(tmp_path / "b"))
        for name in ("report.json", "model_spectrum.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_config_error_writes_nothing(self, tmp_path, capsys):
        config = tmp_path / "eigs.json"
        out = tmp_path / "never"
        config.write_text(json.dumps({
            "experiment": "eigs",
            "potential": {"dim": 1, "terms": [{"coeff": 1, "alpha": [2]}]},
            "output_dir": str(out),
        }), encoding="utf-8")

        assert run(config) == EXIT_CONFIG_ERROR
        assert not out.exists()
        assert "grid.N" in capsys.readouterr().out

    @pytest.mark.parametrize("section, value", [("grid", None), ("window", 3), ("hermite", [1])])
    def test_malformed_section_exits_two(self, tmp_path, capsys, section, value):
        config = tmp_path / "bad.json"
        out = tmp_path / "never"
        config.write_text(json.dumps({
            "experiment": "model-spectrum",
            "model": {"V": [[[0.0, 2.0]]]},
            "output_dir": str(out),
            section: value,
        }), encoding="utf-8")

        assert main(["run", str(config)]) == EXIT_CONFIG_ERROR
        assert not out.exists()
        assert f"{section}: expected an object" in capsys.readouterr().out

    def test_config_error_is_recorded(self, tmp_path):
        run(tmp_path / "missing.json")
        (row,) = db_module.recent_runs()
        assert row["exit_code"] == EXIT_CONFIG_ERROR
        assert row["status"] == "error"

    def test_checks_are_recorded(self, tmp_path):
        run(EXAMPLES / "model_spectrum_v2i.json", out=str(tmp_path / "run"))
        (row,) = db_module.recent_runs()
        assert row["experiment"] == "model-spectrum"
        assert row["checks_failed"] == 0
        assert len(db_module.checks_for(row["id"])) == row["checks_passed"]

    def test_stage_failure_exits_one(self, tmp_path):
        """A potential whose declared minimum is not a zero of Re V stops with a failed check."""
        config = tmp_path / "eigs.json"
        config.write_text(json.dumps({
            "experiment": "eigs",
            "potential": {"dim": 1, "terms": [{"coeff": 1, "alpha": [2]}], "minima": [[1.0]]},
            "grid": {"L": 6.0, "N": 200},
            "h": [0.2],
        }), encoding="utf-8")

        assert run(config, out=str(tmp_path / "out")) == EXIT_CHECKS_FAILED
        report = json.loads((tmp_path / "out" / "report.json").read_text(encoding="utf-8"))
        assert report["error"].startswith("NotAMinimum")

    def test_digest_ignores_key_order(self):
        assert config_digest({"a": 1, "b": [1j]}) == config_digest({"b": [1j], "a": 1})


# =============================================================================
# Tests for main()
# =============================================================================

class TestMain:

    def test_run_command(self, tmp_path):
        out = tmp_path / "magnetic"
        code = main(["run", str(EXAMPLES / "magnetic_2d_model.json"), "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "model_spectrum.csv").exists()

    def test_seed_flag_reaches_report(self, tmp_path):
        out = tmp_path / "seeded"
        main(["run", str(EXAMPLES / "model_spectrum_v2i.json"), "--out", str(out), "--seed", "5"])
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["config"]["seed"] == 5

    def test_verify_needs_a_potential(self, tmp_path):
        code = main(["verify", str(EXAMPLES / "model_spectrum_v2i.json"),
                     "--out", str(tmp_path / "x")])
        assert code == EXIT_CONFIG_ERROR

    def test_negative_seed(self, tmp_path):
        code = main(["run", str(EXAMPLES / "model_spectrum_v2i.json"), "--seed", "-1",
                     "--out", str(tmp_path / "x")])
        assert code == EXIT_CONFIG_ERROR

    def test_show(self, tmp_path, capsys):
        out = tmp_path / "v2i"
        main(["run", str(EXAMPLES / "model_spectrum_v2i.json"), "--out", str(out)])
        capsys.readouterr()
        assert main(["show", str(out)]) == EXIT_OK
        assert "PASS" in capsys.readouterr().out

    def test_show_missing_directory(self, tmp_path):
        assert main(["show", str(tmp_path / "nothing")]) == EXIT_CONFIG_ERROR

    def test_history(self, tmp_path, capsys):
        assert main(["history"]) == EXIT_OK
        assert "No runs recorded yet" in capsys.readouterr().out
        main(["run", str(EXAMPLES / "model_spectrum_v2i.json"), "--out", str(tmp_path / "r")])
        capsys.readouterr()
        main(["history", "--limit", "5"])
        assert "model-spectrum" in capsys.readouterr().out

    def test_no_command(self, capsys):
        assert main([]) == EXIT_CONFIG_ERROR


# =============================================================================
# Full acceptance run
# =============================================================================

@pytest.mark.slow
class TestVerifyAll:

    def test_cubic_perturbation(self, tmp_path):
        out = tmp_path / "cubic"
        code = main(["verify", str(EXAMPLES / "cubic_perturbation_1d.json"), "--out", str(out)])
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        assert code == EXIT_OK, f"failed checks: {failed}"
        potentials = report["results"]["stage_potentials"]
        assert len(potentials["leading_order"]["terms"]) == 2
        assert len(potentials["semigroup"]["terms"]) == 1
        assert len(potentials["resolvent"]["terms"]) == 1
        for table in ("eigs", "asymptotics", "resolvent_line", "resolvent_parabolic",
                      "semigroup_decay", "semigroup_decay_control", "projections"):
            assert (out / f"{table}.csv").exists()
