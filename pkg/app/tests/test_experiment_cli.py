# app/tests/test_experiment_cli.py

"""
Command Line Tests
------------------

End-to-end runs of the ``dsa`` subcommands through click's CliRunner:
exit codes, printed verdicts and the artifacts written to the run directory.
"""

import json
from pathlib import Path
from typing import Callable

import pytest
from click.testing import CliRunner

from app.cli import cli
from app.core.config import settings
from app.services.experiment_service import ExperimentService


CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def _run_dir(base: Path, command: str) -> Path:
    matches = sorted(base.glob(f"{command}-*"))
    assert len(matches) == 1, f"expected one {command} run directory under {base}"
    return matches[0]


def test_validate_passes_on_base_config(cli_runner: CliRunner, make_config: Callable, tmp_path: Path) -> None:
    """
    Test the validate command on a well-posed config.

    Steps:
    1. Run ``validate`` on the base config.
    2. Assert exit code 0 and a PASS line for the gossip matrix and the window bound.
    3. Assert validation.json and metadata.json were written.

    :return: None
    """

    result = cli_runner.invoke(cli, ["validate", "--config", str(make_config())])

    assert result.exit_code == 0, result.output
    assert "PASS" in result.output
    assert "gossip:" in result.output
    assert "schedule.window_bound:" in result.output

    run_dir = _run_dir(tmp_path / "runs", "validate")
    report = json.loads((run_dir / "validation.json").read_text(encoding="utf-8"))
    assert report["verdicts"]["gossip"]["verdict"] == "pass"
    assert report["constants"]["delta"] > 0
    assert (run_dir / "metadata.json").exists()


def test_validate_rejects_slow_window_schedule(cli_runner: CliRunner) -> None:
    """
    Test that a schedule with Σa = ∞ and Σa² < ∞ but unbounded (n+1)·a(n) fails.

    :return: None
    """

    result = cli_runner.invoke(cli, ["validate", "--config", str(CONFIGS / "counterexample_schedule.json")])

    assert result.exit_code == 1
    window = [line for line in result.output.splitlines() if "schedule.window_bound:" in line]
    assert window and window[0].startswith("FAIL")


def test_validate_rejects_periodic_gossip(cli_runner: CliRunner) -> None:
    result = cli_runner.invoke(cli, ["validate", "--config", str(CONFIGS / "periodic_gossip.json")])

    assert result.exit_code == 1
    assert "FAIL" in result.output
    assert "SpectralViolation" in result.output


def test_json_syntax_error_reports_line(cli_runner: CliRunner, tmp_path: Path) -> None:
    """
    Test ConfigParseError with the line of a JSON syntax error.

    :return: None
    """

    path = tmp_path / "broken.json"
    path.write_text('{\n  "schema_version": 1,\n  "name": ,\n}\n', encoding="utf-8")

    result = cli_runner.invoke(cli, ["validate", "--config", str(path)])

    assert result.exit_code == 1
    assert "ConfigParseError" in result.output
    assert "line 3" in result.output


def test_unknown_key_reports_field(cli_runner: CliRunner, make_config: Callable) -> None:
    """
    Test that a misspelled nested key is rejected with its dotted path.

    :return: None
    """

    path = make_config(problem={"thetta": [[1.0], [1.0]]})

    result = cli_runner.invoke(cli, ["validate", "--config", str(path)])

    assert result.exit_code == 1
    assert "field 'problem.thetta'" in result.output


def test_missing_config_file(cli_runner: CliRunner, tmp_path: Path) -> None:
    result = cli_runner.invoke(cli, ["validate", "--config", str(tmp_path / "absent.json")])

    assert result.exit_code == 1
    assert "ConfigParseError" in result.output


def test_simulate_writes_trajectories(cli_runner: CliRunner, make_config: Callable, tmp_path: Path) -> None:
    """
    Test the simulate command and its CSV artifacts.

    Steps:
    1. Simulate two replicas for 300 steps.
    2. Assert replicas.csv has one row per replica and trajectory.csv one row per node and step.

    :return: None
    """

    result = cli_runner.invoke(
        cli, ["simulate", "--config", str(make_config()), "--replicas", "2", "--horizon", "300"],
    )

    assert result.exit_code == 0, result.output
    run_dir = _run_dir(tmp_path / "runs", "simulate")
    replicas = (run_dir / "replicas.csv").read_text(encoding="utf-8").strip().splitlines()
    trajectory = (run_dir / "trajectory.csv").read_text(encoding="utf-8").strip().splitlines()
    assert len(replicas) == 1 + 2
    assert len(trajectory) == 1 + 301 * 2
    assert (run_dir / "grid.csv").exists()
    assert json.loads((run_dir / "summary.json").read_text(encoding="utf-8"))["replicas"]


def test_track_is_reproducible(cli_runner: CliRunner, make_config: Callable, tmp_path: Path) -> None:
    """
    Test that equal seeds give byte-identical tracking tables.

    Steps:
    1. Run ``track`` twice into two output directories with the same seed.
    2. Assert the two tracking.csv files are identical and contain no violation.

    :return: None
    """

    path = make_config()
    args = ["track", "--config", str(path), "--replicas", "2", "--horizon", "600", "--seed", "7"]

    first = cli_runner.invoke(cli, args + ["--out", str(tmp_path / "a")])
    second = cli_runner.invoke(cli, args + ["--out", str(tmp_path / "b")])

    assert first.exit_code == 0, first.output
    assert second.exit_code == 0, second.output
    left = (_run_dir(tmp_path / "a", "track") / "tracking.csv").read_bytes()
    right = (_run_dir(tmp_path / "b", "track") / "tracking.csv").read_bytes()
    assert left == right
    assert "violations: 0" in first.output

    summary = json.loads((_run_dir(tmp_path / "a", "track") / "tracking_summary.json").read_text(encoding="utf-8"))
    assert summary["violations"] == 0
    assert summary["replicas"] == 2


def test_bound_is_strictly_monotone_in_n0(cli_runner: CliRunner, tmp_path: Path) -> None:
    """
    Test the bound sweep where the bound is informative.

    Steps:
    1. Run ``bound`` on the small-noise linear config, whose D puts the bound inside (0, 1).
    2. Assert the rows are sorted by n0 and none is vacuous.
    3. Assert every value lies strictly between 0 and 1 and grows strictly with n0.

    :return: None
    """

    result = cli_runner.invoke(cli, ["bound", "--config", str(CONFIGS / "linear_trapping.json")])

    assert result.exit_code == 0, result.output
    table = json.loads((_run_dir(tmp_path / "runs", "bound") / "bound.json").read_text(encoding="utf-8"))
    rows = table["rows"]
    values = [row["bound"] for row in rows]
    assert [row["n0"] for row in rows] == list(range(40, 101, 10))
    assert not any(row["vacuous"] for row in rows)
    assert all(0.0 < v < 1.0 for v in values)
    assert all(left < right for left, right in zip(values, values[1:]))


def test_bound_is_vacuous_on_base_config(cli_runner: CliRunner, make_config: Callable, tmp_path: Path) -> None:
    result = cli_runner.invoke(cli, ["bound", "--config", str(make_config())])

    assert result.exit_code == 0, result.output
    table = json.loads((_run_dir(tmp_path / "runs", "bound") / "bound.json").read_text(encoding="utf-8"))
    assert [row["n0"] for row in table["rows"]] == list(range(10, 101, 10))
    assert all(row["vacuous"] and row["bound"] == 0.0 for row in table["rows"])


def test_trap_frequency_dominates_informative_bound(
    cli_runner: CliRunner, tmp_path: Path, monkeypatch: pytest.MonkeyPatch,
) -> None:
    """
    Test that the Monte Carlo frequency plus the CI half-width covers the bound.

    Steps:
    1. Lower the conditioning threshold to 10 and run ``trap`` with 12 replicas.
    2. Assert the theorem bound is non-vacuous and strictly inside (0, 1).
    3. Assert frequency + CI half-width ≥ the bound.

    :return: None
    """

    monkeypatch.setattr(settings, "MIN_CONDITIONED", 10)

    result = cli_runner.invoke(
        cli, ["trap", "--config", str(CONFIGS / "linear_trapping.json"), "--replicas", "12"],
    )

    assert result.exit_code == 0, result.output
    report = json.loads((_run_dir(tmp_path / "runs", "trap") / "concentration.json").read_text(encoding="utf-8"))
    assert not report["vacuous"]
    assert 0.0 < report["theoretical_bound"] < 1.0
    assert report["replicas_conditioned"] >= 10
    assert report["frequency"] + report["ci_half_width"] >= report["theoretical_bound"]


def test_bound_with_constant_schedule_diverges(cli_runner: CliRunner, make_config: Callable) -> None:
    path = make_config(schedule={"kind": "constant", "value": 0.1})

    result = cli_runner.invoke(cli, ["bound", "--config", str(path)])

    assert result.exit_code == 2
    assert "Divergent" in result.output


def test_trap_with_one_replica_is_underconditioned(cli_runner: CliRunner, make_config: Callable) -> None:
    """
    Test InsufficientConditioning (runtime exit code 2) with a single replica.

    :return: None
    """

    result = cli_runner.invoke(cli, ["trap", "--config", str(make_config()), "--replicas", "1"])

    assert result.exit_code == 2
    assert "InsufficientConditioning" in result.output


def test_unexpected_error_is_a_runtime_failure(
    cli_runner: CliRunner, make_config: Callable, monkeypatch: pytest.MonkeyPatch,
) -> None:
    """
    Test that an exception outside the simulator hierarchy exits with code 2.

    :return: None
    """

    def broken(config):
        raise ValueError("flow time must be non-negative")

    monkeypatch.setattr(ExperimentService, "validate", staticmethod(broken))

    result = cli_runner.invoke(cli, ["validate", "--config", str(make_config())])

    assert result.exit_code == 2
    assert "ValueError: flow time must be non-negative" in result.output
