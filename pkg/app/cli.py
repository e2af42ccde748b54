# app/cli.py

"""
Command Line Interface
----------------------

Batch front end of the simulator:

    python -m app validate --config configs/linear.json
    python -m app track --config configs/linear.json --replicas 20 --workers 4

Subcommands: validate, simulate, track, trap, bound. Each one writes a run
directory (see ``RunRepository``) and prints a short summary.

Exit codes: 0 success, 1 validation failure, 2 runtime error.
"""

import functools
from datetime import datetime, timezone
from typing import Any, Callable, Optional

import click
import numpy as np
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import ConfigParseError, RUNTIME_EXIT_CODE, SimulationError, VALIDATION_EXIT_CODE
from app.core.run_log import configure_logging, log_run_event
from app.repositories.run_repository import RunRepository
from app.schemas.experiment_schema import ExperimentConfig
from app.services.experiment_service import ExperimentService


def experiment_options(command: Callable[..., Any]) -> Callable[..., Any]:
    """Shared flags of every subcommand."""
    options = [
        click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                     help="Experiment config (JSON)."),
        click.option("--out", default=None, help="Base output directory."),
        click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None, help="Master seed."),
        click.option("--replicas", type=click.IntRange(min=1), default=None, help="Number of replicas."),
        click.option("--workers", type=click.IntRange(min=0), default=None,
                     help="Worker processes (0 = machine parallelism)."),
        click.option("--horizon", type=click.IntRange(min=1), default=None, help="Iterations per replica."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def handle_errors(command: Callable[..., Any]) -> Callable[..., Any]:
    """
    Report errors on stderr and exit with their code.

    A ``SimulationError`` carries its own exit code; any other exception
    raised by the services is a runtime error.
    """

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except SimulationError as exc:
            log_run_event(command.__name__, "failed", error=type(exc).__name__)
            click.echo(f"error: {type(exc).__name__}: {exc.detail}", err=True)
            click.get_current_context().exit(exc.exit_code)
        except Exception as exc:
            log_run_event(command.__name__, "error", error=type(exc).__name__, detail=str(exc))
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            click.get_current_context().exit(RUNTIME_EXIT_CODE)

    return wrapper


def load(
    config_path: str,
    out: Optional[str],
    seed: Optional[int],
    replicas: Optional[int],
    workers: Optional[int],
    horizon: Optional[int],
) -> ExperimentConfig:
    """
    Parse the config and apply flag overrides.

    :raises ConfigParseError: If the file or an override is invalid.

    :return: The effective config.
    :rtype: ExperimentConfig
    """

    config = ExperimentService.load_config(config_path)
    try:
        return config.with_overrides(
            output_dir=out, master_seed=seed, replicas=replicas, workers=workers, horizon=horizon,
        )
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigParseError(first["msg"], field=".".join(str(p) for p in first["loc"])) from exc


@click.group()
@click.option("--log-level", default=None, help="Logging level (default from settings).")
def cli(log_level: Optional[str]) -> None:
    """Distributed stochastic approximation simulator."""
    configure_logging(log_level or settings.LOG_LEVEL)


@cli.command()
@experiment_options
@handle_errors
def validate(config_path, out, seed, replicas, workers, horizon) -> None:
    """Check every standing assumption of a config."""
    started = datetime.now(timezone.utc)
    config = load(config_path, out, seed, replicas, workers, horizon)
    report = ExperimentService.validate(config)

    run_dir = RunRepository.create_run_dir("validate", config)
    RunRepository.write_report(run_dir, "validation", report)
    RunRepository.write_metadata(run_dir, "validate", started, passed=report.passed)

    for name, item in report.verdicts.items():
        click.echo(f"{item.verdict.upper():<10} {name}: {item.detail}")
    click.echo(f"run directory: {run_dir}")
    if not report.passed:
        click.get_current_context().exit(VALIDATION_EXIT_CODE)


@cli.command()
@experiment_options
@handle_errors
def simulate(config_path, out, seed, replicas, workers, horizon) -> None:
    """Run replicas and dump the trajectory of replica 0."""
    started = datetime.now(timezone.utc)
    config = load(config_path, out, seed, replicas, workers, horizon)
    summary, record, grid = ExperimentService.simulate(config)

    run_dir = RunRepository.create_run_dir("simulate", config)
    RunRepository.write_csv(
        run_dir / "replicas.csv",
        ["replica", "seed", "bounded", "steps", "disagreement", "distance_to_equilibrium"],
        ([r.replica, r.seed, r.bounded, r.steps, r.disagreement, r.distance_to_equilibrium]
         for r in summary.replicas),
    )
    RunRepository.write_csv(
        run_dir / "trajectory.csv",
        ["n", "t", "node", "coordinate", "value"],
        ExperimentService.trajectory_rows(record, grid),
    )
    RunRepository.write_csv(
        run_dir / "grid.csv",
        ["k", "n_k", "T_k", "upsilon"],
        ([k, int(grid.n_k[k]), float(grid.T_m[k]), int(grid.upsilon[k])] for k in range(grid.epochs)),
    )
    RunRepository.write_report(run_dir, "summary", summary)
    RunRepository.write_metadata(run_dir, "simulate", started)

    click.echo(f"replicas: {len(summary.replicas)}, reached consensus: {summary.reached_consensus}")
    click.echo(f"run directory: {run_dir}")


@cli.command()
@experiment_options
@handle_errors
def track(config_path, out, seed, replicas, workers, horizon) -> None:
    """Verify the pathwise tracking bound on every replica."""
    started = datetime.now(timezone.utc)
    config = load(config_path, out, seed, replicas, workers, horizon)
    summary = ExperimentService.track(config)

    run_dir = RunRepository.create_run_dir("track", config)
    RunRepository.write_csv(
        run_dir / "tracking.csv",
        ["replica", "k", "n_k", "rho", "bound", "K_star", "K_T", "noise_term", "entry_term", "violated"],
        ([r.replica, r.k, r.n_k, r.rho, r.bound, r.K_star, r.K_T, r.noise_term, r.entry_term, r.violated]
         for r in summary.rows),
    )

    # epoch vs worst ρ_k and tightest bound over replicas
    plot = {}
    for row in summary.rows:
        rho, bound = plot.get(row.k, (-np.inf, np.inf))
        plot[row.k] = (max(rho, row.rho), min(bound, row.bound))
    RunRepository.write_csv(
        run_dir / "plot.csv",
        ["k", "rho_max", "bound_min"],
        ([k, rho, bound] for k, (rho, bound) in sorted(plot.items())),
    )
    RunRepository.write_report(run_dir, "tracking_summary", summary.model_copy(update={"rows": []}))
    RunRepository.write_metadata(run_dir, "track", started)

    click.echo(f"replicas: {summary.replicas}, epochs: {summary.epochs}, max rho: {summary.max_rho:.6g}")
    click.echo(f"violations: {summary.violations} ({summary.violations_settled} after the settling index "
               f"{summary.settling_index})")
    click.echo(f"run directory: {run_dir}")


@cli.command()
@experiment_options
@handle_errors
def trap(config_path, out, seed, replicas, workers, horizon) -> None:
    """Estimate the trapping probability and compare it with the theorem bound."""
    started = datetime.now(timezone.utc)
    config = load(config_path, out, seed, replicas, workers, horizon)
    report = ExperimentService.trap(config)

    run_dir = RunRepository.create_run_dir("trap", config)
    RunRepository.write_report(run_dir, "concentration", report)
    RunRepository.write_metadata(run_dir, "trap", started)

    flag = ", vacuous" if report.vacuous else ""
    click.echo(f"theoretical: {report.theoretical_bound:.6g} ({report.branch} branch{flag})")
    click.echo(f"empirical:   {report.frequency:.6g} CI [{report.ci[0]:.6g}, {report.ci[1]:.6g}] "
               f"over {report.replicas_conditioned} of {report.replicas_total} replicas")
    if report.horizon_capped:
        click.echo(f"horizon capped at {report.horizon}")
    click.echo(f"run directory: {run_dir}")


@cli.command()
@experiment_options
@handle_errors
def bound(config_path, out, seed, replicas, workers, horizon) -> None:
    """Tabulate the theorem bound over the configured n0 sweep."""
    started = datetime.now(timezone.utc)
    config = load(config_path, out, seed, replicas, workers, horizon)
    table = ExperimentService.bound(config)

    run_dir = RunRepository.create_run_dir("bound", config)
    RunRepository.write_csv(
        run_dir / "bound.csv",
        ["n0", "delta_tilde", "branch", "bound", "vacuous"],
        ([r.n0, r.delta_tilde, r.branch, r.bound, r.vacuous] for r in table.rows),
    )
    RunRepository.write_report(run_dir, "bound", table)
    RunRepository.write_metadata(run_dir, "bound", started)

    for row in table.rows:
        click.echo(f"n0={row.n0:<8} {row.branch:<9} {row.bound:.6g}")
    click.echo(f"run directory: {run_dir}")


def main() -> None:
    cli(prog_name="dsa")


if __name__ == "__main__":
    main()
