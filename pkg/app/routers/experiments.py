# app/routers/experiments.py

"""
Experiments Router
------------------

HTTP surface over the experiment commands:

- validate: assumption verdicts for a config
- simulate: replica summaries
- track: tracking verification summary
- trap: Monte Carlo trapping report
- bound: theorem bound table

Every endpoint takes the experiment config as its JSON body and returns the
same report the CLI writes. Nothing is persisted. All logic lives in
ExperimentService.
"""

from fastapi import APIRouter, status

from app.schemas.experiment_schema import ExperimentConfig
from app.schemas.message_schema import Message
from app.schemas.report_schema import (
    BoundTableOut,
    ConcentrationReportOut,
    SimulationSummaryOut,
    TrackingSummaryOut,
    ValidationReportOut,
)
from app.services.experiment_service import ExperimentService


ERRORS = {
    status.HTTP_409_CONFLICT: {"model": Message},
    status.HTTP_422_UNPROCESSABLE_ENTITY: {"model": Message},
    status.HTTP_500_INTERNAL_SERVER_ERROR: {"model": Message},
}

router = APIRouter(prefix="/experiments", tags=["Experiments"], responses=ERRORS)


@router.post("/validate", response_model=ValidationReportOut)
def validate_experiment(config: ExperimentConfig) -> ValidationReportOut:
    """
    Check every standing assumption of a config.

    Failed checks are reported as verdicts, not as errors.

    :param config: Experiment config.
    :type config: ExperimentConfig

    :return: Verdicts and derived constants.
    :rtype: ValidationReportOut
    """

    return ExperimentService.validate(config)


@router.post("/simulate", response_model=SimulationSummaryOut)
def simulate_experiment(config: ExperimentConfig) -> SimulationSummaryOut:
    """Run the replicas and summarize their final states."""
    summary, _, _ = ExperimentService.simulate(config)
    return summary


@router.post("/track", response_model=TrackingSummaryOut)
def track_experiment(config: ExperimentConfig) -> TrackingSummaryOut:
    """
    Verify the pathwise tracking bound on every replica.

    :param config: Experiment config with an admissible schedule.
    :type config: ExperimentConfig

    :return: Per-epoch rows and their summary.
    :rtype: TrackingSummaryOut
    """

    return ExperimentService.track(config)


@router.post("/trap", response_model=ConcentrationReportOut)
def trap_experiment(config: ExperimentConfig) -> ConcentrationReportOut:
    """
    Estimate the trapping probability from ``n0`` and compare it with the theorem bound.

    Responds 409 when too few replicas satisfy the entry event.

    :param config: Experiment config.
    :type config: ExperimentConfig

    :return: The concentration report.
    :rtype: ConcentrationReportOut
    """

    return ExperimentService.trap(config)


@router.post("/bound", response_model=BoundTableOut)
def bound_experiment(config: ExperimentConfig) -> BoundTableOut:
    """Tabulate the theorem bound over ``config.bound.n0_values``."""
    return ExperimentService.bound(config)
