# app/schemas/__init__.py

from .experiment_schema import (
    ExperimentConfig,
    GossipSpec,
    RegionSpec,
    ProblemSpec,
    ScheduleSpec,
    BoundSpec,
)
from .report_schema import (
    Verdict,
    ValidationReportOut,
    EpochRowOut,
    TrackingSummaryOut,
    ConcentrationReportOut,
    BoundRowOut,
    BoundTableOut,
    ReplicaSummaryOut,
    SimulationSummaryOut,
)
from .message_schema import Message

__all__ = [
    "ExperimentConfig",
    "GossipSpec",
    "RegionSpec",
    "ProblemSpec",
    "ScheduleSpec",
    "BoundSpec",
    "Verdict",
    "ValidationReportOut",
    "EpochRowOut",
    "TrackingSummaryOut",
    "ConcentrationReportOut",
    "BoundRowOut",
    "BoundTableOut",
    "ReplicaSummaryOut",
    "SimulationSummaryOut",
    "Message"
]
