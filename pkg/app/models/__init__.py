# app/models/__init__.py

from .gossip_model import GossipModel
from .hmetric import HMetric
from .schedule import StepSchedule, ScheduleReport, TimeGrid
from .problem import (
    Region,
    QuadraticLyapunov,
    DriftField,
    LinearDrift,
    DoubleWellDrift,
    UniformNoise,
    AttractorSpec,
    ProblemConstants,
    ProblemInstance,
)
from .run import RunRecord, ReferenceSegment
from .reports import (
    EpochTracking,
    TrackingReport,
    GrowthReport,
    AzumaTail,
    MartingaleBoundParams,
    TheoremBound,
    ConcentrationReport,
)

__all__ = [
    "GossipModel",
    "HMetric",
    "StepSchedule",
    "ScheduleReport",
    "TimeGrid",
    "Region",
    "QuadraticLyapunov",
    "DriftField",
    "LinearDrift",
    "DoubleWellDrift",
    "UniformNoise",
    "AttractorSpec",
    "ProblemConstants",
    "ProblemInstance",
    "RunRecord",
    "ReferenceSegment",
    "EpochTracking",
    "TrackingReport",
    "GrowthReport",
    "AzumaTail",
    "MartingaleBoundParams",
    "TheoremBound",
    "ConcentrationReport",
]
