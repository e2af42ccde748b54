# app/schemas/report_schema.py

"""
Report Schemas
--------------

Serializable results returned by the HTTP surface and written as JSON by
the CLI. Every report carries ``schema_version``.
"""

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field

from app.core.config import settings


class VersionedReport(BaseModel):
    """Base for JSON reports."""

    schema_version: int = Field(default_factory=lambda: settings.REPORT_SCHEMA_VERSION)


class Verdict(BaseModel):
    """
    Outcome of one assumption check.

    :param verdict: "pass", "fail" or "unverified".
    :type verdict: str

    :param detail: Short explanation.
    :type detail: str
    """

    verdict: Literal["pass", "fail", "unverified"]
    detail: str = ""


class ValidationReportOut(VersionedReport):
    """
    Per-assumption verdicts of the validate command.

    :param verdicts: Check name → verdict, in evaluation order.
    :type verdicts: Dict[str, Verdict]

    :param constants: Derived constants (α, Λ, Δ, δ, τ, C_T, L, ...), when available.
    :type constants: Dict[str, float]
    """

    verdicts: Dict[str, Verdict]
    constants: Dict[str, Optional[float]] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(item.verdict != "fail" for item in self.verdicts.values())


class EpochRowOut(BaseModel):
    """One epoch of a tracking comparison."""

    replica: int
    k: int
    n_k: int
    rho: float
    bound: float
    K_star: float
    K_T: float
    noise_term: float
    entry_term: float
    violated: bool


class TrackingSummaryOut(VersionedReport):
    """
    Tracking verification summary over replicas.

    :param violations: Epochs exceeding the bound, all epochs counted.
    :param violations_settled: Violations at epochs from the settling index on.
    :param growth_failures: Epochs failing the norm growth check.
    """

    replicas: int
    epochs: int
    max_rho: float
    violations: int
    violations_settled: int
    settling_index: Optional[int]
    growth_failures: int
    K3: float
    rows: List[EpochRowOut] = Field(default_factory=list)


class ConcentrationReportOut(VersionedReport):
    """Trapping frequency next to the theorem bound."""

    delta_tilde: float
    D: float
    gamma1: float
    gamma2: float
    omega: float
    C_star: float
    branch: Literal["quadratic", "linear"]
    theoretical_bound: float
    raw_bound: float
    vacuous: bool
    frequency: float
    ci: Tuple[float, float]
    ci_half_width: float
    replicas_total: int
    replicas_conditioned: int
    replicas_capped: int
    replicas_rejected: int
    settled_at_n0: bool
    horizon: int
    horizon_capped: bool
    window_empty: bool
    n0: int
    tau: float
    delta: float
    epsilon: float
    Delta: float
    K_T: float


class BoundRowOut(BaseModel):
    """Theorem bound at one entry index."""

    n0: int
    delta_tilde: float
    branch: Literal["quadratic", "linear"]
    bound: float
    vacuous: bool


class BoundTableOut(VersionedReport):
    """n0 sweep of the theorem bound."""

    C_star: float
    D: float
    rows: List[BoundRowOut]


class ReplicaSummaryOut(BaseModel):
    """Final state summary of one simulated replica."""

    replica: int
    seed: int
    bounded: bool
    steps: int
    disagreement: float
    distance_to_equilibrium: float


class SimulationSummaryOut(VersionedReport):
    """Replica summaries of the simulate command."""

    consensus_tolerance: float
    reached_consensus: int
    replicas: List[ReplicaSummaryOut]
