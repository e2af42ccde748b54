# app/models/reports.py

"""
Results produced by the tracking and concentration analyses.
"""

from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class EpochTracking:
    """
    Tracking comparison for one epoch.

    ``bound = K_star + noise_term + entry_term``; the noise and entry terms
    already include the K_T factor.
    """

    k: int
    n_k: int
    rho: float
    K_star: float
    K_T: float
    noise_term: float
    entry_term: float
    drift_bound: float
    z: np.ndarray = field(repr=False)

    @property
    def bound(self) -> float:
        return self.K_star + self.noise_term + self.entry_term

    @property
    def violated(self) -> bool:
        return self.rho > self.bound + 1e-9 * (1.0 + self.bound)


@dataclass(frozen=True)
class TrackingReport:
    """Per-epoch tracking results of one replica."""

    replica: int
    epochs: List[EpochTracking]
    settling_index: Optional[int]

    @property
    def violations(self) -> List[int]:
        return [row.k for row in self.epochs if row.violated]

    @property
    def max_rho(self) -> float:
        return max((row.rho for row in self.epochs), default=0.0)


@dataclass(frozen=True)
class GrowthReport:
    """Per-epoch result of the norm growth check ‖X(j)‖₂ ≤ K3(1 + ‖X(n_k)‖₂)."""

    K3: float
    ratios: np.ndarray
    failures: List[int]

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass(frozen=True)
class AzumaTail:
    """Bounded-increment tail bound and the two exponent shapes."""

    azuma: float
    quadratic: float
    linear: float


@dataclass(frozen=True)
class MartingaleBoundParams:
    """
    Constants of the concentration step.

    :param gamma1: Bound on the sum of the increment bounds.
    :param gamma2: Bound on the largest increment bound, in units of omega.
    :param omega: Scale a(n_k).
    :param D: Exponent constant.
    """

    gamma1: float
    gamma2: float
    omega: float
    kappa: float
    C: float
    D: float
    K3: float
    K4: float
    K5: float
    C_star: float


@dataclass(frozen=True)
class TheoremBound:
    """Lower bound on the trapping probability."""

    value: float
    raw: float
    branch: Literal["quadratic", "linear"]
    vacuous: bool
    terms: int
    tail: float


@dataclass(frozen=True)
class ConcentrationReport:
    """Monte Carlo trapping estimate next to the theorem bound."""

    delta_tilde: float
    params: MartingaleBoundParams
    theorem: TheoremBound
    frequency: float
    ci: Tuple[float, float]
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

    @property
    def ci_half_width(self) -> float:
        return 0.5 * (self.ci[1] - self.ci[0])
