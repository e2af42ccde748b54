# app/services/tracking_service.py

"""
Tracking Service
----------------

Pathwise comparison of a run with the averaged ODE, epoch by epoch.

For epoch k the interpolated path is compared with the lifted reference
segment 1·x^{T_k}(s)ᵀ. The resulting error ρ_k is checked against

    K*_{T,k} + K_T · (max_l ‖δ_{n_k,l}‖_H + z_0 + e_k)

where δ are the propagated noise sums, z_0 the entry disagreement and e_k
the first-step noise carried by P.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from app.core.exceptions import OutOfDomain
from app.core.hnorm import batch_h_norm, h_norm
from app.core.ode import lifted_drift_norm, reference_segment
from app.models import (
    EpochTracking,
    GrowthReport,
    ProblemInstance,
    ReferenceSegment,
    RunRecord,
    TimeGrid,
    TrackingReport,
)


logger = logging.getLogger(__name__)

SEGMENT_C_T_INFLATION = 1.1
GROWTH_SLACK = 1e-12


class TrackingService:
    """
    Service computing tracking errors and their certified bounds.
    """

    # ------------------------------------------------------------------
    # Noise decomposition
    # ------------------------------------------------------------------
    @staticmethod
    def perturbation_sums(record: RunRecord, P: np.ndarray, n: int, m_max: int) -> np.ndarray:
        """
        δ_{n,m} = Σ_{i=1}^{m−1} a(n+i) P^{m−1−i} M̃(n+i+1) for m = 0..m_max.

        Computed by δ_{n,m+1} = P δ_{n,m} + a(n+m) M̃(n+m+1) from δ_{n,0} = δ_{n,1} = 0.

        :param record: Run with stored noise.
        :type record: RunRecord

        :param P: Gossip matrix.
        :type P: np.ndarray

        :param n: Base index.
        :type n: int

        :param m_max: Largest m.
        :type m_max: int

        :raises OutOfDomain: If the sums need noise past the end of the record.

        :return: Array shaped (m_max + 1, M, d).
        :rtype: np.ndarray
        """

        if n < 0 or m_max < 0 or (m_max > 1 and n + m_max - 1 > record.n_steps - 1):
            raise OutOfDomain(f"delta sums from n={n} up to m={m_max} exceed the record")
        out = np.zeros((m_max + 1, record.M, record.d))
        for m in range(1, m_max):
            out[m + 1] = P @ out[m] + record.a[n + m] * record.noise[n + m]
        return out

    @staticmethod
    def entry_noise(record: RunRecord, P: np.ndarray, n: int, m_max: int) -> np.ndarray:
        """
        a(n)·P^{m−1}·M̃(n+1) for m = 1..m_max, shaped (m_max, M, d).
        """

        if m_max < 1:
            return np.zeros((0, record.M, record.d))
        if n >= record.n_steps:
            raise OutOfDomain(f"no noise recorded at n={n}")
        out = np.empty((m_max, record.M, record.d))
        out[0] = record.a[n] * record.noise[n]
        for m in range(1, m_max):
            out[m] = P @ out[m - 1]
        return out

    @staticmethod
    def martingale_increments(record: RunRecord, P: np.ndarray, n: int, l: int) -> np.ndarray:
        """
        Entrywise increments Y_i = a(n+i)·[P^{l−1−i} M̃(n+i+1)] for i = 1..l−1.

        Their sum over i is δ_{n,l}.

        :return: Array shaped (max(l−1, 0), M, d); row i−1 holds Y_i.
        :rtype: np.ndarray
        """

        if l < 2:
            return np.zeros((0, record.M, record.d))
        if n + l - 1 > record.n_steps - 1:
            raise OutOfDomain(f"increments from n={n} up to l={l} exceed the record")
        out = np.empty((l - 1, record.M, record.d))
        power = np.eye(record.M)
        for i in range(l - 1, 0, -1):
            out[i - 1] = record.a[n + i] * (power @ record.noise[n + i])
            power = P @ power
        return out

    # ------------------------------------------------------------------
    # Tracking error
    # ------------------------------------------------------------------
    @staticmethod
    def knot_errors(record: RunRecord, segment: ReferenceSegment, problem: ProblemInstance) -> np.ndarray:
        """z_m = ‖X(n_k+m) − 1x^{T_k}(t(n_k+m))ᵀ‖_H for m = 0..υ_k."""
        X = record.X[segment.n_start:segment.n_end + 1]
        return batch_h_norm(X - segment.lifted(problem.M, segment.knot_values), problem.hmetric)

    @staticmethod
    def tracking_error(record: RunRecord, segment: ReferenceSegment, problem: ProblemInstance) -> float:
        """
        ρ_k over the knots and knot midpoints of the epoch.

        :return: max ‖X̄(t) − 1x^{T_k}(t)ᵀ‖_H over the samples.
        :rtype: float
        """

        X = record.X[segment.n_start:segment.n_end + 1]
        knots = TrackingService.knot_errors(record, segment, problem)
        mid_path = 0.5 * (X[:-1] + X[1:])
        mids = batch_h_norm(mid_path - segment.lifted(problem.M, segment.mid_values), problem.hmetric)
        return float(max(np.max(knots), np.max(mids, initial=0.0)))

    # ------------------------------------------------------------------
    # Bound constants
    # ------------------------------------------------------------------
    @staticmethod
    def gronwall_factor(problem: ProblemInstance, T: float) -> float:
        """K_T = exp(L·T·(‖Π‖_H + max(1, ‖I − Π‖_H)) + 1)."""
        metric = problem.hmetric
        rest = max(1.0, metric.I_minus_Pi_H_norm)
        return float(np.exp(problem.constants.L * T * (metric.Pi_H_norm + rest) + 1.0))

    @staticmethod
    def tracking_constants(
        problem: ProblemInstance,
        grid: TimeGrid,
        k: int,
        C_T: Optional[float] = None,
        K_T: Optional[float] = None,
    ) -> Tuple[float, float]:
        """
        Deterministic part K*_{T,k} of the tracking bound and the factor K_T.

        :param problem: Problem instance.
        :type problem: ProblemInstance

        :param grid: Time grid.
        :type grid: TimeGrid

        :param k: Epoch index.
        :type k: int

        :param C_T: Drift bound along the segment; the problem's C_T when None.
        :type C_T: Optional[float]

        :param K_T: Override of the Gronwall factor.
        :type K_T: Optional[float]

        :return: (K*_{T,k}, K_T).
        :rtype: Tuple[float, float]
        """

        metric = problem.hmetric
        L = problem.constants.L
        C_T = problem.C_T if C_T is None else C_T
        K_T = TrackingService.gronwall_factor(problem, grid.T) if K_T is None else K_T

        Pi_norm = metric.Pi_H_norm
        rest = max(1.0, metric.I_minus_Pi_H_norm)
        n_k, n_next = int(grid.n_k[k]), int(grid.n_k[k + 1])
        b = float(grid.b[k])
        spacing = float(np.sum(np.abs(np.diff(grid.a[n_k:n_next + 1]))))

        inner = (
            L * C_T * Pi_norm * max(1.0, Pi_norm) * b
            + rest * C_T * np.sqrt(b * metric.lambda_max)
            + Pi_norm * C_T * spacing
        )
        K_star = inner * K_T + Pi_norm * C_T * grid.c * float(grid.a[n_k])
        return float(K_star), float(K_T)

    @staticmethod
    def settling_values(problem: ProblemInstance, grid: TimeGrid) -> np.ndarray:
        """L·C_T·‖Π‖_H·b(n_k) + C_T·sqrt(b(n_k)/(1−α²)) per epoch start."""
        metric = problem.hmetric
        b = grid.b[:-1] if grid.epochs else grid.b[:0]
        return (
            problem.constants.L * problem.C_T * metric.Pi_H_norm * b
            + problem.C_T * np.sqrt(b * metric.lambda_max)
        )

    @staticmethod
    def settling_index(problem: ProblemInstance, grid: TimeGrid) -> Optional[int]:
        """
        First epoch from which the deterministic bound stays below δ/2.

        :return: The epoch index, or None when the last epoch still fails.
        :rtype: Optional[int]
        """

        values = TrackingService.settling_values(problem, grid)
        if values.size == 0:
            return None
        failing = np.flatnonzero(~(values < 0.5 * problem.attractor.delta))
        if failing.size == 0:
            return 0
        last = int(failing[-1])
        return None if last == values.size - 1 else last + 1

    # ------------------------------------------------------------------
    # Verification
    # ------------------------------------------------------------------
    @staticmethod
    def verify_epoch(
        problem: ProblemInstance,
        record: RunRecord,
        grid: TimeGrid,
        k: int,
        K_T: Optional[float] = None,
        h_max: float = 1e-3,
    ) -> EpochTracking:
        """Tracking error and bound components for one epoch."""
        P = problem.gossip.P
        segment = reference_segment(record, grid, k, problem.drift, problem.gossip.pi, h_max)
        n_k = segment.n_start
        upsilon = segment.n_end - n_k

        samples = np.concatenate([segment.knot_values, segment.mid_values])
        along = float(np.max(lifted_drift_norm(problem.drift, problem.hmetric, samples)))
        C_T = max(problem.C_T, SEGMENT_C_T_INFLATION * along)
        K_star, K_T = TrackingService.tracking_constants(problem, grid, k, C_T, K_T)

        deltas = TrackingService.perturbation_sums(record, P, n_k, upsilon)
        noise_max = float(np.max(batch_h_norm(deltas, problem.hmetric)))
        entry = TrackingService.entry_noise(record, P, n_k, upsilon)
        e_k = float(np.max(batch_h_norm(entry, problem.hmetric), initial=0.0))
        X0 = record.X[n_k]
        z_0 = h_norm(X0 - problem.gossip.Pi @ X0, problem.hmetric)

        return EpochTracking(
            k=k,
            n_k=n_k,
            rho=TrackingService.tracking_error(record, segment, problem),
            K_star=K_star,
            K_T=K_T,
            noise_term=K_T * noise_max,
            entry_term=K_T * (z_0 + e_k),
            drift_bound=C_T,
            z=TrackingService.knot_errors(record, segment, problem),
        )

    @staticmethod
    def verify_tracking(
        problem: ProblemInstance,
        record: RunRecord,
        grid: TimeGrid,
        K_T: Optional[float] = None,
        h_max: float = 1e-3,
    ) -> TrackingReport:
        """
        Compare ρ_k with its bound for every epoch fully contained in the record.

        :param problem: Problem instance.
        :type problem: ProblemInstance

        :param record: Simulated run.
        :type record: RunRecord

        :param grid: Time grid of the run.
        :type grid: TimeGrid

        :param K_T: Override of the Gronwall factor (used to falsify the bound).
        :type K_T: Optional[float]

        :return: Per-epoch comparison; violations are data, not errors.
        :rtype: TrackingReport
        """

        epochs: List[EpochTracking] = []
        for k in range(grid.epochs):
            if grid.n_k[k + 1] > record.n_steps:
                break
            epochs.append(TrackingService.verify_epoch(problem, record, grid, k, K_T, h_max))

        report = TrackingReport(
            replica=record.replica,
            epochs=epochs,
            settling_index=TrackingService.settling_index(problem, grid),
        )
        if report.violations:
            logger.warning("replica %d: tracking bound violated at epochs %s", record.replica, report.violations)
        return report

    @staticmethod
    def growth_check(problem: ProblemInstance, record: RunRecord, grid: TimeGrid) -> GrowthReport:
        """
        Check ‖X(j)‖₂ ≤ K3(1 + ‖X(n_k)‖₂) at every knot of every recorded epoch.

        :return: Ratios max_j ‖X(j)‖₂ / (K3(1 + ‖X(n_k)‖₂)) per epoch and failing epochs.
        :rtype: GrowthReport
        """

        _, K3, _ = problem.growth_constants(grid.T)
        norms = np.linalg.norm(record.X.reshape(record.X.shape[0], -1), axis=-1)
        ratios = []
        for k in range(grid.epochs):
            start, end = int(grid.n_k[k]), int(grid.n_k[k + 1])
            if end > record.n_steps:
                break
            ratios.append(float(np.max(norms[start:end + 1]) / (K3 * (1.0 + norms[start]))))
        ratios = np.asarray(ratios, dtype=float)
        failures = [int(k) for k in np.flatnonzero(ratios > 1.0 + GROWTH_SLACK)]
        return GrowthReport(K3=K3, ratios=ratios, failures=failures)
