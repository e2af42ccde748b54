# app/services/concentration_service.py

"""
Concentration Service
---------------------

Probability side of the analysis:

- Azuma tail bounds for sums with bounded increments
- the normalized tube radius δ̃ and the martingale constants (γ₁, γ₂, ω, D)
- the lower bound on the probability of staying trapped near the attractor
- Monte Carlo estimation of that probability with a Wilson score interval
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from app.core.config import settings
from app.core.exceptions import Divergent, InsufficientConditioning
from app.core.run_log import log_run_event
from app.models import (
    AzumaTail,
    ConcentrationReport,
    HMetric,
    MartingaleBoundParams,
    ProblemInstance,
    StepSchedule,
    TheoremBound,
    TimeGrid,
)
from app.services.engine_service import EngineService
from app.services.tracking_service import TrackingService


logger = logging.getLogger(__name__)

SERIES_CHUNK = 1 << 16
SERIES_CUTOFF = 1e-16
SERIES_MAX_TERMS = 100_000_000


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))


def _trap_replica(args: tuple) -> Tuple[bool, bool, bool]:
    """(bounded, satisfies entry event, trapped) for one replica."""
    problem, schedule, grid, n0, horizon, seed, cap, index = args
    record = EngineService.run(problem, schedule, horizon, seed, cap, index)
    if not record.bounded:
        return False, False, False

    attractor = problem.attractor
    X0 = record.X[n0]
    average = problem.gossip.pi @ X0
    entered = bool(
        EngineService.disagreement(X0, problem.gossip) < attractor.delta
        and attractor.B_prime.contains(average)
    )
    if not entered:
        return True, False, False

    start = grid.t[n0] + attractor.tau
    times = grid.t[:horizon + 1]
    if start > times[-1]:
        return True, True, True
    first = int(np.searchsorted(times, start, side="left"))
    samples = [record.X[first:horizon + 1]]
    if first > 0 and times[first] > start:
        samples.append(EngineService.interpolate(record, grid, start)[None])
    trapped = all(
        bool(np.all(ConcentrationService.trap_membership(block, problem.hmetric, attractor.center,
                                                         attractor.trap_level, attractor.delta)))
        for block in samples
    )
    return True, True, trapped


class ConcentrationService:
    """
    Service for concentration bounds and trapping probability estimates.
    """

    @staticmethod
    def azuma_tail(
        epsilon: float,
        bounds: np.ndarray,
        D: Optional[float] = None,
        omega: Optional[float] = None,
    ) -> AzumaTail:
        """
        Tail bounds for a sum of martingale increments with |Y_i| ≤ A_i.

        :param epsilon: Deviation ε ≥ 0.
        :type epsilon: float

        :param bounds: Increment bounds A_i.
        :type bounds: np.ndarray

        :param D: Exponent constant; 1/(2γ₁γ₂) with γ₁ = ΣA, γ₂ω = max A when None.
        :type D: Optional[float]

        :param omega: Scale ω; max A when None.
        :type omega: Optional[float]

        :return: min(1, 2exp(−ε²/(2ΣA²))) and the pair 2exp(−Dε²/ω), 2exp(−Dε/ω), all clamped.
        :rtype: AzumaTail
        """

        A = np.abs(np.asarray(bounds, dtype=float))
        total_sq = float(np.sum(A ** 2))
        if omega is None:
            omega = float(np.max(A, initial=0.0))
        if D is None:
            gamma1 = float(np.sum(A))
            gamma2 = float(np.max(A, initial=0.0)) / omega if omega > 0 else 0.0
            D = 1.0 / (2.0 * gamma1 * gamma2) if gamma1 * gamma2 > 0 else math.inf

        def _tail(exponent: float) -> float:
            if math.isnan(exponent):
                return 1.0
            return _clamp(2.0 * math.exp(-exponent))

        azuma = _tail(epsilon ** 2 / (2.0 * total_sq)) if total_sq > 0 else (1.0 if epsilon <= 0 else 0.0)
        if omega > 0:
            quadratic = _tail(D * epsilon ** 2 / omega)
            linear = _tail(D * epsilon / omega)
        else:
            quadratic = linear = 1.0 if epsilon <= 0 else 0.0
        return AzumaTail(azuma=azuma, quadratic=quadratic, linear=linear)

    @staticmethod
    def delta_tilde(delta: float, K_T: float, Lambda: float, M: int, d: int) -> float:
        """δ̃ = δ / (2K_T·sqrt(Λ(H)·M³·d))."""
        return float(delta / (2.0 * K_T * math.sqrt(Lambda * M ** 3 * d)))

    @staticmethod
    def martingale_params(
        problem: ProblemInstance,
        grid: TimeGrid,
        n0: int,
        C_star: float,
        D: Optional[float] = None,
    ) -> MartingaleBoundParams:
        """
        Constants of the concentration step at entry index n0.

        γ₁ = K4·d·T bounds the sum of the increment bounds K4·d·a(n0+i),
        γ₂ = c·K4·d bounds their maximum in units of ω = a(n0).

        :return: The parameter set, D defaulting to 1/(2γ₁γ₂).
        :rtype: MartingaleBoundParams
        """

        _, K3, K4 = problem.growth_constants(grid.T)
        d = problem.d
        gamma1 = K4 * d * grid.T
        gamma2 = grid.c * K4 * d
        if D is None:
            D = 1.0 / (2.0 * gamma1 * gamma2) if gamma1 * gamma2 > 0 else math.inf
        return MartingaleBoundParams(
            gamma1=gamma1,
            gamma2=gamma2,
            omega=float(grid.schedule.a(n0)),
            kappa=problem.constants.kappa,
            C=problem.constants.C,
            D=float(D),
            K3=K3,
            K4=K4,
            K5=problem.attractor.K5,
            C_star=C_star,
        )

    @staticmethod
    def theorem_bound(
        n0: int,
        schedule: StepSchedule,
        M: int,
        d: int,
        C_star: float,
        D: float,
        delta_tilde: float,
        kappa: float,
        C: float,
        T: float,
    ) -> TheoremBound:
        """
        1 − 2M²dC*·Σ_{n≥n0} n·exp(−E/a(n)), with E = Dδ̃² when δ̃ ≤ C·T/κ and E = Dδ̃ otherwise.

        The series is summed in chunks, stopped once it makes the bound vacuous,
        and truncated past its peak when terms drop below 1e-16, adding a
        geometric estimate of the remainder.

        :raises Divergent: If the schedule does not vanish, so the terms do not decay.

        :return: Clamped value, raw value, branch, vacuous flag, term count, tail estimate.
        :rtype: TheoremBound
        """

        if not schedule.vanishes:
            raise Divergent(f"{schedule.kind} schedule does not vanish; the series diverges")
        if delta_tilde <= 0 or D <= 0:
            raise ValueError("delta_tilde and D must be positive")

        branch = "quadratic" if delta_tilde <= C * T / kappa else "linear"
        E = D * delta_tilde ** 2 if branch == "quadratic" else D * delta_tilde
        prefactor = 2.0 * M ** 2 * d * C_star
        budget = 1.0 / prefactor if prefactor > 0 else math.inf

        total, tail, count, start = 0.0, 0.0, 0, n0
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            while True:
                n = np.arange(start, start + SERIES_CHUNK)
                steps = schedule.steps(n)
                terms = np.where(steps > 0, n * np.exp(-E / np.where(steps > 0, steps, 1.0)), 0.0)
                total += float(np.sum(terms))
                count += terms.size
                if total > budget:
                    break
                last, before = float(terms[-1]), float(terms[-2])
                if last < SERIES_CUTOFF and last <= before:
                    ratio = last / before if before > 0 else 0.0
                    tail = last * ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
                    break
                if count >= SERIES_MAX_TERMS:
                    raise Divergent(f"series terms still at {last:.3e} after {count} terms")
                start += SERIES_CHUNK

        raw = 1.0 - prefactor * (total + tail)
        return TheoremBound(
            value=_clamp(raw),
            raw=raw,
            branch=branch,
            vacuous=raw <= 0.0,
            terms=count,
            tail=tail,
        )

    @staticmethod
    def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
        """
        Wilson score interval for a binomial proportion.

        :return: (lower, upper), (0, 1) when there are no trials.
        :rtype: Tuple[float, float]
        """

        if trials <= 0:
            return 0.0, 1.0
        z = float(stats.norm.ppf(0.5 + confidence / 2.0))
        p = successes / trials
        denom = 1.0 + z ** 2 / trials
        centre = (p + z ** 2 / (2 * trials)) / denom
        half = z * math.sqrt(p * (1 - p) / trials + z ** 2 / (4 * trials ** 2)) / denom
        return max(0.0, centre - half), min(1.0, centre + half)

    @staticmethod
    def trap_membership(
        X: np.ndarray,
        hmetric: HMetric,
        center: np.ndarray,
        level: float,
        delta: float,
    ) -> np.ndarray:
        """
        Whether each array X lies within H-distance δ of {1xᵀ : ‖x − center‖² ≤ level}.

        With s = 1ᵀH1 and x* = XᵀH1/s, ‖X − 1xᵀ‖²_H = tr(XᵀHX) − s‖x*‖² + s‖x − x*‖²,
        so the closest lifted point is 1·proj(x*)ᵀ.

        :param X: Arrays shaped (..., M, d).
        :type X: np.ndarray

        :return: Boolean array of the leading shape.
        :rtype: np.ndarray
        """

        X = np.asarray(X, dtype=float)
        H = hmetric.H
        weights = H.sum(axis=1)
        s = float(weights.sum())
        x_star = np.einsum("m,...md->...d", weights, X) / s
        quad = np.einsum("...id,ik,...kd->...", X, H, X)

        diff = x_star - center
        norm = np.linalg.norm(diff, axis=-1)
        radius = math.sqrt(max(level, 0.0))
        outside = np.maximum(norm - radius, 0.0)

        distance_sq = quad - s * np.sum(x_star ** 2, axis=-1) + s * outside ** 2
        return np.sqrt(np.maximum(distance_sq, 0.0)) < delta

    @staticmethod
    def trap_horizon(grid: TimeGrid, n0: int, tau: float, T_prime: float, cap: Optional[int] = None) -> Tuple[int, bool]:
        """
        First n with t(n) ≥ t(n0) + τ + 10·T′, capped.

        :return: (horizon, capped flag).
        :rtype: Tuple[int, bool]
        """

        cap = settings.MAX_HORIZON if cap is None else cap
        target = grid.t[n0] + tau + 10.0 * T_prime
        n = int(np.searchsorted(grid.t, target, side="left"))
        if n > min(cap, grid.horizon):
            return min(cap, grid.horizon), True
        return max(n, n0 + 1), False

    @staticmethod
    def trap_probability_mc(
        problem: ProblemInstance,
        schedule: StepSchedule,
        grid: TimeGrid,
        n0: int,
        horizon: int,
        replicas: int,
        master_seed: int,
        C_star: float,
        workers: Optional[int] = None,
        cap: Optional[float] = None,
        D: Optional[float] = None,
        horizon_capped: bool = False,
    ) -> ConcentrationReport:
        """
        Monte Carlo frequency of staying trapped after t(n0) + τ, next to the theorem bound.

        Replicas that hit the boundedness cap are excluded and counted; replicas
        violating the entry event at n0 are rejected.

        :param problem: Problem instance.
        :type problem: ProblemInstance

        :param schedule: Step schedule.
        :type schedule: StepSchedule

        :param grid: Time grid starting its first epoch at n0 and covering ``horizon``.
        :type grid: TimeGrid

        :param n0: Entry index.
        :type n0: int

        :param horizon: Last simulated index.
        :type horizon: int

        :param replicas: Number of replicas.
        :type replicas: int

        :param master_seed: Master seed.
        :type master_seed: int

        :param C_star: Window constant used by the bound.
        :type C_star: float

        :raises InsufficientConditioning: If fewer than settings.MIN_CONDITIONED replicas are kept.

        :return: The report.
        :rtype: ConcentrationReport
        """

        attractor = problem.attractor
        tasks = [
            (problem, schedule, grid, n0, horizon, EngineService.replica_seed(master_seed, i), cap, i)
            for i in range(replicas)
        ]
        outcomes: List[Tuple[bool, bool, bool]] = EngineService.map_replicas(_trap_replica, tasks, workers)

        capped = sum(not bounded for bounded, _, _ in outcomes)
        kept = sum(entered for _, entered, _ in outcomes)
        rejected = replicas - capped - kept
        trapped = sum(hit for _, _, hit in outcomes)
        log_run_event("trap_replicas", "success", replicas=replicas, kept=kept, capped=capped, trapped=trapped)

        if kept < settings.MIN_CONDITIONED:
            raise InsufficientConditioning(
                f"only {kept} of {replicas} replicas satisfy the entry event, {settings.MIN_CONDITIONED} needed"
            )

        K_T = TrackingService.gronwall_factor(problem, grid.T)
        tilde = ConcentrationService.delta_tilde(attractor.delta, K_T, problem.hmetric.Lambda, problem.M, problem.d)
        params = ConcentrationService.martingale_params(problem, grid, n0, C_star, D)
        theorem = ConcentrationService.theorem_bound(
            n0, schedule, problem.M, problem.d, C_star, params.D, tilde, params.kappa, params.C, grid.T,
        )
        settling = TrackingService.settling_index(problem, grid)

        frequency = trapped / kept
        return ConcentrationReport(
            delta_tilde=tilde,
            params=params,
            theorem=theorem,
            frequency=frequency,
            ci=ConcentrationService.wilson_interval(trapped, kept),
            replicas_total=replicas,
            replicas_conditioned=kept,
            replicas_capped=capped,
            replicas_rejected=rejected,
            settled_at_n0=settling == 0,
            horizon=horizon,
            horizon_capped=horizon_capped,
            window_empty=bool(grid.t[n0] + attractor.tau > grid.t[horizon]),
            n0=n0,
            tau=attractor.tau,
            delta=attractor.delta,
            epsilon=attractor.epsilon,
            Delta=attractor.Delta,
            K_T=K_T,
        )
