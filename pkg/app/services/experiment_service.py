# app/services/experiment_service.py

"""
Experiment Service
------------------

Turns an ``ExperimentConfig`` into validated components and runs the five
experiment commands shared by the CLI and the HTTP surface:

- validate: per-assumption verdicts
- simulate: replica summaries and a trajectory dump
- track: pathwise tracking verification
- trap: Monte Carlo trapping frequency against the theorem bound
- bound: theorem bound over an n0 sweep
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from app.core import gossip as gossip_core
from app.core.config import settings
from app.core.exceptions import ConfigParseError, SimulationError, ValidationFailure
from app.core.hnorm import metric_for
from app.core.run_log import log_run_event
from app.core.schedule import build_time_grid, validate_schedule
from app.models import (
    GossipModel,
    GrowthReport,
    HMetric,
    ProblemInstance,
    Region,
    RunRecord,
    ScheduleReport,
    StepSchedule,
    TimeGrid,
    TrackingReport,
)
from app.schemas.experiment_schema import ExperimentConfig, GossipSpec, RegionSpec
from app.schemas.report_schema import (
    BoundRowOut,
    BoundTableOut,
    ConcentrationReportOut,
    EpochRowOut,
    ReplicaSummaryOut,
    SimulationSummaryOut,
    TrackingSummaryOut,
    ValidationReportOut,
    Verdict,
)
from app.services.concentration_service import ConcentrationService
from app.services.engine_service import EngineService
from app.services.problem_service import ProblemService
from app.services.tracking_service import TrackingService


logger = logging.getLogger(__name__)

LIPSCHITZ_SLACK = 1e-9
DESCENT_TOL = 1e-9


@dataclass(frozen=True)
class ExperimentContext:
    """Validated components of one experiment."""

    config: ExperimentConfig
    gossip: GossipModel
    hmetric: HMetric
    schedule: StepSchedule
    schedule_report: ScheduleReport
    problem: ProblemInstance
    T: float


def _simulate_replica(args: tuple) -> ReplicaSummaryOut:
    problem, schedule, n_max, seed, cap, index = args
    record = EngineService.run(problem, schedule, n_max, seed, cap, index)
    final = record.X[-1]
    return ReplicaSummaryOut(
        replica=index,
        seed=seed,
        bounded=record.bounded,
        steps=record.n_steps,
        disagreement=EngineService.disagreement(final, problem.gossip),
        distance_to_equilibrium=float(np.linalg.norm(final - problem.attractor.center)),
    )


def _track_replica(args: tuple) -> Tuple[TrackingReport, GrowthReport, bool]:
    problem, schedule, grid, n_max, seed, cap, index, h_max = args
    record = EngineService.run(problem, schedule, n_max, seed, cap, index)
    report = TrackingService.verify_tracking(problem, record, grid, h_max=h_max)
    growth = TrackingService.growth_check(problem, record, grid)
    return report, growth, record.bounded


class ExperimentService:
    """
    Service orchestrating experiments from a config.
    """

    # ------------------------------------------------------------------
    # Config ingestion
    # ------------------------------------------------------------------
    @staticmethod
    def parse_config(text: str) -> ExperimentConfig:
        """
        Parse and validate a JSON config document.

        :param text: JSON text.
        :type text: str

        :raises ConfigParseError: With the line of a syntax error or the path of an invalid field.

        :return: The config.
        :rtype: ExperimentConfig
        """

        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(exc.msg, line=exc.lineno) from exc
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as exc:
            first = exc.errors()[0]
            field = ".".join(str(part) for part in first["loc"]) or None
            raise ConfigParseError(first["msg"], field=field) from exc

    @staticmethod
    def load_config(path: str) -> ExperimentConfig:
        """Read and parse a config file."""
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigParseError(f"cannot read config {path}: {exc.strerror}") from exc
        return ExperimentService.parse_config(text)

    # ------------------------------------------------------------------
    # Component construction
    # ------------------------------------------------------------------
    @staticmethod
    def build_gossip(spec: GossipSpec) -> GossipModel:
        """Explicit matrix or named generator, validated."""
        if spec.matrix is not None:
            return gossip_core.validate_gossip(spec.matrix)
        if spec.generator == "random_primitive":
            P = gossip_core.random_primitive(spec.M, seed=spec.seed, density=spec.density)
        else:
            P = gossip_core.GENERATORS[spec.generator](spec.M)
        return gossip_core.validate_gossip(P)

    @staticmethod
    def _region(spec: Optional[RegionSpec], default_center: np.ndarray) -> Optional[Region]:
        if spec is None:
            return None
        if spec.kind == "box":
            return Region.box(spec.lower, spec.upper)
        center = default_center if spec.center is None else spec.center
        return Region.ball(center, spec.radius)

    @staticmethod
    def epoch_length(config: ExperimentConfig, schedule: StepSchedule) -> float:
        """T = T′ + c·a(0)."""
        return config.T_prime + schedule.c * schedule.a(0)

    @staticmethod
    def build_problem(
        config: ExperimentConfig,
        gossip: GossipModel,
        hmetric: HMetric,
        T: float,
    ) -> ProblemInstance:
        """Assemble the configured test problem."""
        spec = config.problem
        options = {
            "initial": None if spec.initial is None else np.asarray(spec.initial, dtype=float),
            "resolution": spec.grid_resolution,
            "max_V": spec.max_V,
            "h_max": spec.h_max,
        }
        if spec.kind == "linear":
            theta = np.asarray(spec.theta, dtype=float)
            center = gossip.pi @ theta if theta.shape[0] == gossip.M else np.zeros(theta.shape[-1])
            options["region"] = ExperimentService._region(spec.region, center)
            return ProblemService.build_linear(gossip, hmetric, theta, spec.beta, spec.epsilon, T, **options)

        offsets = np.asarray(spec.offsets, dtype=float)
        options["region"] = ExperimentService._region(spec.region, np.full(offsets.shape[-1], spec.well))
        return ProblemService.build_double_well(
            gossip, hmetric, offsets, spec.beta, spec.epsilon, T, well=spec.well, **options,
        )

    @staticmethod
    def prepare(config: ExperimentConfig) -> ExperimentContext:
        """
        Validate every component of a config.

        :raises ValidationFailure: On the first rejected component.

        :return: The validated context.
        :rtype: ExperimentContext
        """

        gossip = ExperimentService.build_gossip(config.gossip)
        hmetric = metric_for(gossip)
        schedule = config.schedule.to_schedule()
        T = ExperimentService.epoch_length(config, schedule)
        report = validate_schedule(schedule, config.horizon, T)
        problem = ExperimentService.build_problem(config, gossip, hmetric, T)
        logger.debug("experiment %s prepared: M=%d d=%d T=%.4g", config.name, problem.M, problem.d, T)
        return ExperimentContext(config, gossip, hmetric, schedule, report, problem, T)

    @staticmethod
    def _require_admissible(context: ExperimentContext) -> None:
        if not context.schedule_report.admissible:
            validate_schedule(context.schedule, context.config.horizon, context.T, raise_on_failure=True)

    @staticmethod
    def window_constant(context: ExperimentContext, grid: TimeGrid) -> float:
        """Declared C*, else the grid measurement, else the window-bound measurement."""
        if context.schedule.C_star is not None:
            return context.schedule.C_star
        for value in (grid.window_constant(), context.schedule_report.C_star):
            if math.isfinite(value):
                return value
        return 1.0

    # ------------------------------------------------------------------
    # validate
    # ------------------------------------------------------------------
    @staticmethod
    def validate(config: ExperimentConfig) -> ValidationReportOut:
        """
        Run every assumption check and collect verdicts; failures are data.

        :param config: Experiment config.
        :type config: ExperimentConfig

        :return: Verdicts and derived constants.
        :rtype: ValidationReportOut
        """

        verdicts = {}
        constants = {}

        def _fail(exc: SimulationError) -> Verdict:
            return Verdict(verdict="fail", detail=f"{type(exc).__name__}: {exc.detail}")

        try:
            gossip = ExperimentService.build_gossip(config.gossip)
            verdicts["gossip"] = Verdict(
                verdict="pass", detail=f"M={gossip.M}, spectral radius of Q {gossip.spectral_radius:.6g}",
            )
        except ValidationFailure as exc:
            gossip = None
            verdicts["gossip"] = _fail(exc)

        hmetric = None
        if gossip is not None:
            try:
                hmetric = metric_for(gossip)
                verdicts["lyapunov"] = Verdict(
                    verdict="pass",
                    detail=f"residual {hmetric.residual:.3e} after {hmetric.iterations} iterations",
                )
                constants.update(alpha=hmetric.alpha, Lambda=hmetric.Lambda,
                                 Pi_H_norm=hmetric.Pi_H_norm, I_minus_Pi_H_norm=hmetric.I_minus_Pi_H_norm)
            except SimulationError as exc:
                verdicts["lyapunov"] = _fail(exc)
        else:
            verdicts["lyapunov"] = Verdict(verdict="unverified", detail="skipped: gossip matrix rejected")

        schedule = config.schedule.to_schedule()
        T = ExperimentService.epoch_length(config, schedule)
        try:
            report = validate_schedule(schedule, config.horizon, T)
            for name, (verdict, detail) in report.verdicts.items():
                verdicts[f"schedule.{name}"] = Verdict(verdict=verdict, detail=detail)
            constants["C_star"] = report.C_star
        except SimulationError as exc:
            verdicts["schedule"] = _fail(exc)

        if hmetric is None:
            verdicts["problem"] = Verdict(verdict="unverified", detail="skipped: no metric")
        else:
            try:
                problem = ExperimentService.build_problem(config, gossip, hmetric, T)
                verdicts["problem"] = Verdict(verdict="pass", detail=f"{problem.name} problem assembled")
                ExperimentService._problem_checks(problem, verdicts)
                attractor = problem.attractor
                constants.update(
                    T=T, Delta=attractor.Delta, delta=attractor.delta, tau=attractor.tau,
                    K5=attractor.K5, C_T=problem.C_T, L=problem.constants.L,
                    K1=problem.constants.K1, K2=problem.constants.K2, C=problem.constants.C,
                )
            except SimulationError as exc:
                verdicts["problem"] = _fail(exc)

        result = ValidationReportOut(verdicts=verdicts, constants=constants)
        log_run_event("validate", "success" if result.passed else "failed",
                      failed=[name for name, item in verdicts.items() if item.verdict == "fail"])
        return result

    @staticmethod
    def _problem_checks(problem: ProblemInstance, verdicts: dict) -> None:
        ratio = ProblemService.lipschitz_check(problem)
        verdicts["problem.lipschitz"] = Verdict(
            verdict="pass" if ratio <= 1.0 + LIPSCHITZ_SLACK else "fail",
            detail=f"max ratio {ratio:.6g} to L={problem.constants.L:.6g}",
        )
        growth = ProblemService.growth_sample_check(problem)
        verdicts["problem.growth"] = Verdict(
            verdict="pass" if growth <= 1.0 + LIPSCHITZ_SLACK else "fail",
            detail=f"max ratio {growth:.6g} to K1={problem.constants.K1:.6g}",
        )
        descent = ProblemService.descent_check(problem)
        verdicts["problem.descent"] = Verdict(
            verdict="pass" if descent <= DESCENT_TOL else "fail",
            detail=f"max <grad V, averaged drift> {descent:.6g} outside A^epsilon",
        )
        moments = ProblemService.noise_moment_check(problem, draws=20_000)
        verdicts["problem.noise"] = Verdict(
            verdict="pass" if moments["mean_ok"] and moments["mgf"] <= moments["C"] else "fail",
            detail=f"mean within 4 s.e.: {moments['mean_ok']}, E exp|M| {moments['mgf']:.6g} <= C {moments['C']:.6g}",
        )

    # ------------------------------------------------------------------
    # simulate
    # ------------------------------------------------------------------
    @staticmethod
    def simulate(config: ExperimentConfig) -> Tuple[SimulationSummaryOut, RunRecord, TimeGrid]:
        """
        Run the configured replicas over ``config.horizon`` steps.

        :return: Replica summaries, the record of replica 0 and its time grid.
        :rtype: Tuple[SimulationSummaryOut, RunRecord, TimeGrid]
        """

        context = ExperimentService.prepare(config)
        tasks = [
            (context.problem, context.schedule, config.horizon,
             EngineService.replica_seed(config.master_seed, i), config.boundedness_cap, i)
            for i in range(config.replicas)
        ]
        rows: List[ReplicaSummaryOut] = EngineService.map_replicas(_simulate_replica, tasks, config.workers)
        tolerance = settings.CONSENSUS_TOLERANCE
        summary = SimulationSummaryOut(
            consensus_tolerance=tolerance,
            reached_consensus=sum(row.bounded and row.disagreement <= tolerance for row in rows),
            replicas=rows,
        )
        first = EngineService.run(
            context.problem, context.schedule, config.horizon,
            EngineService.replica_seed(config.master_seed, 0), config.boundedness_cap, 0,
        )
        grid = build_time_grid(context.schedule, config.T_prime, 0, horizon=config.horizon)
        return summary, first, grid

    @staticmethod
    def trajectory_rows(record: RunRecord, grid: TimeGrid):
        """Rows (n, t(n), node, coordinate, value) of a record."""
        for n in range(record.X.shape[0]):
            t = float(grid.t[n])
            for node in range(record.M):
                for coordinate in range(record.d):
                    yield n, t, node, coordinate, float(record.X[n, node, coordinate])

    # ------------------------------------------------------------------
    # track
    # ------------------------------------------------------------------
    @staticmethod
    def track(config: ExperimentConfig) -> TrackingSummaryOut:
        """
        Verify the tracking bound on every replica.

        :raises Inadmissible: If the schedule fails an admissibility condition.

        :return: Per-epoch rows of all replicas and their summary.
        :rtype: TrackingSummaryOut
        """

        context = ExperimentService.prepare(config)
        ExperimentService._require_admissible(context)
        grid = build_time_grid(context.schedule, config.T_prime, 0, horizon=config.horizon)
        tasks = [
            (context.problem, context.schedule, grid, config.horizon,
             EngineService.replica_seed(config.master_seed, i), config.boundedness_cap, i,
             config.problem.h_max)
            for i in range(config.replicas)
        ]
        results = EngineService.map_replicas(_track_replica, tasks, config.workers)

        rows: List[EpochRowOut] = []
        growth_failures = 0
        settling = TrackingService.settling_index(context.problem, grid)
        violations_settled = 0
        for report, growth, _ in results:
            growth_failures += len(growth.failures)
            for epoch in report.epochs:
                rows.append(EpochRowOut(
                    replica=report.replica,
                    k=epoch.k,
                    n_k=epoch.n_k,
                    rho=epoch.rho,
                    bound=epoch.bound,
                    K_star=epoch.K_star,
                    K_T=epoch.K_T,
                    noise_term=epoch.noise_term,
                    entry_term=epoch.entry_term,
                    violated=epoch.violated,
                ))
                if epoch.violated and settling is not None and epoch.k >= settling:
                    violations_settled += 1

        summary = TrackingSummaryOut(
            replicas=len(results),
            epochs=grid.epochs,
            max_rho=max((row.rho for row in rows), default=0.0),
            violations=sum(row.violated for row in rows),
            violations_settled=violations_settled,
            settling_index=settling,
            growth_failures=growth_failures,
            K3=context.problem.growth_constants(grid.T)[1],
            rows=rows,
        )
        log_run_event("track", "success" if summary.violations == 0 else "warning",
                      replicas=summary.replicas, violations=summary.violations, max_rho=summary.max_rho)
        return summary

    # ------------------------------------------------------------------
    # trap
    # ------------------------------------------------------------------
    @staticmethod
    def trap(config: ExperimentConfig) -> ConcentrationReportOut:
        """
        Monte Carlo trapping experiment from entry index ``config.n0``.

        :raises Inadmissible: If the schedule fails an admissibility condition.
        :raises InsufficientConditioning: If too few replicas satisfy the entry event.

        :return: The concentration report.
        :rtype: ConcentrationReportOut
        """

        context = ExperimentService.prepare(config)
        ExperimentService._require_admissible(context)
        problem, schedule, n0 = context.problem, context.schedule, config.n0

        if config.trap_horizon is not None:
            horizon, capped = config.trap_horizon, False
        else:
            limit = max(settings.MAX_HORIZON, n0 + 1)
            if schedule.horizon_limit is not None:
                limit = min(limit, schedule.horizon_limit)
            probe = build_time_grid(schedule, config.T_prime, n0, horizon=limit)
            horizon, capped = ConcentrationService.trap_horizon(
                probe, n0, problem.attractor.tau, config.T_prime, limit,
            )
        grid = build_time_grid(schedule, config.T_prime, n0, horizon=horizon)

        report = ConcentrationService.trap_probability_mc(
            problem, schedule, grid, n0, horizon, config.replicas, config.master_seed,
            ExperimentService.window_constant(context, grid), config.workers,
            config.boundedness_cap, config.D, capped,
        )
        params, theorem = report.params, report.theorem
        return ConcentrationReportOut(
            delta_tilde=report.delta_tilde,
            D=params.D,
            gamma1=params.gamma1,
            gamma2=params.gamma2,
            omega=params.omega,
            C_star=params.C_star,
            branch=theorem.branch,
            theoretical_bound=theorem.value,
            raw_bound=theorem.raw,
            vacuous=theorem.vacuous,
            frequency=report.frequency,
            ci=report.ci,
            ci_half_width=report.ci_half_width,
            replicas_total=report.replicas_total,
            replicas_conditioned=report.replicas_conditioned,
            replicas_capped=report.replicas_capped,
            replicas_rejected=report.replicas_rejected,
            settled_at_n0=report.settled_at_n0,
            horizon=report.horizon,
            horizon_capped=report.horizon_capped,
            window_empty=report.window_empty,
            n0=report.n0,
            tau=report.tau,
            delta=report.delta,
            epsilon=report.epsilon,
            Delta=report.Delta,
            K_T=report.K_T,
        )

    # ------------------------------------------------------------------
    # bound
    # ------------------------------------------------------------------
    @staticmethod
    def bound(config: ExperimentConfig) -> BoundTableOut:
        """
        Theorem bound over ``config.bound.n0_values``.

        :raises Divergent: If the schedule does not vanish.

        :return: One row per n0.
        :rtype: BoundTableOut
        """

        context = ExperimentService.prepare(config)
        problem = context.problem
        grid = build_time_grid(context.schedule, config.T_prime, 0, horizon=config.horizon)
        C_star = ExperimentService.window_constant(context, grid)

        K_T = TrackingService.gronwall_factor(problem, grid.T)
        tilde = config.bound.delta_tilde_scale * ConcentrationService.delta_tilde(
            problem.attractor.delta, K_T, problem.hmetric.Lambda, problem.M, problem.d,
        )

        rows: List[BoundRowOut] = []
        D = None
        for n0 in sorted(config.bound.n0_values):
            params = ConcentrationService.martingale_params(problem, grid, n0, C_star, config.D)
            D = params.D
            result = ConcentrationService.theorem_bound(
                n0, context.schedule, problem.M, problem.d, C_star, params.D, tilde,
                params.kappa, params.C, grid.T,
            )
            rows.append(BoundRowOut(
                n0=n0, delta_tilde=tilde, branch=result.branch, bound=result.value, vacuous=result.vacuous,
            ))
        if D is None:
            D = ConcentrationService.martingale_params(problem, grid, 0, C_star, config.D).D
        return BoundTableOut(C_star=C_star, D=D, rows=rows)
