# app/services/problem_service.py

"""
Problem Service
---------------

Builds the shipped test problems and derives their attractor data:

- descent margin Δ from the flow over the region grid
- tube radius δ by dyadic search
- outer region B̆, K5, Lipschitz and growth constants, C_T
- trapping time τ

The sampled checks (Lipschitz, growth, descent, noise moments) used by the
validation command live here as well.
"""

import logging
from typing import Optional

import numpy as np

from app.core.exceptions import DimensionMismatch, NonPositiveMargin
from app.core.hnorm import batch_h_norm
from app.core.ode import estimate_C_T, flow
from app.models import (
    AttractorSpec,
    DoubleWellDrift,
    DriftField,
    GossipModel,
    HMetric,
    LinearDrift,
    ProblemConstants,
    ProblemInstance,
    QuadraticLyapunov,
    Region,
    UniformNoise,
)


logger = logging.getLogger(__name__)

MARGIN_SAFETY = 0.9
DELTA_HALVINGS = 60
DEFAULT_RESOLUTION = 33
DEFAULT_BOX = (0.2, 1.8)


class ProblemService:
    """
    Service assembling ``ProblemInstance`` objects and checking their constants.
    """

    # ------------------------------------------------------------------
    # Pointwise operations
    # ------------------------------------------------------------------
    @staticmethod
    def averaged_drift(drift: DriftField, x: np.ndarray, pi: np.ndarray) -> np.ndarray:
        """
        π-weighted drift h̄(x) = Σ_j π(j)h^j(x).

        :param drift: Drift field.
        :type drift: DriftField

        :param x: Point(s) shaped (..., d).
        :type x: np.ndarray

        :param pi: Stationary distribution.
        :type pi: np.ndarray

        :return: h̄(x).
        :rtype: np.ndarray
        """

        return drift.averaged(x, pi)

    @staticmethod
    def sample_noise(noise: UniformNoise, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw M̃(n+1) given X(n) = ``state``."""
        return noise.sample(np.asarray(state, dtype=float), rng)

    @staticmethod
    def max_lyapunov(V: QuadraticLyapunov, region: Region) -> float:
        """max of V over the closure of the region (exact for balls and boxes)."""
        if region.kind == "ball":
            return float((np.linalg.norm(region.center - V.center) + region.radius) ** 2)
        far = np.maximum(np.abs(region.lower - V.center), np.abs(region.upper - V.center))
        return float(np.sum(far ** 2))

    # ------------------------------------------------------------------
    # Attractor data
    # ------------------------------------------------------------------
    @staticmethod
    def descent_margin(
        drift: DriftField,
        pi: np.ndarray,
        V: QuadraticLyapunov,
        region: Region,
        epsilon: float,
        T: float,
        resolution: int = DEFAULT_RESOLUTION,
        h_max: float = 1e-3,
    ) -> float:
        """
        Δ = 0.9 · min over the grid of region \\ A^ε of V(x) − V(Φ_T(x)).

        :raises NonPositiveMargin: If the exterior grid is empty or the minimum is ≤ 0.

        :return: Δ > 0.
        :rtype: float
        """

        points = region.grid(resolution)
        exterior = points[V.value(points) > epsilon]
        if exterior.shape[0] == 0:
            raise NonPositiveMargin("grid of the region outside A^epsilon is empty")

        end = flow(drift, pi, exterior, T, h_max)
        decrease = V.value(exterior) - V.value(end)
        worst = float(np.min(decrease))
        if worst <= 0.0:
            at = exterior[int(np.argmin(decrease))]
            raise NonPositiveMargin(f"V does not decrease over time {T:g} from x={at.tolist()}")
        return MARGIN_SAFETY * worst

    @staticmethod
    def select_delta(
        V: QuadraticLyapunov,
        region: Region,
        epsilon: float,
        Delta: float,
        resolution: int = DEFAULT_RESOLUTION,
    ) -> float:
        """
        Largest δ on the dyadic ladder diam, diam/2, ... satisfying both
        |V(x) − V(y)| < Δ/3 for grid x and ‖x − y‖ ≤ δ, and N^δ(A^ε) ⊂ region.

        Displacements are taken along the coordinate axes and radially, the
        radial one being the worst case for a quadratic V.

        :raises NonPositiveMargin: If no rung of the ladder qualifies.

        :return: δ > 0.
        :rtype: float
        """

        lo, hi = region.bounding_box()
        diameter = float(np.linalg.norm(hi - lo))
        points = region.grid(resolution)
        d = region.d

        radial = points - V.center
        norms = np.linalg.norm(radial, axis=-1, keepdims=True)
        radial = np.where(norms > 0, radial / np.where(norms > 0, norms, 1.0), np.eye(d)[0])
        directions = np.concatenate([np.eye(d), -np.eye(d)])

        base = V.value(points)
        delta = diameter
        for _ in range(DELTA_HALVINGS):
            if region.contains_ball(V.center, np.sqrt(epsilon) + delta):
                moved = np.concatenate([
                    (points[:, None, :] + delta * directions[None, :, :]).reshape(-1, d),
                    points + delta * radial,
                    points - delta * radial,
                ])
                repeated = np.concatenate([np.repeat(base, 2 * d), base, base])
                if np.max(np.abs(V.value(moved) - repeated), initial=0.0) < Delta / 3.0:
                    return delta
            delta *= 0.5
        raise NonPositiveMargin("no tube radius satisfies the oscillation and containment conditions")

    @staticmethod
    def trapping_time(max_V: float, epsilon: float, Delta: float, T: float) -> float:
        """
        τ = 3(max V − ε)/Δ · (T + 1).

        :param max_V: Maximum of V over the entry region.
        :param epsilon: Level ε.
        :param Delta: Descent margin Δ > 0.
        :param T: Window length.
        :return: τ ≥ 0.
        """

        if Delta <= 0:
            raise NonPositiveMargin("trapping time needs a positive descent margin")
        return 3.0 * max(max_V - epsilon, 0.0) / Delta * (T + 1.0)

    # ------------------------------------------------------------------
    # Assembly
    # ------------------------------------------------------------------
    @staticmethod
    def build(
        name: str,
        gossip: GossipModel,
        hmetric: HMetric,
        drift: DriftField,
        noise: UniformNoise,
        V: QuadraticLyapunov,
        B_prime: Region,
        epsilon: float,
        T: float,
        initial: Optional[np.ndarray] = None,
        resolution: int = DEFAULT_RESOLUTION,
        max_V: Optional[float] = None,
        h_max: float = 1e-3,
    ) -> ProblemInstance:
        """
        Derive the attractor data and certified constants of a problem.

        Order: Δ, δ, B̆ = B′ + δ, K5, L, K1, K2, κ, C, C_T, τ.

        :raises DimensionMismatch: If the components disagree on M or d.
        :raises NonPositiveMargin: If Δ or δ cannot be made positive.

        :return: The assembled instance.
        :rtype: ProblemInstance
        """

        M, d = gossip.M, drift.d
        if drift.M != M or hmetric.M != M:
            raise DimensionMismatch(f"drift has {drift.M} nodes, gossip matrix has {M}")
        if B_prime.d != d or V.center.size != d:
            raise DimensionMismatch(f"region dimension {B_prime.d} does not match d={d}")
        if epsilon <= 0:
            raise NonPositiveMargin("epsilon must be positive")

        if initial is None:
            initial = np.broadcast_to(B_prime.center, (M, d)).copy()
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (M, d):
            raise DimensionMismatch(f"initial state has shape {initial.shape}, expected {(M, d)}")

        Delta = ProblemService.descent_margin(drift, gossip.pi, V, B_prime, epsilon, T, resolution, h_max)
        delta = ProblemService.select_delta(V, B_prime, epsilon, Delta, resolution)
        B_breve = B_prime.expand(delta)
        K5 = float(np.sqrt(M) * B_breve.max_norm())

        L_row = drift.row_lipschitz(B_breve)
        constants = ProblemConstants(
            L=drift.h_lipschitz(B_breve, hmetric),
            L_row=L_row,
            K1=drift.growth_constant(B_breve),
            K2=noise.K2(hmetric, M, d),
            kappa=noise.kappa,
            C=noise.C(K5),
        )
        C_T = estimate_C_T(drift, gossip.pi, hmetric, B_breve, T, resolution, h_max)

        top = ProblemService.max_lyapunov(V, B_prime) if max_V is None else float(max_V)
        tau = ProblemService.trapping_time(top, epsilon, Delta, T)

        attractor = AttractorSpec(
            V=V,
            epsilon=epsilon,
            Delta=Delta,
            delta=delta,
            B_prime=B_prime,
            B_breve=B_breve,
            tau=tau,
            K5=K5,
            max_V=top,
        )
        logger.info(
            "problem %s: Delta=%.4g delta=%.4g tau=%.4g C_T=%.4g L=%.4g",
            name, Delta, delta, tau, C_T, constants.L,
        )
        return ProblemInstance(
            name=name,
            gossip=gossip,
            hmetric=hmetric,
            drift=drift,
            noise=noise,
            attractor=attractor,
            constants=constants,
            initial=initial,
            T=T,
            C_T=C_T,
        )

    @staticmethod
    def build_linear(
        gossip: GossipModel,
        hmetric: HMetric,
        theta: np.ndarray,
        beta: float,
        epsilon: float,
        T: float,
        radius: float = 1.0,
        **options,
    ) -> ProblemInstance:
        """
        Linear problem h^i(x) = −(x − θ_i) with V(x) = ‖x − θ̄‖² and B′ a ball around θ̄.
        """

        drift = LinearDrift(theta)
        if drift.M != gossip.M:
            raise DimensionMismatch(f"theta has {drift.M} rows, gossip matrix has {gossip.M}")
        center = drift.equilibrium(gossip.pi)
        return ProblemService.build(
            "linear", gossip, hmetric, drift, UniformNoise(beta),
            QuadraticLyapunov(center), options.pop("region", None) or Region.ball(center, radius),
            epsilon, T, **options,
        )

    @staticmethod
    def build_double_well(
        gossip: GossipModel,
        hmetric: HMetric,
        offsets: np.ndarray,
        beta: float,
        epsilon: float,
        T: float,
        well: float = 1.0,
        **options,
    ) -> ProblemInstance:
        """
        Double well h^i(x) = x − x³ + c_i around the equilibrium nearest ``well``;
        B′ defaults to the box (0.2, 1.8)^d.
        """

        drift = DoubleWellDrift(offsets)
        if drift.M != gossip.M:
            raise DimensionMismatch(f"offsets have {drift.M} rows, gossip matrix has {gossip.M}")
        center = drift.equilibrium(gossip.pi, well)
        region = options.pop("region", None) or Region.box(
            np.full(drift.d, DEFAULT_BOX[0]), np.full(drift.d, DEFAULT_BOX[1])
        )
        return ProblemService.build(
            "double_well", gossip, hmetric, drift, UniformNoise(beta),
            QuadraticLyapunov(center), region, epsilon, T, **options,
        )

    # ------------------------------------------------------------------
    # Sampled checks
    # ------------------------------------------------------------------
    @staticmethod
    def _sample_arrays(region: Region, M: int, count: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = region.bounding_box()
        samples = rng.uniform(lo, hi, size=(count * 4, M, region.d))
        inside = np.all(region.contains(samples), axis=-1)
        kept = samples[inside]
        if kept.shape[0] < count:
            centre = np.broadcast_to(region.center, (count, M, region.d))
            kept = np.concatenate([kept, centre])
        return kept[:count]

    @staticmethod
    def lipschitz_check(problem: ProblemInstance, pairs: int = 1000, seed: int = 0) -> float:
        """
        Largest ratio ‖h(X) − h(Y)‖_H / (L‖X − Y‖_H) over random pairs with rows in B̆.

        :return: The ratio; at most 1 when L is certified.
        :rtype: float
        """

        rng = np.random.default_rng(seed)
        region = problem.attractor.B_breve
        X = ProblemService._sample_arrays(region, problem.M, pairs, rng)
        Y = ProblemService._sample_arrays(region, problem.M, pairs, rng)
        top = batch_h_norm(problem.drift(X) - problem.drift(Y), problem.hmetric)
        bottom = problem.constants.L * batch_h_norm(X - Y, problem.hmetric)
        valid = bottom > 0
        if not np.any(valid):
            return 0.0
        return float(np.max(top[valid] / bottom[valid]))

    @staticmethod
    def growth_sample_check(problem: ProblemInstance, samples: int = 1000, seed: int = 0) -> float:
        """Largest ratio ‖h(X)‖₂ / (K1(1 + ‖X‖₂)) over samples with rows in B̆."""
        rng = np.random.default_rng(seed)
        X = ProblemService._sample_arrays(problem.attractor.B_breve, problem.M, samples, rng)
        norms = np.linalg.norm(X.reshape(X.shape[0], -1), axis=-1)
        drift_norms = np.linalg.norm(problem.drift(X).reshape(X.shape[0], -1), axis=-1)
        return float(np.max(drift_norms / (problem.constants.K1 * (1.0 + norms))))

    @staticmethod
    def descent_check(problem: ProblemInstance, resolution: int = DEFAULT_RESOLUTION) -> float:
        """
        max over the B̆ grid of ⟨∇V, h̄⟩ at points with V > ε; non-positive when V descends.
        """

        V = problem.attractor.V
        points = problem.attractor.B_breve.grid(resolution)
        points = points[V.value(points) > problem.attractor.epsilon]
        if points.shape[0] == 0:
            return 0.0
        inner = np.sum(V.gradient(points) * problem.drift.averaged(points, problem.gossip.pi), axis=-1)
        return float(np.max(inner))

    @staticmethod
    def noise_moment_check(
        problem: ProblemInstance,
        state: Optional[np.ndarray] = None,
        draws: int = 100_000,
        seed: int = 0,
    ) -> dict:
        """
        Monte Carlo check of zero mean and E[exp(κ|M_ij|)] ≤ C at a fixed state.

        :return: ``{"mean_ok": bool, "mgf": float, "C": float}``.
        :rtype: dict
        """

        rng = np.random.default_rng(seed)
        state = problem.initial if state is None else np.asarray(state, dtype=float)
        samples = np.stack([ProblemService.sample_noise(problem.noise, state, rng) for _ in range(draws)])
        mean = samples.mean(axis=0)
        err = samples.std(axis=0) / np.sqrt(draws)
        mean_ok = bool(np.all(np.abs(mean) <= 4.0 * err + 1e-300))
        mgf = float(np.max(np.mean(np.exp(problem.constants.kappa * np.abs(samples)), axis=0)))
        return {"mean_ok": mean_ok, "mgf": mgf, "C": problem.constants.C}
