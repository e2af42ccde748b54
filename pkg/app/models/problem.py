# app/models/problem.py

"""
Test-problem building blocks.

Drift fields act row-wise on M×d iterate arrays (optionally with leading
batch axes), so ``h(X)[..., i, :] = h^i(X[..., i, :])``. The averaged field
is obtained by lifting a point to the consensus array 1xᵀ and taking the
π-weighted row sum.

All classes here are plain, picklable objects: replica workers receive a
copy of the whole ``ProblemInstance``.
"""

from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np

from app.models.gossip_model import GossipModel
from app.models.hmetric import HMetric


# ----------------------------------------------------------------------
# Regions
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Region:
    """
    Box or Euclidean ball in ℝ^d.

    :param kind: "box" or "ball".
    :type kind: Literal["box", "ball"]

    :param lower: Box lower corner (box) or centre (ball).
    :type lower: np.ndarray

    :param upper: Box upper corner (box); unused for balls.
    :type upper: np.ndarray

    :param radius: Ball radius; unused for boxes.
    :type radius: float
    """

    kind: Literal["box", "ball"]
    lower: np.ndarray
    upper: np.ndarray
    radius: float = 0.0

    @classmethod
    def box(cls, lower, upper) -> "Region":
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        return cls("box", lo, hi)

    @classmethod
    def ball(cls, center, radius: float) -> "Region":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls("ball", c, c.copy(), float(radius))

    @property
    def d(self) -> int:
        return int(self.lower.size)

    @property
    def center(self) -> np.ndarray:
        return self.lower if self.kind == "ball" else 0.5 * (self.lower + self.upper)

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.kind == "ball":
            return self.lower - self.radius, self.lower + self.radius
        return self.lower, self.upper

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Closed-membership test along the last axis."""
        x = np.asarray(x, dtype=float)
        if self.kind == "ball":
            return np.linalg.norm(x - self.lower, axis=-1) <= self.radius + tol
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def expand(self, delta: float) -> "Region":
        if self.kind == "ball":
            return Region.ball(self.lower, self.radius + delta)
        return Region.box(self.lower - delta, self.upper + delta)

    def grid(self, resolution: int) -> np.ndarray:
        """Product grid over the bounding box, masked to the region; shape (N, d)."""
        lo, hi = self.bounding_box()
        axes = [np.linspace(lo[j], hi[j], resolution) for j in range(self.d)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)
        return mesh[self.contains(mesh)]

    def max_norm(self) -> float:
        """sup of ‖x‖₂ over the region."""
        if self.kind == "ball":
            return float(np.linalg.norm(self.lower) + self.radius)
        corner = np.maximum(np.abs(self.lower), np.abs(self.upper))
        return float(np.linalg.norm(corner))

    def contains_ball(self, center: np.ndarray, r: float) -> bool:
        """True when the open ball B(center, r) lies inside the region."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if self.kind == "ball":
            return bool(np.linalg.norm(center - self.lower) + r <= self.radius)
        return bool(np.all(center - r >= self.lower) and np.all(center + r <= self.upper))


# ----------------------------------------------------------------------
# Lyapunov function
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class QuadraticLyapunov:
    """V(x) = ‖x − center‖²; its sublevel sets are Euclidean balls."""

    center: np.ndarray

    def value(self, x: np.ndarray) -> np.ndarray:
        diff = np.asarray(x, dtype=float) - self.center
        return np.sum(diff * diff, axis=-1)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * (np.asarray(x, dtype=float) - self.center)

    def project(self, x: np.ndarray, level: float) -> np.ndarray:
        """Euclidean projection onto {V ≤ level}."""
        x = np.asarray(x, dtype=float)
        radius = np.sqrt(max(level, 0.0))
        diff = x - self.center
        norm = np.linalg.norm(diff, axis=-1, keepdims=True)
        scale = np.where(norm > radius, radius / np.where(norm > 0, norm, 1.0), 1.0)
        return self.center + diff * scale


# ----------------------------------------------------------------------
# Drift fields
# ----------------------------------------------------------------------
class DriftField:
    """
    Row-wise drift h(X) with certified constants.

    Subclasses implement ``__call__`` for arrays shaped (..., M, d).
    """

    kind: str = "abstract"

    def __init__(self, M: int, d: int) -> None:
        self.M = M
        self.d = d

    def __call__(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def averaged(self, x: np.ndarray, pi: np.ndarray) -> np.ndarray:
        """h̄(x) = Σ_j π(j)h^j(x) for x shaped (..., d)."""
        x = np.asarray(x, dtype=float)
        lifted = np.broadcast_to(x[..., None, :], x.shape[:-1] + (self.M, self.d))
        return np.einsum("m,...md->...d", pi, self(lifted))

    def row_lipschitz(self, region: Region) -> float:  # pragma: no cover - interface
        raise NotImplementedError

    def growth_constant(self, region: Region) -> float:  # pragma: no cover - interface
        raise NotImplementedError

    def h_lipschitz(self, region: Region, hmetric: HMetric) -> float:
        """
        Lipschitz constant of h in the H-norm on arrays with rows in ``region``.

        From the row constant: ‖h(X) − h(Y)‖_H ≤ √Λ·‖h(X) − h(Y)‖₂ ≤ √Λ·L_row·‖X − Y‖_H.
        """
        return self.row_lipschitz(region) * float(np.sqrt(hmetric.Lambda))


class LinearDrift(DriftField):
    """h^i(x) = −(x − θ_i)."""

    kind = "linear"

    def __init__(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=float)
        super().__init__(*theta.shape)
        self.theta = theta

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.theta - X

    def equilibrium(self, pi: np.ndarray) -> np.ndarray:
        return pi @ self.theta

    def row_lipschitz(self, region: Region) -> float:
        return 1.0

    def h_lipschitz(self, region: Region, hmetric: HMetric) -> float:
        # h(X) − h(Y) = −(X − Y) in every norm
        return 1.0

    def growth_constant(self, region: Region) -> float:
        # ‖Θ − X‖ ≤ ‖Θ‖_F + ‖X‖ ≤ (1 + ‖Θ‖_F)(1 + ‖X‖) everywhere
        return 1.0 + float(np.linalg.norm(self.theta))


class DoubleWellDrift(DriftField):
    """h^i(x) = x − x³ + c_i, applied coordinate-wise."""

    kind = "double_well"

    def __init__(self, offsets: np.ndarray) -> None:
        offsets = np.asarray(offsets, dtype=float)
        super().__init__(*offsets.shape)
        self.offsets = offsets

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return X - X ** 3 + self.offsets

    def equilibrium(self, pi: np.ndarray, well: float = 1.0) -> np.ndarray:
        """Real root of x − x³ + s = 0 per coordinate, nearest to ``well``."""
        shift = pi @ self.offsets
        roots = []
        for s in shift:
            candidates = np.roots([-1.0, 0.0, 1.0, s])
            real = candidates[np.abs(candidates.imag) < 1e-9].real
            roots.append(real[np.argmin(np.abs(real - well))])
        return np.asarray(roots, dtype=float)

    def row_lipschitz(self, region: Region) -> float:
        lo, hi = region.bounding_box()
        slopes = [np.abs(1.0 - 3.0 * lo ** 2), np.abs(1.0 - 3.0 * hi ** 2)]
        crosses_zero = (lo <= 0.0) & (hi >= 0.0)
        slopes.append(np.where(crosses_zero, 1.0, 0.0))
        return float(np.max(np.stack(slopes)))

    def growth_constant(self, region: Region) -> float:
        # valid for arrays whose rows stay inside the region
        lo, hi = region.bounding_box()
        xs = np.linspace(lo, hi, 2001)
        cubic = np.abs(xs - xs ** 3)[:, None, :] + np.abs(self.offsets)[None, :, :]
        per_node = np.sqrt(np.sum(np.max(cubic, axis=0) ** 2, axis=-1))
        return float(np.sqrt(self.M) * np.max(per_node))


# ----------------------------------------------------------------------
# Noise
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class UniformNoise:
    """
    Entrywise uniform noise on [−β, β] scaled by (1 + ‖X‖₂).

    Zero conditional mean and |M_ij| ≤ β(1 + ‖X‖₂) by construction.
    """

    beta: float

    def sample(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        scale = self.beta * (1.0 + np.linalg.norm(X))
        return scale * rng.uniform(-1.0, 1.0, size=X.shape)

    def K2(self, hmetric: HMetric, M: int, d: int) -> float:
        return self.beta * float(np.sqrt(hmetric.Lambda * M * d))

    @property
    def kappa(self) -> float:
        return 1.0

    def C(self, K5: float) -> float:
        return float(np.exp(self.beta * (1.0 + K5)))


# ----------------------------------------------------------------------
# Attractor data and assembled instance
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class AttractorSpec:
    """
    Attractor, Lyapunov data and the nested regions.

    :param V: Lyapunov function, zero exactly on the attractor.
    :type V: QuadraticLyapunov

    :param epsilon: Level ε of A^ε = {V ≤ ε}.
    :type epsilon: float

    :param Delta: Per-window descent margin Δ.
    :type Delta: float

    :param delta: Tube radius δ.
    :type delta: float

    :param B_prime: Region of entry conditions B′.
    :type B_prime: Region

    :param B_breve: Outer region B̆ = B′ expanded by δ.
    :type B_breve: Region

    :param tau: Trapping time τ.
    :type tau: float

    :param K5: sup of ‖X‖₂ over arrays with rows in B̆.
    :type K5: float

    :param max_V: max of V over the closure of B′.
    :type max_V: float
    """

    V: QuadraticLyapunov
    epsilon: float
    Delta: float
    delta: float
    B_prime: Region
    B_breve: Region
    tau: float
    K5: float
    max_V: float

    @property
    def center(self) -> np.ndarray:
        return self.V.center

    @property
    def trap_level(self) -> float:
        """Level ε + 2Δ/3 of the trapping set."""
        return self.epsilon + 2.0 * self.Delta / 3.0


@dataclass(frozen=True)
class ProblemConstants:
    """
    Certified constants of the standing assumptions.

    :param L: Lipschitz constant of h in the H-norm.
    :type L: float

    :param L_row: Lipschitz constant of each h^i in the Euclidean norm.
    :type L_row: float

    :param K1: Linear-growth constant, ‖h(X)‖₂ ≤ K1(1 + ‖X‖₂).
    :type K1: float

    :param K2: Noise growth constant, ‖M̃‖_H ≤ K2(1 + ‖X‖₂).
    :type K2: float

    :param kappa: Exponential-moment exponent.
    :type kappa: float

    :param C: Exponential-moment bound.
    :type C: float
    """

    L: float
    L_row: float
    K1: float
    K2: float
    kappa: float
    C: float


@dataclass(frozen=True)
class ProblemInstance:
    """Gossip model, drift, noise, attractor data and constants of one experiment."""

    name: str
    gossip: GossipModel
    hmetric: HMetric
    drift: DriftField
    noise: UniformNoise
    attractor: AttractorSpec
    constants: ProblemConstants
    initial: np.ndarray
    T: float
    C_T: float

    @property
    def M(self) -> int:
        return self.gossip.M

    @property
    def d(self) -> int:
        return self.drift.d

    def growth_constants(self, T: Optional[float] = None) -> Tuple[float, float, float]:
        """
        Return (K′, K3, K4) for window length T.

        K′ = K1 + K2, K3 = (1 + K′T)·exp(K′T), K4 = K2(1 + K3(1 + K5)).
        """

        T = self.T if T is None else T
        K_prime = self.constants.K1 + self.constants.K2
        K3 = (1.0 + K_prime * T) * float(np.exp(K_prime * T))
        K4 = self.constants.K2 * (1.0 + K3 * (1.0 + self.attractor.K5))
        return K_prime, K3, K4
