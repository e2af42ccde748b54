# app/core/ode.py

"""
Averaged ODE ẋ = h̄(x) = Σ_j π(j)h^j(x).

Classical fourth-order Runge-Kutta with a fixed step no larger than
``min(h_max, 1e-3)``. All routines accept a batch of initial points shaped
(..., d) and integrate them together.
"""

import logging
import math
from typing import Callable, Optional

import numpy as np

from app.core.exceptions import NonFinite, OutOfDomain, RegionExit
from app.core.hnorm import batch_h_norm
from app.models.hmetric import HMetric
from app.models.problem import DriftField, Region
from app.models.run import ReferenceSegment, RunRecord
from app.models.schedule import TimeGrid


logger = logging.getLogger(__name__)

MAX_STEP = 1e-3
REGION_TOL = 1e-9
C_T_INFLATION = 1.1
C_T_TIME_SPACING = 0.05


def _rk4(field: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    k1 = field(x)
    k2 = field(x + 0.5 * h * k1)
    k3 = field(x + 0.5 * h * k2)
    k4 = field(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance(
    field: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    duration: float,
    h_max: float,
    region: Optional[Region],
) -> np.ndarray:
    if duration <= 0.0:
        return x
    n_steps = max(1, math.ceil(duration / min(h_max, MAX_STEP)))
    h = duration / n_steps
    for _ in range(n_steps):
        x = _rk4(field, x, h)
        if not np.all(np.isfinite(x)):
            raise NonFinite("ODE state became non-finite")
        if region is not None and not np.all(region.contains(x, tol=REGION_TOL)):
            raise RegionExit(f"ODE trajectory left the {region.kind} region")
    return x


def flow(
    drift: DriftField,
    pi: np.ndarray,
    x0: np.ndarray,
    t: float,
    h_max: float = MAX_STEP,
    region: Optional[Region] = None,
) -> np.ndarray:
    """
    Time-t flow map Φ_t of the averaged ODE.

    :param drift: Per-node drift field.
    :type drift: DriftField

    :param pi: Stationary distribution weighting the nodes.
    :type pi: np.ndarray

    :param x0: Initial point(s), shape (..., d).
    :type x0: np.ndarray

    :param t: Flow time, t ≥ 0.
    :type t: float

    :param h_max: Largest RK4 step (capped at 1e-3).
    :type h_max: float

    :param region: Region the trajectory must stay in, if any.
    :type region: Optional[Region]

    :raises NonFinite: If the state overflows.
    :raises RegionExit: If the trajectory leaves ``region``.

    :return: Φ_t(x0) with the shape of ``x0``.
    :rtype: np.ndarray
    """

    if t < 0:
        raise ValueError("flow time must be non-negative")
    x = np.array(x0, dtype=float)
    return _advance(lambda y: drift.averaged(y, pi), x, float(t), h_max, region)


def flow_samples(
    drift: DriftField,
    pi: np.ndarray,
    x0: np.ndarray,
    times: np.ndarray,
    h_max: float = MAX_STEP,
    region: Optional[Region] = None,
) -> np.ndarray:
    """
    Flow evaluated at non-decreasing sample times.

    :return: Array shaped (len(times),) + x0.shape.
    :rtype: np.ndarray
    """

    times = np.asarray(times, dtype=float)
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("sample times must be non-negative and non-decreasing")

    field = lambda y: drift.averaged(y, pi)  # noqa: E731
    x = np.array(x0, dtype=float)
    out = np.empty((times.size,) + x.shape)
    now = 0.0
    for i, target in enumerate(times):
        x = _advance(field, x, target - now, h_max, region)
        now = target
        out[i] = x
    return out


def reference_segment(
    record: RunRecord,
    grid: TimeGrid,
    k: int,
    drift: DriftField,
    pi: np.ndarray,
    h_max: float = MAX_STEP,
) -> ReferenceSegment:
    """
    ODE solution over epoch k started from the π-average of X(n_k).

    Each knot interval [t(n), t(n+1)] (length a(n+1)) is integrated in two
    halves so the midpoint value is recorded as well.

    :param record: Simulated run.
    :type record: RunRecord

    :param grid: Time grid of the run.
    :type grid: TimeGrid

    :param k: Epoch index.
    :type k: int

    :param drift: Drift of the problem.
    :type drift: DriftField

    :param pi: Stationary distribution.
    :type pi: np.ndarray

    :raises OutOfDomain: If epoch k is not fully recorded.

    :return: Knot and midpoint values of x^{T_k}.
    :rtype: ReferenceSegment
    """

    if k < 0 or k >= grid.epochs:
        raise OutOfDomain(f"epoch {k} outside the grid's {grid.epochs} epochs")
    n_start, n_end = int(grid.n_k[k]), int(grid.n_k[k + 1])
    if n_end > record.n_steps:
        raise OutOfDomain(f"epoch {k} ends at n={n_end}, run has {record.n_steps} steps")

    knot_times = grid.t[n_start:n_end + 1]
    field = lambda y: drift.averaged(y, pi)  # noqa: E731

    x = pi @ record.X[n_start]
    knots = np.empty((knot_times.size, x.size))
    mids = np.empty((knot_times.size - 1, x.size))
    knots[0] = x
    for j in range(knot_times.size - 1):
        half = 0.5 * (knot_times[j + 1] - knot_times[j])
        x = _advance(field, x, half, h_max, None)
        mids[j] = x
        x = _advance(field, x, half, h_max, None)
        knots[j + 1] = x

    return ReferenceSegment(
        k=k,
        n_start=n_start,
        knot_times=knot_times.copy(),
        knot_values=knots,
        mid_times=0.5 * (knot_times[:-1] + knot_times[1:]),
        mid_values=mids,
    )


def lifted_drift_norm(drift: DriftField, hmetric: HMetric, points: np.ndarray) -> np.ndarray:
    """‖h(1xᵀ)‖_H for points shaped (..., d)."""
    points = np.asarray(points, dtype=float)
    lifted = np.broadcast_to(points[..., None, :], points.shape[:-1] + (drift.M, drift.d))
    return batch_h_norm(drift(lifted), hmetric)


def estimate_C_T(
    drift: DriftField,
    pi: np.ndarray,
    hmetric: HMetric,
    region: Region,
    T: float,
    resolution: int = 33,
    h_max: float = MAX_STEP,
    spacing: float = C_T_TIME_SPACING,
) -> float:
    """
    C_T = max over t ∈ [0, T] and x in the region of ‖h(1·Φ_t(x)ᵀ)‖_H, inflated by 10%.

    :param drift: Drift field.
    :type drift: DriftField

    :param pi: Stationary distribution.
    :type pi: np.ndarray

    :param hmetric: Solved metric.
    :type hmetric: HMetric

    :param region: Region of initial points (also the allowed trajectory region).
    :type region: Region

    :param T: Time horizon.
    :type T: float

    :param resolution: Grid points per axis.
    :type resolution: int

    :param spacing: Spacing of the time samples.
    :type spacing: float

    :raises RegionExit: If a trajectory from the grid leaves the region.

    :return: Inflated grid maximum.
    :rtype: float
    """

    points = region.grid(resolution)
    if points.shape[0] == 0:
        return 0.0
    n_samples = max(1, math.ceil(T / spacing))
    times = np.linspace(0.0, T, n_samples + 1)
    values = flow_samples(drift, pi, points, times, h_max, region)
    peak = float(np.max(lifted_drift_norm(drift, hmetric, values)))
    logger.debug("C_T grid maximum %.6g over %d points", peak, points.shape[0])
    return C_T_INFLATION * peak
