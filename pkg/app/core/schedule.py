# app/core/schedule.py

"""
Stepsize admissibility, windows and the epoch grid.

Series conditions (Σa = ∞, Σa² < ∞) and the decay order behind the window
bound are decided per schedule kind from known series facts; everything
else is checked numerically over a finite horizon.
"""

import logging
import math
from typing import Dict, Optional, Tuple

import numpy as np

from app.core.exceptions import HorizonExceeded, Inadmissible
from app.models.schedule import ScheduleReport, StepSchedule, TimeGrid, Verdict


logger = logging.getLogger(__name__)

CHUNK = 1 << 16
MAX_SEARCH = 100_000_000
C_STAR_INFLATION = 1.1


# ----------------------------------------------------------------------
# Series facts per kind
# ----------------------------------------------------------------------
def _series_facts(schedule: StepSchedule) -> Dict[str, Tuple[Verdict, str]]:
    kind, g = schedule.kind, schedule.gamma

    if kind in ("harmonic", "log_harmonic"):
        return {
            "sum_diverges": ("pass", f"{kind} series diverges"),
            "square_summable": ("pass", f"{kind} squares are summable"),
            "window_bound": ("pass", "(n+1)·a(n) is bounded"),
        }
    if kind in ("power", "shifted_power"):
        return {
            "sum_diverges": ("pass", f"gamma={g} <= 1") if g <= 1 else ("fail", f"gamma={g} > 1: series converges"),
            "square_summable": ("pass", f"gamma={g} > 1/2") if g > 0.5 else ("fail", f"gamma={g} <= 1/2: squares diverge"),
            "window_bound": ("pass", f"gamma={g} >= 1") if g >= 1 else (
                "fail", f"gamma={g} < 1: (n+1)·a(n) grows without bound"
            ),
        }
    if kind == "constant":
        if schedule.value > 0:
            return {
                "sum_diverges": ("pass", "constant positive step"),
                "square_summable": ("fail", "constant positive step: squares diverge"),
                "window_bound": ("fail", "constant positive step: (n+1)·a(n) grows without bound"),
            }
        return {
            "sum_diverges": ("fail", "zero step"),
            "square_summable": ("pass", "zero step"),
            "window_bound": ("pass", "zero step"),
        }
    return {
        "sum_diverges": ("unverified", "finite table"),
        "square_summable": ("unverified", "finite table"),
        "window_bound": ("unverified", "finite table"),
    }


def _window_lengths(a: np.ndarray, T: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    m(n) − n for every n whose window closes inside the array.

    :return: (indices n, window lengths m(n) − n).
    """

    prefix = np.concatenate(([0.0], np.cumsum(a)))
    closing = np.searchsorted(prefix, prefix[:-1] + T, side="left") - 1
    n = np.arange(a.size)
    complete = closing < a.size
    return n[complete], closing[complete] - n[complete]


def measure_window_constant(schedule: StepSchedule, horizon: int, T: float) -> float:
    """
    Smallest C with m(n) − n ≤ C·T·(n+1) over the horizon, inflated by 10%.

    :return: Measured constant, or NaN when no window closes inside the horizon.
    :rtype: float
    """

    a = schedule.steps(np.arange(horizon + 1))
    n, lengths = _window_lengths(a, T)
    if n.size == 0:
        return float("nan")
    return C_STAR_INFLATION * float(np.max(lengths / (T * (n + 1))))


def validate_schedule(
    schedule: StepSchedule,
    horizon: int,
    T: float = 1.0,
    raise_on_failure: bool = False,
) -> ScheduleReport:
    """
    Check the stepsize assumptions.

    :param schedule: Schedule to check.
    :type schedule: StepSchedule

    :param horizon: Last index used by the empirical checks.
    :type horizon: int

    :param T: Window length for the window bound.
    :type T: float

    :param raise_on_failure: Raise instead of returning a failing report.
    :type raise_on_failure: bool

    :raises Inadmissible: With the failed condition names, when requested.

    :return: Per-condition verdicts.
    :rtype: ScheduleReport
    """

    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if schedule.horizon_limit is not None:
        horizon = min(horizon, schedule.horizon_limit)

    a = schedule.steps(np.arange(horizon + 1))
    verdicts: Dict[str, Tuple[Verdict, str]] = {}

    negative = np.flatnonzero(a < 0)
    verdicts["nonnegative"] = (
        ("fail", f"a({int(negative[0])}) < 0") if negative.size else ("pass", "all steps >= 0")
    )

    facts = _series_facts(schedule)
    verdicts["sum_diverges"] = facts["sum_diverges"]
    verdicts["square_summable"] = facts["square_summable"]

    suffix_max = np.maximum.accumulate(a[::-1])[::-1]
    breach = np.flatnonzero(suffix_max > schedule.c * a * (1.0 + 1e-12) + 1e-300)
    verdicts["quasi_monotone"] = (
        ("fail", f"a(m) > c·a({int(breach[0])}) for some m >= {int(breach[0])} with c={schedule.c}")
        if breach.size else ("pass", f"a(m) <= {schedule.c}·a(n) for m >= n <= {horizon}")
    )

    tail = a[horizon // 2:]
    rises = np.flatnonzero(np.diff(tail) > 1e-15 * np.maximum(tail[:-1], 1e-300))
    verdicts["eventually_decreasing"] = (
        ("fail", f"a increases at n={horizon // 2 + int(rises[0])}")
        if rises.size else ("pass", f"non-increasing on [{horizon // 2}, {horizon}]")
    )

    measured = measure_window_constant(schedule, horizon, T)
    window_verdict, window_detail = facts["window_bound"]
    if schedule.C_star is not None and window_verdict != "fail":
        n, lengths = _window_lengths(a, T)
        over = np.flatnonzero(lengths > schedule.C_star * T * (n + 1))
        if over.size:
            at = int(n[over[0]])
            window_verdict = "fail"
            window_detail = f"m(n) - n > C*·T·(n+1) at n={at} with declared C*={schedule.C_star}"
        elif window_verdict == "unverified":
            window_verdict = "pass"
            window_detail = f"declared C*={schedule.C_star} holds over the horizon"
    verdicts["window_bound"] = (window_verdict, f"{window_detail}; measured C*={measured:.6g}")

    C_star = schedule.C_star if schedule.C_star is not None else measured
    report = ScheduleReport(verdicts=verdicts, C_star=C_star, horizon=horizon)
    if report.violations:
        logger.info("schedule %s fails %s", schedule.kind, report.violations)
        if raise_on_failure:
            raise Inadmissible(report.violations)
    return report


def window_end(schedule: StepSchedule, n: int, T: float, horizon: int = MAX_SEARCH) -> int:
    """
    m(n) = min{k ≥ n : a(n) + ... + a(k) ≥ T}.

    :raises HorizonExceeded: If the partial sums do not reach T by ``horizon``.
    :raises Inadmissible: If a declared C* is violated at n.

    :return: The window end index.
    :rtype: int
    """

    if T <= 0:
        raise ValueError("T must be positive")
    if schedule.horizon_limit is not None:
        horizon = min(horizon, schedule.horizon_limit)

    total = 0.0
    start = n
    while start <= horizon:
        stop = min(start + CHUNK, horizon + 1)
        partial = total + np.cumsum(schedule.steps(np.arange(start, stop)))
        hit = np.flatnonzero(partial >= T)
        if hit.size:
            m = start + int(hit[0])
            if schedule.C_star is not None and m - n > schedule.C_star * T * (n + 1):
                raise Inadmissible([f"window_bound at n={n}: m(n) - n = {m - n}"])
            return m
        total = float(partial[-1])
        start = stop
    raise HorizonExceeded(f"partial sums from n={n} stay below T={T} up to index {horizon}")


# ----------------------------------------------------------------------
# Tail sums b(n) >= Σ_{m>=n} a(m)²
# ----------------------------------------------------------------------
def tail_bound(schedule: StepSchedule, n: int) -> float:
    """
    Closed-form upper bound f(n) + ∫_n^∞ f on the tail of squared steps.

    :return: b(n); infinite for a positive constant schedule.
    :rtype: float
    """

    s2 = schedule.scale ** 2
    g = schedule.gamma
    kind = schedule.kind

    if kind == "table":
        table = np.asarray(schedule.table, dtype=float)
        return float(np.sum(table[n:] ** 2))
    if kind == "constant":
        return math.inf if schedule.value > 0 else 0.0

    f = float(schedule.steps(n)) ** 2
    if kind == "harmonic":
        return f + s2 / (schedule.shift + n)
    if kind == "power":
        if g <= 0.5:
            return math.inf
        return f + s2 * (schedule.shift + n) ** (1.0 - 2.0 * g) / (2.0 * g - 1.0)
    if kind == "shifted_power":
        if g <= 0.5:
            return math.inf
        if n == 0:
            return f + tail_bound(schedule, 1)
        return f + s2 * n ** (1.0 - 2.0 * g) / (2.0 * g - 1.0)
    # log_harmonic
    if n < 2:
        return f + tail_bound(schedule, n + 1)
    return f + s2 / (n * math.log(n) ** 2)


# ----------------------------------------------------------------------
# Time grid
# ----------------------------------------------------------------------
def build_time_grid(
    schedule: StepSchedule,
    T_prime: float,
    n0: int = 0,
    max_epochs: Optional[int] = None,
    horizon: Optional[int] = None,
) -> TimeGrid:
    """
    Build t(n) and the epoch starts n_0 < n_1 < ... from ``n0``.

    :param schedule: Admissible schedule.
    :type schedule: StepSchedule

    :param T_prime: Target epoch length T' > 0.
    :type T_prime: float

    :param n0: First epoch start.
    :type n0: int

    :param max_epochs: Number of complete epochs required; all that fit when None.
    :type max_epochs: Optional[int]

    :param horizon: Last iteration index available; grown as needed when None.
    :type horizon: Optional[int]

    :raises HorizonExceeded: If the horizon cannot hold the requested epochs.
    :raises Inadmissible: If an epoch is longer than T' + c·a(0).

    :return: The grid.
    :rtype: TimeGrid
    """

    if T_prime <= 0:
        raise ValueError("T_prime must be positive")
    if horizon is None:
        if max_epochs is None:
            raise ValueError("either horizon or max_epochs is required")
        horizon = max(4 * n0, 1024)
        while True:
            grid = build_time_grid(schedule, T_prime, n0, None, horizon)
            if grid.epochs >= max_epochs or horizon >= MAX_SEARCH:
                break
            horizon *= 2
        return build_time_grid(schedule, T_prime, n0, max_epochs, horizon)

    if n0 > horizon:
        raise HorizonExceeded(f"n0={n0} lies beyond the horizon {horizon}")

    a = schedule.steps(np.arange(horizon + 1))
    t = np.cumsum(a)

    starts = [n0]
    while max_epochs is None or len(starts) <= max_epochs:
        nxt = int(np.searchsorted(t, t[starts[-1]] + T_prime, side="left"))
        if nxt > horizon:
            break
        starts.append(nxt)

    if max_epochs is not None and len(starts) - 1 < max_epochs:
        raise HorizonExceeded(f"only {len(starts) - 1} of {max_epochs} epochs fit in horizon {horizon}")

    n_k = np.asarray(starts, dtype=np.int64)
    T = T_prime + schedule.c * float(a[0])
    lengths = np.diff(t[n_k])
    if lengths.size and np.max(lengths) > T * (1.0 + 1e-12):
        raise Inadmissible([f"epoch length {float(np.max(lengths)):.6g} exceeds T={T:.6g}"])

    b = np.asarray([tail_bound(schedule, int(n)) for n in n_k], dtype=float)
    return TimeGrid(a=a, t=t, T_prime=T_prime, T=T, n_k=n_k, b=b, c=schedule.c, schedule=schedule)
