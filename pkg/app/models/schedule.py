# app/models/schedule.py

"""
Step schedules and the epoch time grid built on top of them.

The kinds below cover the usual decreasing stepsize families:

- ``harmonic``       a(n) = scale / (shift + n)
- ``log_harmonic``   a(n) = scale / (shift + n·log(max(n, 2)))
- ``power``          a(n) = scale / (shift + n)^γ
- ``shifted_power``  a(n) = scale / (shift + n^γ)
- ``constant``       a(n) = value
- ``table``          a(n) = table[n] (finite horizon)

With the default ``scale = shift = 1`` the first four give 1/(1+n),
1/(1+n·log(n∨2)), 1/(1+n)^γ and 1/(1+n^γ).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np

from app.core.exceptions import HorizonExceeded


ScheduleKind = Literal["harmonic", "log_harmonic", "power", "shifted_power", "constant", "table"]
Verdict = Literal["pass", "fail", "unverified"]


@dataclass(frozen=True)
class StepSchedule:
    """
    Stepsize sequence a(n), n ≥ 0.

    :param kind: Schedule family.
    :type kind: ScheduleKind

    :param gamma: Exponent for the power families.
    :type gamma: float

    :param scale: Numerator of the decreasing families.
    :type scale: float

    :param shift: Offset of the decreasing families.
    :type shift: float

    :param value: Step of the constant kind.
    :type value: float

    :param table: Explicit steps of the table kind.
    :type table: Tuple[float, ...]

    :param c: Quasi-monotonicity constant, a(m) ≤ c·a(n) for m ≥ n.
    :type c: float

    :param C_star: Declared window constant; measured when None.
    :type C_star: Optional[float]
    """

    kind: ScheduleKind = "harmonic"
    gamma: float = 1.0
    scale: float = 1.0
    shift: float = 1.0
    value: float = 0.1
    table: Tuple[float, ...] = ()
    c: float = 1.0
    C_star: Optional[float] = None

    @property
    def horizon_limit(self) -> Optional[int]:
        """Last index with a defined step, or None for unbounded kinds."""
        return len(self.table) - 1 if self.kind == "table" else None

    @property
    def vanishes(self) -> bool:
        """True when a(n) → 0 is known from the kind alone."""
        if self.kind == "constant":
            return self.value == 0.0
        if self.kind == "table":
            return False
        return self.gamma > 0 if self.kind in ("power", "shifted_power") else True

    def steps(self, n: Union[int, np.ndarray]) -> np.ndarray:
        """
        Evaluate a(n) for an index or an array of indices.

        :raises HorizonExceeded: If a table schedule is read past its end.
        """

        idx = np.asarray(n, dtype=np.int64)
        if np.any(idx < 0):
            raise ValueError("step index must be non-negative")
        x = idx.astype(float)

        if self.kind == "harmonic":
            out = self.scale / (self.shift + x)
        elif self.kind == "log_harmonic":
            out = self.scale / (self.shift + x * np.log(np.maximum(x, 2.0)))
        elif self.kind == "power":
            out = self.scale / (self.shift + x) ** self.gamma
        elif self.kind == "shifted_power":
            out = self.scale / (self.shift + x ** self.gamma)
        elif self.kind == "constant":
            out = np.full(x.shape, float(self.value))
        else:
            table = np.asarray(self.table, dtype=float)
            if idx.size and int(idx.max()) >= table.size:
                raise HorizonExceeded(
                    f"table schedule defines {table.size} steps, index {int(idx.max())} requested"
                )
            out = table[idx]
        return np.asarray(out, dtype=float)

    def a(self, n: int) -> float:
        return float(self.steps(n))


@dataclass(frozen=True)
class ScheduleReport:
    """
    Per-condition admissibility verdicts.

    :param verdicts: Condition name → ("pass" | "fail" | "unverified", detail).
    :type verdicts: Dict[str, Tuple[Verdict, str]]

    :param C_star: Window constant used (declared or measured ×1.1).
    :type C_star: float

    :param horizon: Horizon the empirical checks ran over.
    :type horizon: int
    """

    verdicts: Dict[str, Tuple[Verdict, str]]
    C_star: float
    horizon: int

    @property
    def violations(self) -> List[str]:
        return [name for name, (verdict, _) in self.verdicts.items() if verdict == "fail"]

    @property
    def admissible(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class TimeGrid:
    """
    Cumulative algorithmic time and its epoch partition.

    ``t[n] = a(0) + ... + a(n)``; epochs start at ``n_k[k]`` with
    ``n_k[k] = min{n : t(n) ≥ t(n_k[k-1]) + T'}``.

    :param a: Step values a(0..horizon).
    :type a: np.ndarray

    :param t: Cumulative times t(0..horizon).
    :type t: np.ndarray

    :param T_prime: Target epoch length T'.
    :type T_prime: float

    :param T: Epoch length bound T' + c·a(0).
    :type T: float

    :param n_k: Epoch start indices (the last entry closes the last epoch).
    :type n_k: np.ndarray

    :param b: Conservative tail sums b(n) ≥ Σ_{m≥n} a(m)² at each n_k.
    :type b: np.ndarray

    :param c: Quasi-monotonicity constant of the schedule.
    :type c: float
    """

    a: np.ndarray
    t: np.ndarray
    T_prime: float
    T: float
    n_k: np.ndarray
    b: np.ndarray
    c: float
    schedule: StepSchedule = field(repr=False, compare=False, default=StepSchedule())

    @property
    def horizon(self) -> int:
        return int(self.t.size - 1)

    @property
    def epochs(self) -> int:
        """Number of complete epochs."""
        return int(self.n_k.size - 1)

    @property
    def upsilon(self) -> np.ndarray:
        """Epoch lengths in iterations, υ_k = n_{k+1} − n_k."""
        return np.diff(self.n_k)

    @property
    def T_m(self) -> np.ndarray:
        """Epoch start times t(n_k)."""
        return self.t[self.n_k]

    def interval(self, k: int) -> Tuple[float, float]:
        """Time interval I_k = [T_k, T_{k+1}]."""
        return float(self.t[self.n_k[k]]), float(self.t[self.n_k[k + 1]])

    def window_constant(self) -> float:
        """
        Measured constant C* with υ_k ≤ C*·n_k, inflated by 10%.

        Epochs starting at n_k = 0 are skipped (the bound is vacuous there).
        """

        starts = self.n_k[:-1]
        mask = starts > 0
        if not np.any(mask):
            return float("nan")
        return 1.1 * float(np.max(self.upsilon[mask] / starts[mask]))

    def epoch_of(self, n: int) -> int:
        """Index k of the epoch containing iteration n."""
        return int(np.searchsorted(self.n_k, n, side="right") - 1)
