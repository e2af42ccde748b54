# app/models/run.py

"""
Simulated trajectories and their ODE reference segments.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RunRecord:
    """
    One replica of the distributed iteration.

    ``noise[n]`` is the draw M̃(n+1) that produced ``X[n+1]`` from ``X[n]``.

    :param X: Iterates X(0..n), shape (n+1, M, d).
    :type X: np.ndarray

    :param noise: Noise draws, shape (n, M, d).
    :type noise: np.ndarray

    :param a: Steps a(0..n-1) used by the recorded transitions.
    :type a: np.ndarray

    :param seed: Seed of the replica's generator.
    :type seed: int

    :param bounded: False when the run hit the boundedness cap and was truncated.
    :type bounded: bool

    :param replica: Replica index within its experiment.
    :type replica: int
    """

    X: np.ndarray
    noise: np.ndarray
    a: np.ndarray
    seed: int
    bounded: bool
    replica: int = 0

    @property
    def n_steps(self) -> int:
        return int(self.noise.shape[0])

    @property
    def M(self) -> int:
        return int(self.X.shape[1])

    @property
    def d(self) -> int:
        return int(self.X.shape[2])


@dataclass(frozen=True)
class ReferenceSegment:
    """
    ODE solution x^{T_k} over the epoch interval I_k.

    :param k: Epoch index.
    :type k: int

    :param n_start: First iteration index of the epoch.
    :type n_start: int

    :param knot_times: t(n) for n = n_k .. n_{k+1}.
    :type knot_times: np.ndarray

    :param knot_values: x^{T_k} at the knots, shape (υ_k + 1, d).
    :type knot_values: np.ndarray

    :param mid_times: Midpoints between consecutive knots.
    :type mid_times: np.ndarray

    :param mid_values: x^{T_k} at the midpoints, shape (υ_k, d).
    :type mid_values: np.ndarray
    """

    k: int
    n_start: int
    knot_times: np.ndarray
    knot_values: np.ndarray
    mid_times: np.ndarray
    mid_values: np.ndarray

    @property
    def initial(self) -> np.ndarray:
        return self.knot_values[0]

    @property
    def n_end(self) -> int:
        return self.n_start + int(self.knot_times.size) - 1

    def lifted(self, M: int, values: np.ndarray) -> np.ndarray:
        """Lift points shaped (..., d) to consensus arrays shaped (..., M, d)."""
        values = np.asarray(values, dtype=float)
        return np.broadcast_to(values[..., None, :], values.shape[:-1] + (M, values.shape[-1]))
