# app/core/gossip.py

"""
Gossip matrix validation and consensus decomposition.

Provides:
- ``validate_gossip``: checks stochasticity, strong connectivity of the
  support graph and the spectral condition on Q = P − Π
- ``stationary_distribution``: π with πᵀP = πᵀ
- named generators for the shipped configs
"""

import logging

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from app.core.exceptions import (
    DimensionMismatch,
    NoConvergence,
    NotStochastic,
    Reducible,
    SpectralViolation,
)
from app.models.gossip_model import GossipModel


logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
SPECTRAL_MARGIN = 1e-10
STATIONARY_TOL = 1e-12
STATIONARY_CHECK_TOL = 1e-10
DIRECT_SOLVE_MAX_M = 64
POWER_ITERATION_CAP = 1_000_000


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """
    Stationary distribution of an irreducible stochastic matrix.

    Direct solve of (Pᵀ − I)π = 0 with the normalisation row for M ≤ 64;
    above that, power iteration on the lazy chain (P + I)/2, which has the
    same stationary vector and is aperiodic.

    :param P: Validated row-stochastic, irreducible matrix.
    :type P: np.ndarray

    :raises NoConvergence: If the residual ‖πᵀP − πᵀ‖_∞ stays above 1e−12.

    :return: Probability vector π with strictly positive entries.
    :rtype: np.ndarray
    """

    P = np.asarray(P, dtype=float)
    M = P.shape[0]

    if M <= DIRECT_SOLVE_MAX_M:
        A = P.T - np.eye(M)
        A[-1, :] = 1.0
        rhs = np.zeros(M)
        rhs[-1] = 1.0
        try:
            pi = linalg.solve(A, rhs)
        except linalg.LinAlgError as exc:
            raise NoConvergence(f"stationary solve failed: {exc}") from exc
    else:
        lazy = 0.5 * (P + np.eye(M))
        pi = np.full(M, 1.0 / M)
        for iteration in range(POWER_ITERATION_CAP):
            nxt = pi @ lazy
            if np.max(np.abs(nxt - pi)) <= STATIONARY_TOL:
                pi = nxt
                break
            pi = nxt
        else:
            raise NoConvergence("power iteration for the stationary distribution hit its cap")
        logger.debug("power iteration converged after %d steps", iteration + 1)

    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = float(np.max(np.abs(pi @ P - pi)))
    if residual > STATIONARY_CHECK_TOL:
        logger.warning("stationary residual %.3e above tolerance", residual)
        raise NoConvergence(f"stationary residual {residual:.3e} above tolerance")
    return pi


def validate_gossip(P) -> GossipModel:
    """
    Validate a gossip matrix and build its consensus decomposition.

    :param P: Square matrix (nested lists or array).
    :type P: array-like

    :raises DimensionMismatch: If P is not a non-empty square matrix.
    :raises NotStochastic: On a negative entry or a row sum off by more than 1e−12.
    :raises Reducible: If the support graph is not strongly connected.
    :raises SpectralViolation: If some eigenvalue of Q has magnitude ≥ 1 − 1e−10.

    :return: The validated model.
    :rtype: GossipModel
    """

    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise DimensionMismatch(f"gossip matrix must be square and non-empty, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise NotStochastic("gossip matrix has non-finite entries")
    M = P.shape[0]

    negative = np.argwhere(P < 0)
    if negative.size:
        i, j = negative[0]
        raise NotStochastic(f"negative entry P[{i}][{j}] = {P[i, j]}")
    sums = P.sum(axis=1)
    bad_rows = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad_rows.size:
        row = int(bad_rows[0])
        raise NotStochastic(f"row {row} sums to {sums[row]!r}, expected 1")

    n_components, _ = connected_components(P > 0, directed=True, connection="strong")
    if n_components > 1:
        raise Reducible(f"support graph has {n_components} strongly connected components")

    pi = stationary_distribution(P)
    Pi = np.outer(np.ones(M), pi)
    Q = P - Pi

    eigenvalues = linalg.eigvals(Q)
    worst = int(np.argmax(np.abs(eigenvalues)))
    radius = float(np.abs(eigenvalues[worst]))
    if radius >= 1.0 - SPECTRAL_MARGIN:
        raise SpectralViolation(
            f"Q has eigenvalue {complex(eigenvalues[worst]):.6g} with magnitude {radius:.12g} >= 1"
        )

    return GossipModel(M=M, P=P, pi=pi, Pi=Pi, Q=Q, spectral_radius=radius)


# ----------------------------------------------------------------------
# Named generators
# ----------------------------------------------------------------------
def complete(M: int) -> np.ndarray:
    """Uniform averaging over all nodes."""
    return np.full((M, M), 1.0 / M)


def lazy_ring(M: int) -> np.ndarray:
    """Each node keeps half its value and takes half from its successor."""
    if M == 1:
        return np.ones((1, 1))
    P = 0.5 * np.eye(M)
    P[np.arange(M), (np.arange(M) + 1) % M] += 0.5
    return P


def random_primitive(M: int, seed: int = 0, density: float = 0.5) -> np.ndarray:
    """
    Random primitive stochastic matrix.

    Self loops make the chain aperiodic and the directed ring makes it
    irreducible; extra edges are added with probability ``density``.
    """

    rng = np.random.default_rng(seed)
    support = rng.random((M, M)) < density
    support[np.arange(M), np.arange(M)] = True
    support[np.arange(M), (np.arange(M) + 1) % M] = True
    weights = np.where(support, rng.uniform(0.1, 1.0, size=(M, M)), 0.0)
    return weights / weights.sum(axis=1, keepdims=True)


GENERATORS = {
    "complete": complete,
    "lazy_ring": lazy_ring,
    "random_primitive": random_primitive,
}
