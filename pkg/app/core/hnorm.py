# app/core/hnorm.py

"""
Lyapunov-weighted norms.

H solves the discrete Lyapunov (Stein) equation QᵀHQ − H = −I. Under
‖x‖_H = sqrt(xᵀHx) the disagreement matrix Q is a contraction with factor
α = sqrt(1 − 1/λ_max(H)). Arrays G of shape M×d are measured with
‖G‖_H = sqrt(tr(GᵀHG)), i.e. column by column.
"""

import logging
from typing import Optional, Tuple, Union

import numpy as np
from scipy import linalg

from app.core.exceptions import DimensionMismatch, NoConvergence
from app.models.gossip_model import GossipModel
from app.models.hmetric import HMetric


logger = logging.getLogger(__name__)

LYAPUNOV_TOL = 1e-12
LYAPUNOV_MAX_ITER = 100_000


def _matrix(H: Union[HMetric, np.ndarray]) -> np.ndarray:
    return H.H if isinstance(H, HMetric) else np.asarray(H, dtype=float)


def induced_h_norm(A: np.ndarray, H: Union[HMetric, np.ndarray]) -> float:
    """
    Operator norm of A under ‖·‖_H: spectral norm of H^{1/2} A H^{−1/2}.

    :param A: Square M×M matrix.
    :type A: np.ndarray

    :param H: Weight matrix or metric.
    :type H: HMetric | np.ndarray

    :return: The induced norm.
    :rtype: float
    """

    weights, vectors = linalg.eigh(_matrix(H))
    root = (vectors * np.sqrt(weights)) @ vectors.T
    inv_root = (vectors / np.sqrt(weights)) @ vectors.T
    return float(np.linalg.norm(root @ A @ inv_root, 2))


def contraction_factor(H: Union[HMetric, np.ndarray]) -> float:
    """
    Contraction factor α = sqrt(1 − 1/λ_max(H)).

    :param H: Solved Lyapunov matrix.
    :type H: HMetric | np.ndarray

    :return: α in [0, 1).
    :rtype: float
    """

    lambda_max = float(linalg.eigvalsh(_matrix(H))[-1])
    return float(np.sqrt(max(0.0, 1.0 - 1.0 / lambda_max)))


def solve_discrete_lyapunov(
    Q: np.ndarray,
    Pi: Optional[np.ndarray] = None,
    tol: float = LYAPUNOV_TOL,
    max_iter: int = LYAPUNOV_MAX_ITER,
) -> HMetric:
    """
    Solve QᵀHQ − H = −I by the fixed-point iteration H ← QᵀHQ + I from H = I.

    :param Q: Disagreement matrix with spectral radius below 1.
    :type Q: np.ndarray

    :param Pi: Consensus projector, needed for ‖Π‖_H and ‖I − Π‖_H
               (NaN when omitted).
    :type Pi: Optional[np.ndarray]

    :param tol: Stop when ‖QᵀHQ − H + I‖_F ≤ tol.
    :type tol: float

    :param max_iter: Iteration cap.
    :type max_iter: int

    :raises NoConvergence: If the residual does not fall below ``tol``.

    :return: The metric with α, extreme eigenvalues and induced norms.
    :rtype: HMetric
    """

    Q = np.asarray(Q, dtype=float)
    M = Q.shape[0]
    identity = np.eye(M)
    H = identity.copy()

    for iteration in range(1, max_iter + 1):
        nxt = Q.T @ H @ Q + identity
        step = float(np.linalg.norm(nxt - H, "fro"))
        H = nxt
        if step <= tol:
            break
    else:
        logger.warning("Lyapunov iteration stopped at cap %d with step %.3e", max_iter, step)
        raise NoConvergence(f"Lyapunov iteration did not reach {tol:g} in {max_iter} iterations")

    H = 0.5 * (H + H.T)
    residual = float(np.linalg.norm(Q.T @ H @ Q - H + identity, "fro"))
    logger.debug("Lyapunov solve: %d iterations, residual %.3e", iteration, residual)

    eigenvalues = linalg.eigvalsh(H)
    lambda_min, lambda_max = float(eigenvalues[0]), float(eigenvalues[-1])

    if Pi is None:
        pi_norm = float("nan")
        rest_norm = float("nan")
    else:
        pi_norm = induced_h_norm(Pi, H)
        rest_norm = induced_h_norm(identity - Pi, H)

    return HMetric(
        H=H,
        alpha=contraction_factor(H),
        lambda_max=lambda_max,
        lambda_min=lambda_min,
        Lambda=lambda_max / lambda_min,
        Pi_H_norm=pi_norm,
        I_minus_Pi_H_norm=rest_norm,
        residual=residual,
        iterations=iteration,
    )


def metric_for(gossip: GossipModel) -> HMetric:
    """Solve the Lyapunov equation for a validated gossip model."""
    return solve_discrete_lyapunov(gossip.Q, gossip.Pi)


def h_norm(G: np.ndarray, H: Union[HMetric, np.ndarray]) -> float:
    """
    ‖G‖_H = sqrt(tr(GᵀHG)); for a vector this is sqrt(xᵀHx).

    :param G: Vector of length M or array with M rows.
    :type G: np.ndarray

    :param H: Weight matrix or metric.
    :type H: HMetric | np.ndarray

    :raises DimensionMismatch: If G does not have M rows.

    :return: The norm.
    :rtype: float
    """

    weight = _matrix(H)
    G = np.asarray(G, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    if G.shape[0] != weight.shape[0]:
        raise DimensionMismatch(f"array has {G.shape[0]} rows, metric expects {weight.shape[0]}")
    value = float(np.einsum("ij,ik,kj->", G, weight, G))
    return float(np.sqrt(max(value, 0.0)))


def batch_h_norm(G: np.ndarray, H: Union[HMetric, np.ndarray]) -> np.ndarray:
    """‖·‖_H of a stack of arrays shaped (..., M, d)."""
    weight = _matrix(H)
    values = np.einsum("...ij,ik,...kj->...", G, weight, G)
    return np.sqrt(np.maximum(values, 0.0))


def frobenius_entry_bound(G: np.ndarray, hmetric: HMetric) -> Tuple[float, float]:
    """
    Evaluate both ends of ‖G‖_H ≤ sqrt(Λ(H))‖G‖_F ≤ sqrt(Λ(H)·M·d)·max|G_ij|.

    :param G: M×d array.
    :type G: np.ndarray

    :param hmetric: Solved metric.
    :type hmetric: HMetric

    :raises ArithmeticError: If the chain fails numerically.

    :return: (‖G‖_H, sqrt(Λ(H)·M·d)·max|G_ij|).
    :rtype: Tuple[float, float]
    """

    G = np.asarray(G, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    left = h_norm(G, hmetric)
    if G.size == 0:
        return left, 0.0
    M, d = G.shape
    right = float(np.sqrt(hmetric.Lambda * M * d) * np.max(np.abs(G)))
    if left > right * (1.0 + 1e-12) + 1e-15:
        raise ArithmeticError(f"H-norm {left:.17g} exceeds entry bound {right:.17g}")
    return left, right
