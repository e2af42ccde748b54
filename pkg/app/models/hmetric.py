# app/models/hmetric.py

"""
Lyapunov-weighted metric attached to a gossip model.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HMetric:
    """
    Solution H of QᵀHQ − H = −I with the derived constants.

    :param H: Symmetric positive definite M×M matrix.
    :type H: np.ndarray

    :param alpha: Contraction factor sqrt(1 − 1/λ_max) of Q in the H-norm.
    :type alpha: float

    :param lambda_max: Largest eigenvalue of H.
    :type lambda_max: float

    :param lambda_min: Smallest eigenvalue of H (equal to 1 because Q1 = 0).
    :type lambda_min: float

    :param Lambda: Eigenvalue ratio λ_max/λ_min.
    :type Lambda: float

    :param Pi_H_norm: Induced H-norm of Π.
    :type Pi_H_norm: float

    :param I_minus_Pi_H_norm: Induced H-norm of I − Π.
    :type I_minus_Pi_H_norm: float

    :param residual: Frobenius residual of the Lyapunov equation.
    :type residual: float

    :param iterations: Fixed-point iterations used.
    :type iterations: int
    """

    H: np.ndarray
    alpha: float
    lambda_max: float
    lambda_min: float
    Lambda: float
    Pi_H_norm: float
    I_minus_Pi_H_norm: float
    residual: float
    iterations: int

    @property
    def M(self) -> int:
        return int(self.H.shape[0])

    def lift_norm(self, x: np.ndarray) -> float:
        """‖1xᵀ‖_H = sqrt(1ᵀH1)·‖x‖₂."""
        ones = np.ones(self.M)
        return float(np.sqrt(ones @ self.H @ ones) * np.linalg.norm(np.atleast_1d(x)))
