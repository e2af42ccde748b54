# app/models/gossip_model.py

"""
Validated gossip matrix and its consensus decomposition.

Instances are produced by ``app.core.gossip.validate_gossip`` only; they are
immutable and safe to share read-only across replica workers.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GossipModel:
    """
    Row-stochastic gossip matrix with its stationary decomposition.

    :param M: Number of nodes.
    :type M: int

    :param P: Row-stochastic weight matrix (M×M).
    :type P: np.ndarray

    :param pi: Stationary distribution, ``pi @ P == pi``.
    :type pi: np.ndarray

    :param Pi: Consensus projector ``1 pi^T``.
    :type Pi: np.ndarray

    :param Q: Disagreement matrix ``P - Pi``.
    :type Q: np.ndarray

    :param spectral_radius: Largest eigenvalue magnitude of Q.
    :type spectral_radius: float
    """

    M: int
    P: np.ndarray
    pi: np.ndarray
    Pi: np.ndarray
    Q: np.ndarray
    spectral_radius: float

    @property
    def is_doubly_stochastic(self) -> bool:
        return bool(np.allclose(self.P.sum(axis=0), 1.0, atol=1e-12))

    def consensus(self, X: np.ndarray) -> np.ndarray:
        """Return ΠX, every row replaced by the π-average."""
        return self.Pi @ X

    def average(self, X: np.ndarray) -> np.ndarray:
        """Return the π-weighted row average πᵀX."""
        return self.pi @ X
