# app/tests/test_gossip.py

"""
Gossip Matrix Tests
-------------------

Covers ``validate_gossip`` and the stationary distribution:

1. Consensus decomposition of valid matrices
2. Rejection of non-stochastic, reducible and periodic matrices
3. Named generators
4. Power iteration path for large chains
"""

import numpy as np
import pytest

from app.core import gossip as gossip_core
from app.core.exceptions import DimensionMismatch, NotStochastic, Reducible, SpectralViolation


def test_complete_averaging_has_zero_disagreement_matrix() -> None:
    """
    Test the decomposition of uniform averaging.

    Steps:
    1. Validate P = [[0.5, 0.5], [0.5, 0.5]].
    2. Assert π = (0.5, 0.5), Π = P and Q = 0.

    :return: None
    """

    model = gossip_core.validate_gossip([[0.5, 0.5], [0.5, 0.5]])

    np.testing.assert_allclose(model.pi, [0.5, 0.5])
    np.testing.assert_allclose(model.Pi, model.P)
    np.testing.assert_allclose(model.Q, np.zeros((2, 2)), atol=1e-15)
    assert model.spectral_radius < 1e-12


def test_non_symmetric_chain_stationary_distribution() -> None:
    """
    Test π for a two-state chain with unequal switching rates.

    Steps:
    1. Validate P = [[0.9, 0.1], [0.2, 0.8]].
    2. Assert π = (2/3, 1/3) and πᵀP = πᵀ.
    3. Assert Q has spectral radius 0.7.

    :return: None
    """

    model = gossip_core.validate_gossip([[0.9, 0.1], [0.2, 0.8]])

    np.testing.assert_allclose(model.pi, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)
    np.testing.assert_allclose(model.pi @ model.P, model.pi, atol=1e-12)
    assert model.spectral_radius == pytest.approx(0.7, abs=1e-12)
    assert not model.is_doubly_stochastic


def test_consensus_projector_is_fixed_by_gossip() -> None:
    """
    Test ΠP = PΠ = Π and Q·1 = 0.

    :return: None
    """

    model = gossip_core.validate_gossip(gossip_core.random_primitive(6, seed=3))

    np.testing.assert_allclose(model.Pi @ model.P, model.Pi, atol=1e-12)
    np.testing.assert_allclose(model.P @ model.Pi, model.Pi, atol=1e-12)
    np.testing.assert_allclose(model.Q @ np.ones(6), np.zeros(6), atol=1e-12)


def test_periodic_matrix_is_rejected() -> None:
    """
    Test that the swap matrix fails the spectral condition.

    Steps:
    1. Validate P = [[0, 1], [1, 0]].
    2. Assert SpectralViolation naming an eigenvalue of magnitude 1.

    :return: None
    """

    with pytest.raises(SpectralViolation) as excinfo:
        gossip_core.validate_gossip([[0.0, 1.0], [1.0, 0.0]])

    assert "magnitude 1" in excinfo.value.detail


def test_row_sum_violation_is_rejected() -> None:
    """
    Test NotStochastic on a row summing to 1.1.

    :return: None
    """

    with pytest.raises(NotStochastic) as excinfo:
        gossip_core.validate_gossip([[0.6, 0.5], [0.5, 0.5]])

    assert "row 0" in excinfo.value.detail


def test_negative_entry_is_rejected() -> None:
    with pytest.raises(NotStochastic):
        gossip_core.validate_gossip([[1.2, -0.2], [0.5, 0.5]])


def test_disconnected_support_is_rejected() -> None:
    """
    Test Reducible on the identity, whose support graph has two components.

    :return: None
    """

    with pytest.raises(Reducible):
        gossip_core.validate_gossip(np.eye(2))


def test_non_square_matrix_is_rejected() -> None:
    with pytest.raises(DimensionMismatch):
        gossip_core.validate_gossip([[0.5, 0.5]])


@pytest.mark.parametrize("name", ["complete", "lazy_ring", "random_primitive"])
def test_named_generators_validate(name: str) -> None:
    """
    Test that every named generator produces a valid matrix.

    Steps:
    1. Build the generator for M = 5.
    2. Validate it and assert the stationary vector is a positive probability vector.

    :param name: Generator name.
    :type name: str

    :return: None
    """

    model = gossip_core.validate_gossip(gossip_core.GENERATORS[name](5))

    assert model.M == 5
    assert np.all(model.pi > 0)
    assert model.pi.sum() == pytest.approx(1.0, abs=1e-12)


def test_random_primitive_is_reproducible() -> None:
    first = gossip_core.random_primitive(8, seed=42)
    second = gossip_core.random_primitive(8, seed=42)

    np.testing.assert_array_equal(first, second)


def test_large_chain_uses_power_iteration() -> None:
    """
    Test π of a large lazy ring, computed by power iteration.

    Steps:
    1. Build the lazy ring on 80 nodes (above the direct-solve size).
    2. Assert π is uniform, the ring being doubly stochastic.

    :return: None
    """

    pi = gossip_core.stationary_distribution(gossip_core.lazy_ring(80))

    np.testing.assert_allclose(pi, np.full(80, 1.0 / 80), atol=1e-10)
