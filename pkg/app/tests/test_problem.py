# app/tests/test_problem.py

"""
Problem Construction Tests
--------------------------

Covers the derived attractor data (Δ, δ, τ, C_T), the certified constants
and the sampled assumption checks of the shipped problems.
"""

from typing import Callable

import numpy as np
import pytest

from app.core.exceptions import DimensionMismatch, NonPositiveMargin
from app.core.hnorm import batch_h_norm, metric_for
from app.models import DoubleWellDrift, QuadraticLyapunov, Region
from app.services.problem_service import ProblemService


def test_linear_problem_attractor_data(make_linear_problem: Callable) -> None:
    """
    Test Δ, δ and τ of the two-node linear problem.

    Steps:
    1. Build the problem with ε = 0.125 and a ball of radius 0.5 around the equilibrium.
    2. Assert the equilibrium is the π-average of θ.
    3. Assert Δ > 0, δ = 1/32 (the first dyadic rung passing both conditions).
    4. Assert τ = 3(max V − ε)/Δ·(T + 1) with max V = 0.25.

    :param make_linear_problem: Problem factory.
    :type make_linear_problem: Callable

    :return: None
    """

    problem = make_linear_problem()
    attractor = problem.attractor

    np.testing.assert_allclose(attractor.center, [1.0])
    assert attractor.Delta > 0
    assert attractor.delta == pytest.approx(1.0 / 32.0)
    assert attractor.max_V == pytest.approx(0.25)
    assert attractor.tau == pytest.approx(3.0 * (0.25 - 0.125) / attractor.Delta * (problem.T + 1.0))
    assert attractor.B_breve.radius == pytest.approx(0.5 + attractor.delta)


def test_linear_problem_constants(make_linear_problem: Callable) -> None:
    """
    Test the certified constants on the complete graph (H = I).

    :return: None
    """

    problem = make_linear_problem()
    constants = problem.constants

    assert constants.L == pytest.approx(1.0)
    assert constants.K1 == pytest.approx(1.0 + np.sqrt(0.81 + 1.21))
    assert constants.K2 == pytest.approx(0.05 * np.sqrt(2.0))
    assert constants.kappa == 1.0
    assert constants.C == pytest.approx(np.exp(0.05 * (1.0 + problem.attractor.K5)))


def test_linear_lipschitz_constant_is_one_off_the_complete_graph(
    make_linear_problem: Callable, make_gossip: Callable,
) -> None:
    """
    Test L = 1 for the linear drift when H is not the identity.

    Steps:
    1. Build the linear problem on the lazy ring with three nodes (Λ > 1).
    2. Assert L is exactly 1 and the sampled ratio reaches it.
    3. Assert the double well still scales its row constant by sqrt(Λ).

    :return: None
    """

    gossip = make_gossip("lazy_ring", 3)
    problem = make_linear_problem(gossip=gossip, theta=((0.9,), (1.0,), (1.1,)))

    assert problem.hmetric.Lambda > 1.0
    assert problem.constants.L == 1.0
    assert ProblemService.lipschitz_check(problem) == pytest.approx(1.0, rel=1e-9)

    well = DoubleWellDrift(np.zeros((3, 1)))
    region = Region.box(np.array([0.2]), np.array([1.8]))
    assert well.h_lipschitz(region, problem.hmetric) == pytest.approx(
        well.row_lipschitz(region) * np.sqrt(problem.hmetric.Lambda)
    )


def test_noise_respects_growth_bound(make_linear_problem: Callable, make_gossip: Callable) -> None:
    """
    Test ‖M̃‖_H ≤ K2(1 + ‖X‖₂) on draws of the sampler the engine uses.

    :return: None
    """

    problem = make_linear_problem(gossip=make_gossip("lazy_ring", 3), theta=((0.9,), (1.0,), (1.1,)))
    rng = np.random.default_rng(1)
    K2 = problem.constants.K2

    for state in (problem.initial, np.zeros((3, 1)), np.array([[3.0], [-2.0], [0.5]])):
        draws = np.stack([ProblemService.sample_noise(problem.noise, state, rng) for _ in range(2000)])
        norms = batch_h_norm(draws, problem.hmetric)
        assert np.all(norms <= K2 * (1.0 + np.linalg.norm(state)) * (1.0 + 1e-12))


def test_noise_moment_check_uses_the_engine_sampler(
    make_linear_problem: Callable, monkeypatch: pytest.MonkeyPatch,
) -> None:
    """
    Test that the moment check draws through ProblemService.sample_noise.

    :return: None
    """

    problem = make_linear_problem()
    calls = []
    original = ProblemService.sample_noise

    def counting(noise, state, rng):
        calls.append(state.shape)
        return original(noise, state, rng)

    monkeypatch.setattr(ProblemService, "sample_noise", staticmethod(counting))

    moments = ProblemService.noise_moment_check(problem, draws=500)

    assert len(calls) == 500
    assert calls[0] == (problem.M, problem.d)
    assert moments["mgf"] <= moments["C"]


def test_C_T_is_inflated_initial_maximum(make_linear_problem: Callable) -> None:
    """
    Test C_T for a contracting linear flow.

    The drift norm along each trajectory decreases, so the maximum is
    attained at t = 0 on the grid of B̆.

    :return: None
    """

    problem = make_linear_problem()
    points = problem.attractor.B_breve.grid(17)
    lifted = np.broadcast_to(points[:, None, :], (points.shape[0], 2, 1))
    peak = float(np.max(np.linalg.norm(problem.drift(lifted).reshape(points.shape[0], -1), axis=-1)))

    assert problem.C_T == pytest.approx(1.1 * peak, rel=1e-9)


def test_sampled_checks_pass(make_linear_problem: Callable, make_gossip: Callable) -> None:
    """
    Test the Lipschitz, growth, descent and noise checks on a lazy ring.

    Steps:
    1. Build the linear problem on the lazy ring with three nodes.
    2. Assert the Lipschitz and growth ratios are at most 1.
    3. Assert ⟨∇V, h̄⟩ ≤ 0 outside A^ε.
    4. Assert the noise has zero mean and E exp(κ|M|) ≤ C.

    :return: None
    """

    problem = make_linear_problem(gossip=make_gossip("lazy_ring", 3), theta=((0.9,), (1.0,), (1.1,)))

    assert ProblemService.lipschitz_check(problem) <= 1.0 + 1e-9
    assert ProblemService.growth_sample_check(problem) <= 1.0
    assert ProblemService.descent_check(problem) <= 0.0

    moments = ProblemService.noise_moment_check(problem, draws=20_000)
    assert moments["mean_ok"]
    assert moments["mgf"] <= moments["C"]


def test_double_well_problem(make_gossip: Callable) -> None:
    """
    Test the double well around its right equilibrium.

    Steps:
    1. Build the problem with zero offsets; the right equilibrium is x = 1.
    2. Assert Δ and δ are positive and the row Lipschitz constant is the slope bound on B̆.

    :return: None
    """

    gossip = make_gossip()
    problem = ProblemService.build_double_well(
        gossip, metric_for(gossip), np.zeros((2, 1)), 0.05, 0.01, 1.2, resolution=17,
    )

    np.testing.assert_allclose(problem.attractor.center, [1.0], atol=1e-9)
    assert problem.attractor.Delta > 0
    assert problem.attractor.delta > 0
    hi = 1.8 + problem.attractor.delta
    assert problem.constants.L_row == pytest.approx(3.0 * hi ** 2 - 1.0)
    assert ProblemService.lipschitz_check(problem) <= 1.0 + 1e-9


def test_empty_exterior_is_rejected(make_linear_problem: Callable) -> None:
    """
    Test NonPositiveMargin when A^ε covers the whole entry region.

    :return: None
    """

    with pytest.raises(NonPositiveMargin):
        make_linear_problem(epsilon=1.0)


def test_row_count_must_match_gossip(make_linear_problem: Callable) -> None:
    with pytest.raises(DimensionMismatch):
        make_linear_problem(theta=((0.9,), (1.0,), (1.1,)))


def test_select_delta_respects_containment() -> None:
    """
    Test that δ keeps N^δ(A^ε) inside the region.

    Steps:
    1. Take V centred in a ball of radius 1 and ε = 0.25 (A^ε has radius 0.5).
    2. Select δ with a generous margin so only containment binds.
    3. Assert 0.5 + δ ≤ 1.

    :return: None
    """

    V = QuadraticLyapunov(np.zeros(2))
    region = Region.ball(np.zeros(2), 1.0)

    delta = ProblemService.select_delta(V, region, 0.25, Delta=100.0, resolution=9)

    assert 0.0 < delta <= 0.5


def test_trapping_time_formula() -> None:
    assert ProblemService.trapping_time(1.0, 0.25, 0.5, 2.0) == pytest.approx(3.0 * 0.75 / 0.5 * 3.0)
    assert ProblemService.trapping_time(0.1, 0.25, 0.5, 2.0) == 0.0

    with pytest.raises(NonPositiveMargin):
        ProblemService.trapping_time(1.0, 0.25, 0.0, 2.0)


def test_averaged_drift_weights_nodes(make_gossip: Callable) -> None:
    """
    Test h̄(x) = Σ_j π(j)h^j(x) for a non-uniform π.

    :return: None
    """

    gossip = make_gossip(matrix=[[0.9, 0.1], [0.2, 0.8]])
    problem = ProblemService.build_linear(
        gossip, metric_for(gossip), np.array([[0.0], [3.0]]), 0.0, 0.125, 1.5, radius=0.5, resolution=9,
    )

    value = ProblemService.averaged_drift(problem.drift, np.array([0.0]), gossip.pi)

    np.testing.assert_allclose(value, [1.0], atol=1e-12)
    np.testing.assert_allclose(problem.attractor.center, [1.0], atol=1e-12)
