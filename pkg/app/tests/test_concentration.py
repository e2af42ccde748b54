# app/tests/test_concentration.py

"""
Concentration and Trapping Tests
--------------------------------

Covers the martingale tail bounds, the theorem lower bound, the Wilson
interval, trap membership and the Monte Carlo trapping estimate.
"""

import math
from typing import Callable

import numpy as np
import pytest

from app.core.config import settings
from app.core.exceptions import Divergent, InsufficientConditioning
from app.core.schedule import build_time_grid
from app.models import StepSchedule
from app.services.concentration_service import ConcentrationService
from app.services.problem_service import ProblemService


UNIT_HARMONIC = StepSchedule(kind="harmonic", scale=1.0, shift=1.0)


def _bound(n0: int = 0, delta_tilde: float = 1.0, schedule: StepSchedule = UNIT_HARMONIC) -> float:
    return ConcentrationService.theorem_bound(
        n0, schedule, M=1, d=1, C_star=1.0, D=1.0, delta_tilde=delta_tilde, kappa=1.0, C=10.0, T=1.0,
    ).raw


def test_azuma_tail_values() -> None:
    """
    Test the tails of four increments bounded by 1.

    Steps:
    1. Assert 2exp(−ε²/(2ΣA²)) at ε = 4 and its clamp to 1 at ε = 2.
    2. Assert the default D = 1/(2γ₁γ₂) = 1/8 with ω = max A = 1.

    :return: None
    """

    bounds = np.ones(4)

    far = ConcentrationService.azuma_tail(4.0, bounds)
    near = ConcentrationService.azuma_tail(2.0, bounds)

    assert far.azuma == pytest.approx(2.0 * math.exp(-2.0))
    assert near.azuma == 1.0
    assert far.quadratic == pytest.approx(2.0 * math.exp(-2.0))
    assert far.linear == 1.0


def test_azuma_tail_without_increments() -> None:
    tail = ConcentrationService.azuma_tail(0.5, np.zeros(0))

    assert (tail.azuma, tail.quadratic, tail.linear) == (0.0, 0.0, 0.0)


def test_theorem_bound_closed_form() -> None:
    """
    Test 1 − 2·Σ n·e^{−(1+n)} for a(n) = 1/(1+n) and E = 1.

    :return: None
    """

    expected = 1.0 - 2.0 * math.exp(-2.0) / (1.0 - math.exp(-1.0)) ** 2
    result = ConcentrationService.theorem_bound(
        0, UNIT_HARMONIC, M=1, d=1, C_star=1.0, D=1.0, delta_tilde=1.0, kappa=1.0, C=10.0, T=1.0,
    )

    assert result.raw == pytest.approx(expected, rel=1e-9)
    assert result.branch == "quadratic"
    assert not result.vacuous


def test_theorem_bound_is_monotone() -> None:
    """
    Test that the bound grows with n0 and with δ̃.

    :return: None
    """

    assert _bound(0) < _bound(3) < _bound(10)
    assert _bound(delta_tilde=1.0) < _bound(delta_tilde=2.0) < _bound(delta_tilde=3.0)


def test_theorem_bound_branch_switch() -> None:
    result = ConcentrationService.theorem_bound(
        0, UNIT_HARMONIC, M=1, d=1, C_star=1.0, D=1.0, delta_tilde=2.0, kappa=1.0, C=1.0, T=1.0,
    )

    assert result.branch == "linear"


def test_vacuous_bound_is_clamped() -> None:
    result = ConcentrationService.theorem_bound(
        0, UNIT_HARMONIC, M=4, d=2, C_star=10.0, D=1.0, delta_tilde=0.1, kappa=1.0, C=10.0, T=1.0,
    )

    assert result.vacuous
    assert result.value == 0.0


def test_constant_schedule_diverges() -> None:
    with pytest.raises(Divergent):
        _bound(schedule=StepSchedule(kind="constant", value=0.1))


def test_wilson_interval() -> None:
    """
    Test the Wilson interval at 5 of 10 and its edge cases.

    :return: None
    """

    lower, upper = ConcentrationService.wilson_interval(5, 10)

    assert lower == pytest.approx(0.2366, abs=1e-4)
    assert upper == pytest.approx(0.7634, abs=1e-4)
    assert ConcentrationService.wilson_interval(0, 0) == (0.0, 1.0)
    assert ConcentrationService.wilson_interval(10, 10)[1] == pytest.approx(1.0)


def test_trap_membership(make_linear_problem: Callable) -> None:
    """
    Test the H-distance to the lifted sublevel set.

    Steps:
    1. Use the complete graph on two nodes (H = I), centre 1, level 0.125, δ = 1/32.
    2. Assert consensus points inside the ball are trapped and far ones are not.
    3. Assert a disagreement of 0.1 between nodes leaves the trap.

    :return: None
    """

    metric = make_linear_problem().hmetric
    X = np.array([
        [[1.0], [1.0]],
        [[1.3], [1.3]],
        [[3.0], [3.0]],
        [[1.0], [1.1]],
    ])

    inside = ConcentrationService.trap_membership(X, metric, np.array([1.0]), 0.125, 1.0 / 32.0)

    assert inside.tolist() == [True, True, False, False]


def test_trap_horizon_caps(make_linear_problem: Callable, scaled_harmonic: StepSchedule) -> None:
    problem = make_linear_problem()
    grid = build_time_grid(scaled_harmonic, 1.0, n0=100, horizon=5000)

    n, capped = ConcentrationService.trap_horizon(grid, 100, problem.attractor.tau, 1.0)
    short, short_capped = ConcentrationService.trap_horizon(grid, 100, problem.attractor.tau, 1.0, cap=500)

    assert not capped
    assert grid.t[n] >= grid.t[100] + problem.attractor.tau + 10.0
    assert (short, short_capped) == (500, True)


def test_trap_probability_estimate(
    make_linear_problem: Callable,
    scaled_harmonic: StepSchedule,
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    """
    Test the Monte Carlo trapping estimate on a well-conditioned problem.

    Steps:
    1. Lower the conditioning threshold to 5 and run 8 replicas from n0 = 100.
    2. Assert every replica is kept and stays trapped.
    3. Assert the report carries a Wilson interval and a bound in [0, 1].

    :return: None
    """

    monkeypatch.setattr(settings, "MIN_CONDITIONED", 5)
    problem = make_linear_problem()
    grid = build_time_grid(scaled_harmonic, 1.0, n0=100, horizon=5000)
    horizon, capped = ConcentrationService.trap_horizon(grid, 100, problem.attractor.tau, 1.0)

    report = ConcentrationService.trap_probability_mc(
        problem, scaled_harmonic, grid, 100, horizon, replicas=8, master_seed=3, C_star=1.0,
        horizon_capped=capped,
    )

    assert report.replicas_conditioned == 8
    assert report.replicas_capped == 0
    assert report.frequency == 1.0
    assert report.ci[0] < 1.0
    assert report.ci[1] == pytest.approx(1.0)
    assert 0.0 <= report.theorem.value <= 1.0
    assert report.delta_tilde > 0


def test_too_few_conditioned_replicas(make_linear_problem: Callable, scaled_harmonic: StepSchedule) -> None:
    problem = make_linear_problem()
    grid = build_time_grid(scaled_harmonic, 1.0, n0=100, horizon=2000)

    with pytest.raises(InsufficientConditioning):
        ConcentrationService.trap_probability_mc(
            problem, scaled_harmonic, grid, 100, 1000, replicas=1, master_seed=3, C_star=1.0,
        )


def test_azuma_dominates_empirical_tail(
    make_linear_problem: Callable, make_gossip: Callable, scaled_harmonic: StepSchedule,
) -> None:
    """
    Test the Azuma bound against the empirical tail of a weighted noise sum.

    Steps:
    1. Fix X on the lazy ring with three nodes and draw ten noise matrices per sample.
    2. Form S = Σ a(n+i)·[P^{l−1−i} M̃_i]₀₀ for n = 50, l = 11 over 20 000 samples.
    3. Assert P(|S| ≥ ε) ≤ azuma_tail(ε) at ε = 0.5σ, σ, 2σ and 3σ.

    :return: None
    """

    problem = make_linear_problem(gossip=make_gossip("lazy_ring", 3), theta=((0.9,), (1.0,), (1.1,)))
    P = problem.gossip.P
    state = problem.initial
    n, l, draws = 50, 11, 20_000
    a = scaled_harmonic.steps(np.arange(n + 1, n + l))
    weights = np.stack([np.linalg.matrix_power(P, l - 1 - i)[0] for i in range(1, l)])
    rng = np.random.default_rng(8)

    S = np.empty(draws)
    for s in range(draws):
        noise = np.stack([ProblemService.sample_noise(problem.noise, state, rng)[:, 0] for _ in range(l - 1)])
        S[s] = float(np.sum(a * np.sum(weights * noise, axis=1)))

    bounds = a * problem.noise.beta * (1.0 + np.linalg.norm(state))
    sigma = float(S.std())
    for multiple in (0.5, 1.0, 2.0, 3.0):
        epsilon = multiple * sigma
        empirical = float(np.mean(np.abs(S) >= epsilon))
        assert empirical <= ConcentrationService.azuma_tail(epsilon, bounds).azuma
