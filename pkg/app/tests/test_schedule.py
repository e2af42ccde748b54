# app/tests/test_schedule.py

"""
Step Schedule Tests
-------------------

Covers the admissibility gate, window ends, tail bounds and the epoch grid.
"""

import numpy as np
import pytest

from app.core.exceptions import HorizonExceeded, Inadmissible
from app.core.schedule import build_time_grid, tail_bound, validate_schedule, window_end
from app.models import StepSchedule


def test_harmonic_schedule_is_admissible() -> None:
    """
    Test that a(n) = 1/(1+n) passes every condition.

    :return: None
    """

    report = validate_schedule(StepSchedule(kind="harmonic"), horizon=10_000)

    assert report.admissible
    assert report.violations == []
    assert np.isfinite(report.C_star)


def test_shifted_power_fails_only_the_window_bound() -> None:
    """
    Test the counterexample a(n) = 1/(1 + n^{2/3}).

    Steps:
    1. Validate the shifted power schedule with γ = 2/3.
    2. Assert the window bound is the only failed condition.
    3. Assert raise_on_failure raises Inadmissible naming it.

    :return: None
    """

    schedule = StepSchedule(kind="shifted_power", gamma=2.0 / 3.0)
    report = validate_schedule(schedule, horizon=10_000)

    assert report.violations == ["window_bound"]

    with pytest.raises(Inadmissible) as excinfo:
        validate_schedule(schedule, horizon=10_000, raise_on_failure=True)

    assert excinfo.value.violations == ["window_bound"]


def test_constant_schedule_is_not_square_summable() -> None:
    report = validate_schedule(StepSchedule(kind="constant", value=0.1), horizon=1000)

    assert "square_summable" in report.violations
    assert "window_bound" in report.violations


def test_power_schedule_below_one_half_fails_square_summability() -> None:
    report = validate_schedule(StepSchedule(kind="power", gamma=0.5), horizon=1000)

    assert report.verdicts["square_summable"][0] == "fail"


def test_quasi_monotone_constant_is_respected() -> None:
    """
    Test a table that rises once.

    Steps:
    1. Validate (0.2, 0.1, 0.15, 0.05, ...) with c = 1 and assert failure.
    2. Validate the same table with c = 2 and assert quasi-monotonicity passes.

    :return: None
    """

    table = (0.2, 0.1, 0.15) + tuple(0.05 / (1 + k) for k in range(50))

    strict = validate_schedule(StepSchedule(kind="table", table=table, c=1.0), horizon=40)
    relaxed = validate_schedule(StepSchedule(kind="table", table=table, c=2.0), horizon=40)

    assert strict.verdicts["quasi_monotone"][0] == "fail"
    assert relaxed.verdicts["quasi_monotone"][0] == "pass"


def test_table_series_conditions_are_unverified() -> None:
    report = validate_schedule(StepSchedule(kind="table", table=(0.5, 0.25, 0.125)), horizon=100)

    assert report.verdicts["sum_diverges"][0] == "unverified"
    assert report.horizon == 2


def test_window_end_harmonic() -> None:
    """
    Test m(3) for a(n) = 1/(1+n) and T = 1.

    1/4 + ... + 1/9 = 0.9956 < 1 and adding 1/10 reaches 1.0956, so m(3) = 9.

    :return: None
    """

    assert window_end(StepSchedule(kind="harmonic"), 3, 1.0) == 9


def test_window_end_with_breached_declared_constant() -> None:
    schedule = StepSchedule(kind="harmonic", C_star=0.01)

    with pytest.raises(Inadmissible):
        window_end(schedule, 3, 1.0)


def test_window_end_past_table_end() -> None:
    with pytest.raises(HorizonExceeded):
        window_end(StepSchedule(kind="table", table=(0.1,) * 5), 0, 1.0)


@pytest.mark.parametrize("n", [0, 1, 10, 1000])
def test_harmonic_tail_bound_dominates_the_tail(n: int) -> None:
    """
    Test b(n) ≥ Σ_{m≥n} a(m)² for the harmonic schedule.

    The tail beyond the summed range is bounded by 1/(N+1).

    :param n: Start index.
    :type n: int

    :return: None
    """

    schedule = StepSchedule(kind="harmonic")
    N = 2_000_000
    partial = float(np.sum(schedule.steps(np.arange(n, N)) ** 2)) + 1.0 / (N + 1)

    assert tail_bound(schedule, n) >= partial
    assert tail_bound(schedule, n) <= 2.0 / (n + 1)


def test_tail_bound_power_and_constant() -> None:
    power = StepSchedule(kind="power", gamma=0.75)
    partial = float(np.sum(power.steps(np.arange(5, 1_000_000)) ** 2))

    assert tail_bound(power, 5) >= partial
    assert tail_bound(StepSchedule(kind="constant", value=0.1), 5) == float("inf")


def test_time_grid_epochs() -> None:
    """
    Test the epoch partition of the harmonic schedule with T′ = 1.

    Steps:
    1. Build the grid over 2000 iterations.
    2. Assert t is the cumulative sum of a.
    3. Assert every epoch lasts at least T′ and at most T = T′ + a(0).

    :return: None
    """

    schedule = StepSchedule(kind="harmonic")
    grid = build_time_grid(schedule, 1.0, horizon=2000)
    lengths = np.diff(grid.t[grid.n_k])

    np.testing.assert_allclose(grid.t, np.cumsum(schedule.steps(np.arange(2001))))
    assert grid.T == pytest.approx(2.0)
    assert grid.epochs >= 5
    assert np.all(lengths >= 1.0 - 1e-12)
    assert np.all(lengths <= grid.T)
    assert np.all(np.diff(grid.n_k) > 0)
    assert np.isfinite(grid.window_constant())


def test_time_grid_from_later_start() -> None:
    grid = build_time_grid(StepSchedule(kind="harmonic"), 1.0, n0=50, horizon=5000)

    assert grid.n_k[0] == 50
    assert grid.epoch_of(50) == 0


def test_time_grid_requested_epochs_must_fit() -> None:
    with pytest.raises(HorizonExceeded):
        build_time_grid(StepSchedule(kind="harmonic"), 1.0, max_epochs=50, horizon=100)


def test_time_grid_grows_horizon_for_requested_epochs() -> None:
    grid = build_time_grid(StepSchedule(kind="harmonic"), 1.0, max_epochs=3)

    assert grid.epochs == 3
