import numpy as np
import pandas as pd
import pytest

from rebalance_lab.core.errors import FeasibilityError
from rebalance_lab.model.demand import DemandTimeline
from rebalance_lab.model.utility import (
    PLATEAU_COLUMNS,
    Plateau,
    PlateauTable,
    compute_plateau,
    plateau_bounds,
    propagate_fill,
    utility_exact,
    utility_fast,
    verify_plateau,
)

from conftest import rate_model

# empty station that should receive 4 to 8 bikes: cumulative minimum -4, maximum +2
FOUR_TO_EIGHT = np.array([-1.0] * 4 + [1.0] * 6)


def test_propagate_fill():
    assert propagate_fill(3.0, np.zeros(4), 10) == pytest.approx([3, 3, 3, 3, 3])
    assert propagate_fill(9.0, np.full(4, 0.5), 10) == pytest.approx([9, 9.5, 10, 10, 10])
    assert propagate_fill(0.0, np.full(3, -1.0), 10) == pytest.approx([0, 0, 0, 0])


def test_propagate_fill_per_station():
    eta = np.array([[1.0, -1.0], [1.0, -1.0]])
    out = propagate_fill(np.array([9.0, 1.0]), eta, np.array([10.0, 5.0]))
    assert out.shape == (3, 2)
    assert out[-1] == pytest.approx([10.0, 0.0])


def test_utility_exact_examples():
    eta = np.array([1.0, 1.0, 1.0, 0.0, 0.0])
    assert utility_exact(10, -3, eta, 10) == pytest.approx(3.0)
    assert utility_exact(4, 0, eta, 10) == 0.0
    assert utility_exact(4, 3, np.zeros(6), 10) == 0.0


def test_utility_exact_rejects_infeasible_change():
    with pytest.raises(FeasibilityError):
        utility_exact(8, 3, np.zeros(3), 10)
    with pytest.raises(FeasibilityError):
        utility_exact(2, -3, np.zeros(3), 10)


def test_idle_station_plateau_is_whole_range():
    assert compute_plateau(np.zeros(20), 15) == Plateau(0.0, 15.0, False)


def test_four_to_eight_plateau():
    plateau = compute_plateau(FOUR_TO_EIGHT, 10)
    assert (plateau.lower, plateau.upper) == (4.0, 8.0)
    assert not plateau.degenerate
    assert utility_fast(0, 4, plateau) == 4
    assert utility_fast(0, 6, plateau) == 4
    assert utility_fast(0, 9, plateau) == 3
    assert utility_fast(5, 2, plateau) == 0
    for df in range(11):
        assert utility_fast(0, df, plateau) == pytest.approx(utility_exact(0, df, FOUR_TO_EIGHT, 10))
    assert verify_plateau(FOUR_TO_EIGHT, 10, plateau)


@pytest.mark.parametrize("eta, point", [([6.0, -12.0], 4.0), ([-6.0, 12.0], 6.0)])
def test_crossed_envelopes_collapse_plateau(eta, point):
    plateau = compute_plateau(np.array(eta), 10)
    assert plateau.degenerate
    assert plateau.lower == plateau.upper == point
    for f in range(11):
        for df in range(-f, 11 - f):
            assert utility_fast(f, df, plateau) == pytest.approx(utility_exact(f, df, np.array(eta), 10))


def test_fast_utility_matches_replay_on_random_profiles():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        capacity = int(rng.integers(1, 31))
        horizon = int(rng.integers(1, 49))
        # multiples of 1/8 keep both computations exact in floating point
        eta = rng.integers(-16, 17, horizon) / 8.0
        plateau = compute_plateau(eta, capacity)
        f = int(rng.integers(0, capacity + 1))
        for df in range(-f, capacity - f + 1):
            assert utility_fast(f, df, plateau) == pytest.approx(utility_exact(f, df, eta, capacity), abs=1e-9)


def test_slopes_are_unit_and_nonincreasing():
    rng = np.random.default_rng(7)
    for _ in range(200):
        capacity = int(rng.integers(2, 21))
        eta = rng.integers(-3, 4, int(rng.integers(1, 40))).astype(float)
        values = [utility_exact(0, x, eta, capacity) for x in range(capacity + 1)]
        slopes = np.diff(values)
        assert set(np.round(slopes, 9)) <= {-1.0, 0.0, 1.0}
        assert np.all(np.diff(slopes) <= 1e-9)


def test_vectorized_bounds_match_single_station():
    rng = np.random.default_rng(3)
    eta = rng.integers(-8, 9, (30, 5)) / 4.0
    capacity = np.array([5, 10, 15, 20, 25])
    lower, upper, degenerate = plateau_bounds(eta, capacity)
    for s in range(5):
        single = compute_plateau(eta[:, s], capacity[s])
        assert (lower[s], upper[s], bool(degenerate[s])) == (single.lower, single.upper, single.degenerate)
        assert 0 <= lower[s] <= upper[s] <= capacity[s]


def test_plateau_table_rows_and_dump(tmp_path):
    flows = np.array([[0.0, 0.02, 0.0], [0.0, 0.0, 0.0], [0.01, 0.0, 0.0]])
    timeline = DemandTimeline(rate_model(flows), ("weekday",))
    table = PlateauTable(timeline, np.array([10, 12, 8]), horizon=600, station_ids=[11, 12, 13], cross_check=True)
    lower, upper, _ = table.row(480)
    assert lower.shape == upper.shape == (3,)
    # station 1 only receives bikes: it should start the look-ahead emptier
    assert upper[1] < 12
    assert table.plateau(1, 480).upper == upper[1]

    path = tmp_path / "plateaus.csv"
    table.dump_csv(str(path), [0, 480])
    frame = pd.read_csv(path)
    assert list(frame.columns) == PLATEAU_COLUMNS
    assert len(frame) == 6
    assert set(frame["station"]) == {11, 12, 13}
