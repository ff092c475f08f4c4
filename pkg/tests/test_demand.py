import numpy as np
import pytest

from rebalance_lab.core.errors import DataError
from rebalance_lab.data import DayCalendar, RideArrays
from rebalance_lab.model.demand import (
    DemandTimeline,
    RateModel,
    fit_rates,
    flow_summary,
    slice_of,
    travel_times,
)

from conftest import rate_model


def _rides(rows):
    start, end, origin, destination = (np.array(col, dtype=np.int64) for col in zip(*rows))
    return RideArrays(start, end, origin, destination)


def test_rate_is_count_over_matching_minutes():
    # two rides 0 -> 1 at 06:05 on each of five weekdays
    rows = [(d * 1440 + 365, d * 1440 + 375, 0, 1) for d in range(5) for _ in range(2)]
    model = fit_rates(_rides(rows), 2, DayCalendar("2010-07-26"))
    assert model.M[0, 18, 0, 1] == pytest.approx(0.1)
    assert model.Lam[0, 18, 0, 1] == pytest.approx(0.1)
    assert model.hist_minutes[0, 18] == 100
    assert model.M[1].sum() == 0


def test_ride_past_midnight_adds_no_history_day():
    # Monday 23:50 -> Tuesday 00:10, nothing starts on Tuesday
    model = fit_rates(_rides([(1430, 1450, 0, 1)]), 2, DayCalendar("2010-07-26"))
    assert model.hist_minutes[0, 0] == 20
    assert model.hist_minutes[0, 71] == 20
    assert model.M[0, 71, 0, 1] == pytest.approx(0.05)
    assert model.Lam[0, 0, 0, 1] == pytest.approx(0.05)


def test_synthetic_history_matches_generated_days(small_corpus, small_spec):
    model = fit_rates(small_corpus.ride_arrays(), len(small_corpus.stations), small_corpus.calendar)
    assert model.hist_minutes[0, 30] == small_spec.weekday_days * 20
    assert model.hist_minutes[1, 30] == small_spec.weekend_days * 20


def test_six_oclock_lands_in_slice_18():
    assert int(slice_of(360)) == 18
    assert int(slice_of(1440 + 359)) == 17
    model = fit_rates(_rides([(360, 370, 0, 0)]), 1, DayCalendar())
    assert model.M[0, 18, 0, 0] > 0
    assert model.M[0, 17].sum() == 0


def test_no_rides_gives_zero_model():
    empty = RideArrays(*(np.zeros(0, dtype=np.int64) for _ in range(4)))
    model = fit_rates(empty, 3, DayCalendar())
    assert model.M.shape == (2, 72, 3, 3)
    assert not model.M.any() and not model.Lam.any()
    summary = flow_summary(model, 600)
    assert not summary.mu.any() and not summary.lam.any() and not summary.eta.any()


def test_flow_summary_sums():
    M = np.zeros((2, 72, 3, 3))
    Lam = np.zeros((2, 72, 3, 3))
    M[0, 30, 1, :] = [0.1, 0.0, 0.2]
    Lam[0, 30, :, 1] = [0.25, 0.0, 0.25]
    model = RateModel(M, Lam, np.full((2, 72), 20))
    summary = flow_summary(model, 30 * 20 + 5)  # Monday, slice 30
    assert summary.mu[1] == pytest.approx(0.3)
    assert summary.lam[1] == pytest.approx(0.5)
    assert summary.eta[1] == pytest.approx(0.2)


def test_flow_summary_matches_double_loop():
    rng = np.random.default_rng(4)
    S = 4
    model = RateModel(rng.uniform(0, 0.1, (2, 72, S, S)), rng.uniform(0, 0.1, (2, 72, S, S)), np.full((2, 72), 20))
    minute = 5 * 1440 + 7 * 60  # Saturday 07:00
    summary = flow_summary(model, minute)
    w, k = 1, 21
    for s in range(S):
        mu = sum(model.M[w, k, s, j] for j in range(S))
        lam = sum(model.Lam[w, k, i, s] for i in range(S))
        assert summary.mu[s] == pytest.approx(mu)
        assert summary.eta[s] == pytest.approx(lam - mu)


def test_travel_times_mean_and_fallback():
    d = np.array([[0.0, 2.0, 2.0], [2.0, 0.0, 2.0], [2.0, 2.0, 0.0]])
    rides = _rides([(0, 10, 0, 1), (0, 20, 0, 1), (0, 10, 1, 2), (0, 22, 0, 0)])
    times, speed = travel_times(rides, d)
    assert speed == pytest.approx(12.0)
    assert times[0, 1] == 15
    assert times[2, 0] == 10
    assert times[0, 0] == 22


def test_timeline_shapes_and_window():
    model = rate_model(np.array([[0.0, 0.5], [0.0, 0.0]]))
    timeline = DemandTimeline(model, ("weekday", "weekday"))
    assert timeline.length == 3 * 1440
    assert timeline.eta.shape == (3 * 1440, 2)
    assert timeline.eta[0] == pytest.approx([-0.5, 0.5])
    assert timeline.departure_matrix(100)[0, 1] == pytest.approx(0.5)
    assert len(timeline.window(3 * 1440 - 10, 100)) == 10


def test_unknown_day_type():
    with pytest.raises(DataError):
        DemandTimeline(rate_model(np.zeros((1, 1))), ("holiday",))
