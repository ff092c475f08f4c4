import numpy as np
import pytest
from scipy import sparse

from rebalance_lab.config.settings import MpcConfig
from rebalance_lab.control import qp
from rebalance_lab.control.network import PlannedAction
from rebalance_lab.control.pricing import (
    MpcState,
    PriceController,
    PriceSchedule,
    build_mpc,
    build_state,
    gamma_matrix,
    predict_open_loop,
    project_prices,
    solve_and_issue,
)
from rebalance_lab.model.customer import LinearResponse
from rebalance_lab.model.demand import DemandTimeline
from rebalance_lab.model.geometry import PairIndex

from conftest import FixedPlateaus, rate_model


def _one_pair_response(slope=0.05):
    pairs = PairIndex.from_neighbors([np.array([1]), np.array([], dtype=int)])
    return LinearResponse(pairs, [np.array([[slope]]), np.zeros((0, 0))])


def _one_step_state(fills=(15.0, 2.0), lam=(10.0, 0.0)):
    return MpcState(
        fills=np.array(fills, dtype=float),
        eta=np.zeros((1, 2)),
        lam=np.array([lam], dtype=float),
        truck_df=np.zeros((1, 2)),
        lower=np.array([[5.0, 5.0]]),
        upper=np.array([[15.0, 15.0]]),
    )


def _solve(state, response, config):
    instance, layout = build_mpc(state, response, config)
    schedule, result = solve_and_issue(instance, layout, response, config)
    assert result.ok
    return schedule, result


def test_one_step_hand_solution():
    # 10 returns/step at the full station, 5% take-up per unit payout:
    # minimize 0.05 p^2 + 0.1 (5 - p/2)^2 + 0.1 (p/2 - 8)^2  ->  p = 6.5
    response = _one_pair_response()
    schedule, _ = _solve(_one_step_state(), response, MpcConfig(alpha=0.1, p_max=10.0, horizon=1))
    assert schedule.first == pytest.approx([6.5], abs=1e-3)
    forecast = predict_open_loop(_one_step_state(), schedule, response)
    assert forecast[1] == pytest.approx([15.0 - 3.25, 2.0 + 3.25], abs=1e-3)


def test_prices_fall_as_alpha_grows():
    response = _one_pair_response()
    offered = []
    for alpha in [1e-3, 0.1, 10.0, 1e6]:
        schedule, _ = _solve(_one_step_state(), response, MpcConfig(alpha=alpha, p_max=10.0, horizon=1))
        offered.append(float(schedule.first[0]))
    assert offered[0] == pytest.approx(10.0, abs=1e-3)
    assert all(a >= b - 1e-6 for a, b in zip(offered, offered[1:]))
    assert offered[-1] == pytest.approx(0.0, abs=1e-4)


def test_no_returns_means_no_prices():
    response = _one_pair_response()
    schedule, _ = _solve(_one_step_state(lam=(0.0, 0.0)), response, MpcConfig(alpha=0.1, p_max=10.0, horizon=1))
    assert schedule.first == pytest.approx([0.0], abs=1e-6)


def test_centered_stations_get_no_prices():
    response = _one_pair_response()
    state = _one_step_state(fills=(10.0, 10.0))
    schedule, result = _solve(state, response, MpcConfig(alpha=0.1, p_max=10.0, horizon=1))
    assert schedule.first == pytest.approx([0.0], abs=1e-6)
    deviation = state.deviation(predict_open_loop(state, schedule, response))
    assert np.abs(deviation).max() == pytest.approx(0.0, abs=1e-5)


def test_gamma_conserves_bikes():
    response = _one_pair_response()
    gamma = gamma_matrix(response.pairs, response.matrix(), np.array([10.0, 0.0])).toarray()
    assert gamma == pytest.approx(np.array([[-0.5], [0.5]]))

    rng = np.random.default_rng(4)
    pairs = PairIndex.from_neighbors([np.array([1, 2]), np.array([0, 2]), np.array([1])])
    blocks = [rng.uniform(0, 0.1, (2, 2)), rng.uniform(0, 0.1, (2, 2)), rng.uniform(0, 0.1, (1, 1))]
    response = LinearResponse(pairs, blocks)
    gamma = gamma_matrix(pairs, response.matrix(), rng.uniform(0, 5, 3))
    assert np.abs(gamma.sum(axis=0)).max() == pytest.approx(0.0, abs=1e-12)


def test_layout_and_dynamics_rows():
    response = _one_pair_response()
    state = MpcState(np.array([15.0, 2.0]), np.zeros((3, 2)), np.full((3, 2), 2.0), np.zeros((3, 2)),
                     np.full((3, 2), 5.0), np.full((3, 2), 15.0))
    instance, layout = build_mpc(state, response, MpcConfig(horizon=3))
    assert layout.size == instance.size == 3 * (1 + 2)
    assert instance.A_eq.shape == (6, 9)
    assert layout.f(1) == slice(3, 5)
    assert sparse.issparse(instance.H)


def test_warm_start_repeats_prices():
    response = _one_pair_response()
    config = MpcConfig(alpha=0.1, p_max=10.0, horizon=1)
    instance, layout = build_mpc(_one_step_state(), response, config)
    cold, result = solve_and_issue(instance, layout, response, config)
    warm, _ = solve_and_issue(instance, layout, response, config, warm_start=result.x)
    assert warm.first == pytest.approx(cold.first, abs=1e-6)


def test_project_prices():
    pairs = PairIndex.from_neighbors([np.array([1, 2]), np.array([], dtype=int), np.array([], dtype=int)])
    response = LinearResponse(pairs, [np.array([[0.3, 0.2], [0.1, 0.4]]), np.zeros((0, 0)), np.zeros((0, 0))])
    assert project_prices([5.0, 5.0], response, 4.0) == pytest.approx([1.0, 1.0])
    assert project_prices([-1.0, 0.5], response, 4.0) == pytest.approx([0.0, 0.5])


def test_build_state_aggregates_steps_and_trucks():
    flows = np.array([[0.0, 0.1], [0.0, 0.0]])
    timeline = DemandTimeline(rate_model(flows), ("weekday",))
    config = MpcConfig(horizon=2, step_minutes=20)
    actions = [PlannedAction(0, 1, 125, 4, 0, 100), PlannedAction(0, 0, 500, -3, 3, 480)]
    state = build_state(np.array([5.0, 5.0]), 100, timeline, FixedPlateaus([2, 3], [8, 9]), config, actions)
    assert state.eta[0] == pytest.approx([-2.0, 2.0])
    assert state.lam[0] == pytest.approx([0.0, 2.0])
    assert state.truck_df[1] == pytest.approx([0.0, 4.0])
    assert not state.truck_df[0].any()
    assert state.center[0] == pytest.approx([5.0, 6.0])


def _controller(config=None):
    flows = np.array([[0.0, 0.0], [0.0, 0.0]])
    timeline = DemandTimeline(rate_model(flows), ("weekday",))
    # all of station 0's returns are priced; lam comes from arrivals at station 0
    timeline.lam[:, 0] = 0.5
    return PriceController(_one_pair_response(), timeline, FixedPlateaus([5, 5], [15, 15]), np.array([20, 20]),
                           config or MpcConfig(alpha=0.1, p_max=10.0, horizon=2), station_ids=[7, 8])


def test_controller_issues_and_logs_prices():
    controller = _controller()
    prices = controller.tick(0, np.array([19.0, 1.0]))
    assert prices[0] > 0
    assert controller.offers(0) == pytest.approx(prices)
    assert controller.offers(1).size == 0
    assert controller.log_rows[0]["station"] == 7
    assert controller.log_rows[0]["neighbor"] == 8


def test_controller_keeps_prices_when_solver_fails(monkeypatch):
    controller = _controller()
    first = controller.tick(0, np.array([19.0, 1.0])).copy()

    def failing(instance, **kwargs):
        return qp.QpResult(np.zeros(instance.size), qp.QpStatus.MAX_ITER)

    monkeypatch.setattr(qp, "solve", failing)
    again = controller.tick(20, np.array([10.0, 10.0]))
    assert controller.failures == 1
    assert again == pytest.approx(first)


def test_open_loop_forecast_without_prices():
    state = _one_step_state()
    state.eta[0] = [1.0, -1.0]
    forecast = predict_open_loop(state, None, _one_pair_response())
    assert forecast[1] == pytest.approx([16.0, 1.0])
    schedule = PriceSchedule(np.zeros((1, 1)), _one_pair_response().pairs)
    assert predict_open_loop(state, schedule, _one_pair_response())[1] == pytest.approx([16.0, 1.0])
