import dataclasses

import numpy as np
import pytest

from rebalance_lab.config.settings import LabSettings, RoutingConfig, SimConfig
from rebalance_lab.control.network import PlannedAction
from rebalance_lab.core.errors import SimulationError
from rebalance_lab.model.bundle import ModelBundle
from rebalance_lab.model.customer import LinearResponse
from rebalance_lab.sim import simulator
from rebalance_lab.sim.simulator import Simulator, run_id
from rebalance_lab.sim.world import Ride, WorldState

from conftest import make_geometry, station_table, zero_rates

ONE_DAY = SimConfig(burn_in_days=0, measured_days=1)


def _line_bundle(capacity, fills):
    geometry = make_geometry([[float(i), 0.0] for i in range(len(capacity))], neighbor_count=2)
    blocks = [np.zeros((len(ns), len(ns))) for ns in geometry.neighbors]
    response = LinearResponse(geometry.pairs, blocks)
    return ModelBundle(station_table(capacity), zero_rates(len(capacity)), geometry, response,
                       np.asarray(fills, dtype=int))


def test_run_id():
    assert run_id("weekday", 2, 0.1, 3) == "weekday-R2-a0.1-s3"
    assert run_id("weekend", 0, float("inf"), 1) == "weekend-R0-ainf-s1"


def test_zero_demand_leaves_the_world_alone():
    bundle = _line_bundle([5, 5, 5], [2, 3, 1])
    sim = Simulator(bundle, LabSettings(), ONE_DAY)
    report = sim.run()
    assert list(sim.world.fills) == [2, 3, 1]
    assert report.potential == 0
    assert report.service_level == 1.0
    assert not sim.events


def test_full_station_overflows_to_its_nearest_neighbor():
    bundle = _line_bundle([1, 5, 5], [0, 0, 0])
    sim = Simulator(bundle, LabSettings(), ONE_DAY)
    for _ in range(2):
        sim.world.schedule(5, Ride(origin=2, destination=0))
    sim.world.fleet_size = 2
    for minute in range(6):
        sim.step_minute(minute)
    assert list(sim.world.fills) == [1, 1, 0]
    assert sim.report.full_events == 1
    assert sim.report.full_by_station.tolist() == [1, 0, 0]
    assert sim.events == [{"minute": 5, "kind": "full", "station": 1}]


def test_burn_in_events_are_not_counted():
    bundle = _line_bundle([1, 5, 5], [1, 0, 0])
    sim = Simulator(bundle, LabSettings(), SimConfig(burn_in_days=1, measured_days=1))
    sim.world.schedule(3, Ride(origin=1, destination=0))
    sim.world.fleet_size += 1
    for minute in range(4):
        sim.step_minute(minute)
    assert sim.report.full_events == 0
    assert sim.world.fills.sum() == 2


def test_apply_truck_clamps_to_load_and_capacity():
    world = WorldState.initial([3, 9], [10, 10], trucks=1)
    world.truck_loads[0] = 4
    assert world.apply_truck(0, 0, 6, 20) == 4
    assert list(world.fills) == [7, 9] and world.truck_loads[0] == 0
    assert world.apply_truck(0, 1, -15, 20) == -9
    assert world.truck_loads[0] == 9
    assert world.apply_truck(0, 0, -5, 10) == -1
    assert world.truck_loads[0] == 10


def test_conservation_check():
    world = WorldState.initial([3, 2], [5, 5])
    world.schedule(7, Ride(0, 1))
    with pytest.raises(SimulationError):
        world.check_conservation()
    world.fills[0] -= 1
    world.check_conservation()
    with pytest.raises(SimulationError):
        WorldState.initial([6, 0], [5, 5])
    world.undock(1)
    world.undock(1)
    with pytest.raises(SimulationError):
        world.undock(1)


def test_baseline_run_is_deterministic(small_bundle, small_settings, tmp_path):
    sim = dataclasses.replace(ONE_DAY, seed=5)
    first = Simulator(small_bundle, small_settings, sim)
    report = first.run()
    second = Simulator(small_bundle, small_settings, sim)
    again = second.run()
    assert report.to_row(sim) == again.to_row(sim)
    assert first.events == second.events

    assert report.potential > 0
    assert 0.0 <= report.service_level <= 1.0
    assert report.payout_total == 0.0
    assert report.truck_hours == 0.0
    assert report.no_service == len(first.events)

    path = tmp_path / "events.csv"
    first.write_events(str(path))
    assert path.read_text().splitlines()[0] == "minute,kind,station"


def test_module_run_writes_event_log(small_bundle, small_settings, tmp_path):
    path = tmp_path / "events.csv"
    report = simulator.run(small_bundle, small_settings, dataclasses.replace(ONE_DAY, seed=2), str(path))
    assert len(path.read_text().splitlines()) == report.no_service + 1


def test_different_seeds_differ(small_bundle, small_settings):
    a = simulator.run(small_bundle, small_settings, dataclasses.replace(ONE_DAY, seed=1))
    b = simulator.run(small_bundle, small_settings, dataclasses.replace(ONE_DAY, seed=2))
    assert a.potential != b.potential or a.no_service != b.no_service


def test_controlled_run_keeps_bikes_and_books_costs(small_bundle, small_settings):
    settings = dataclasses.replace(small_settings,
                                   routing=RoutingConfig(n_truck=2, window_start=480, window_end=720))
    sim = dataclasses.replace(ONE_DAY, trucks=1, alpha=0.1, seed=3)
    runner = Simulator(small_bundle, settings, sim)
    report = runner.run()
    assert runner.world.fills.sum() + runner.world.riding + runner.world.truck_loads.sum() == small_bundle.fleet_size
    # one truck, one four-hour window
    assert 0.0 <= report.truck_hours <= 4.0
    assert report.payout_total >= 0.0
    assert 0.0 <= report.service_level <= 1.0
    assert runner.prices is not None and runner.dispatcher is not None
    assert all(row["tick"] >= 480 for row in runner.dispatcher.log_rows)


def test_switches_disable_controllers(small_bundle, small_settings):
    sim = dataclasses.replace(ONE_DAY, trucks=2, alpha=0.1, trucks_on=False, prices_on=False)
    runner = Simulator(small_bundle, small_settings, sim)
    assert runner.dispatcher is None and runner.prices is None
    assert not runner.world.truck_loads.size


@pytest.mark.slow
def test_trucks_do_not_hurt_service(small_bundle, small_settings):
    levels = {}
    for trucks in (0, 2):
        runs = [simulator.run(small_bundle, small_settings, dataclasses.replace(ONE_DAY, trucks=trucks, seed=seed))
                for seed in (1, 2, 3)]
        levels[trucks] = np.mean([r.service_level for r in runs])
    assert levels[2] >= levels[0] - 0.01


class _ScriptedDispatcher:
    """Hands out fixed truck actions by minute."""

    def __init__(self, actions):
        self.actions = actions

    def due(self, minute):
        return [a for a in self.actions if a.minute == minute]

    def executed(self, action, load):
        pass


def test_truck_hours_count_executed_journeys_only():
    bundle = _line_bundle([10, 10, 10], [5, 5, 5])
    sim = Simulator(bundle, LabSettings(), SimConfig(burn_in_days=1, measured_days=1, trucks=1))
    sim.world.truck_loads[0] = 2
    sim.dispatcher = _ScriptedDispatcher([
        PlannedAction(0, 1, 500, 1, 1, 480),
        PlannedAction(0, 2, 1440 + 530, 1, 0, 1440 + 500),
        PlannedAction(0, 0, 1440 + 560, 0, 0, 1440 + 545),
    ])
    for minute in (500, 1440 + 530, 1440 + 560):
        sim.world.clock = minute
        sim._execute_trucks(minute)
    # the burn-in journey is not counted; the homing trip is
    assert sim.report.truck_hours == pytest.approx(45 / 60)


def test_idle_fleet_reports_no_truck_hours():
    bundle = _line_bundle([10, 10, 10], [5, 5, 5])
    sim = Simulator(bundle, LabSettings(), dataclasses.replace(ONE_DAY, trucks=2))
    report = sim.run()
    assert sim.dispatcher is not None
    assert report.truck_hours == 0.0


class _FixedOffers:
    def __init__(self, prices):
        self.prices = prices


@pytest.mark.parametrize("d_tilde, delay", [(3.0, 15), (-0.4, 1)])
def test_diverted_ride_travels_the_effective_distance(d_tilde, delay):
    bundle = _line_bundle([10, 10, 10], [5, 5, 5])
    bundle.geometry.d_tilde[0, 1] = d_tilde
    sim = Simulator(bundle, LabSettings(), ONE_DAY)
    offers = np.zeros(len(bundle.geometry.pairs))
    offers[bundle.geometry.pairs.of(0)] = [100.0, 0.0]
    sim.prices = _FixedOffers(offers)
    sim.world.clock = 10
    sim._arrive(10, Ride(origin=2, destination=0))
    rides = sim.world.arrivals(10 + delay)
    assert [(r.destination, r.payout, r.diverted) for r in rides] == [(1, 100.0, True)]
