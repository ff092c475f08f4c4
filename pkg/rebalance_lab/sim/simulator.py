"""Minute-step Monte-Carlo simulation of a bike-sharing system under control."""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..config.settings import MINUTES_PER_DAY, LabSettings, SimConfig
from ..core.seeding import CUSTOMER_STREAM, DEMAND_STREAM, stream
from ..control.pricing import PriceController
from ..control.routing import TruckDispatcher
from ..model.bundle import ModelBundle
from ..model.customer import CostSampler, choose, overflow_walk
from ..model.demand import DemandTimeline
from ..model.utility import PlateauTable
from ..utils.helpers import write_csv
from .world import Ride, WorldState

logger = logging.getLogger(__name__)

EVENT_COLUMNS = ["minute", "kind", "station"]
REPORT_COLUMNS = ["run_id", "R", "alpha", "seed", "day_type", "potential", "empty_events", "full_events",
                  "service_level", "payout_total", "truck_hours"]


def run_id(day_type: str, trucks: int, alpha: float, seed: int) -> str:
    return f"{day_type}-R{trucks}-a{alpha:g}-s{seed}"


@dataclass
class SimReport:
    potential: int = 0
    empty_events: int = 0
    full_events: int = 0
    payout_total: float = 0.0
    truck_hours: float = 0.0  # driving and handling time of executed truck journeys
    empty_by_station: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    full_by_station: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    diverted: int = 0

    @property
    def no_service(self) -> int:
        return self.empty_events + self.full_events

    @property
    def service_level(self) -> float:
        if self.potential == 0:
            return 1.0
        return (self.potential - self.no_service) / self.potential

    def to_row(self, sim: SimConfig) -> dict:
        return {
            "run_id": run_id(sim.day_type, sim.trucks, sim.alpha, sim.seed),
            "R": sim.trucks,
            "alpha": sim.alpha,
            "seed": sim.seed,
            "day_type": sim.day_type,
            "potential": self.potential,
            "empty_events": self.empty_events,
            "full_events": self.full_events,
            "service_level": self.service_level,
            "payout_total": self.payout_total,
            "truck_hours": self.truck_hours,
        }


class Simulator:
    """Closed-loop simulation: demand, customer choices, trucks and prices.

    Minute 0 is midnight of the first (burn-in) day. Within a minute the
    order is: execute due truck actions, tick the controllers, dock arriving
    bikes, then sample departures.
    """

    def __init__(self, bundle: ModelBundle, settings: Optional[LabSettings] = None,
                 sim: Optional[SimConfig] = None):
        self.settings = settings or LabSettings()
        self.sim = sim or self.settings.sim
        self.bundle = bundle
        self.geometry = bundle.geometry
        self.routing = self.settings.routing
        self.timeline = DemandTimeline(bundle.rates, self.sim.day_types)
        self.plateaus = PlateauTable(self.timeline, bundle.capacity, self.settings.model.utility_horizon,
                                     bundle.station_ids, self.settings.model.cross_check_plateaus)
        self.world = WorldState.initial(bundle.initial_fills, bundle.capacity,
                                        self.sim.trucks if self.sim.uses_trucks else 0)
        self.demand_rng = stream(self.sim.seed, DEMAND_STREAM)
        self.customer_rng = stream(self.sim.seed, CUSTOMER_STREAM)
        self.sampler = CostSampler(self.settings.customer.c_max)

        self.dispatcher = None
        if self.sim.uses_trucks:
            self.dispatcher = TruckDispatcher(self.sim.trucks, bundle.capacity, self.geometry.xy, bundle.station_ids,
                                              self.timeline, self.plateaus, self.routing)
        self.prices = None
        self.pricing = dataclasses.replace(self.settings.pricing, alpha=self.sim.alpha)
        if self.sim.uses_prices:
            self.prices = PriceController(bundle.response, self.timeline, self.plateaus, bundle.capacity,
                                          self.pricing, bundle.station_ids)
        self._no_prices = np.zeros(len(self.geometry.pairs))

        S = len(bundle.capacity)
        self.report = SimReport(empty_by_station=np.zeros(S, dtype=int), full_by_station=np.zeros(S, dtype=int))
        self.events: List[dict] = []
        self.measure_from = self.sim.burn_in_days * MINUTES_PER_DAY

    @property
    def measuring(self) -> bool:
        return self.world.clock >= self.measure_from

    def _offers(self) -> np.ndarray:
        return self.prices.prices if self.prices is not None else self._no_prices

    def _record(self, kind: str, station: int):
        if not self.measuring:
            return
        if kind == "empty":
            self.report.empty_events += 1
            self.report.empty_by_station[station] += 1
        else:
            self.report.full_events += 1
            self.report.full_by_station[station] += 1
        self.events.append({"minute": self.world.clock, "kind": kind,
                            "station": int(self.bundle.station_ids[station])})

    def _credit(self, amount: float):
        if amount and self.measuring:
            self.report.payout_total += float(amount)

    def _tick_controllers(self, minute: int):
        day, clock = divmod(minute, MINUTES_PER_DAY)
        if self.dispatcher is not None:
            if clock == 0:
                self.dispatcher.start_day(day)
            r = self.routing
            if r.window_start <= clock < r.window_end and (clock - r.window_start) % r.t_impl == 0:
                self.dispatcher.replan_tick(minute, self.world.fills.astype(float), self.world.truck_loads)
        if self.prices is not None and minute % self.pricing.step_minutes == 0:
            pending = []
            if self.dispatcher is not None:
                pending = [a for actions in self.dispatcher.pending.values() for a in actions]
            self.prices.tick(minute, self.world.fills.astype(float), pending)

    def _execute_trucks(self, minute: int):
        if self.dispatcher is None:
            return
        for action in self.dispatcher.due(minute):
            moved = self.world.apply_truck(action.truck, action.station, action.df, self.routing.l_max)
            if moved != action.df:
                logger.debug("Truck %d moved %d of %d planned bikes at station %d", action.truck, moved,
                             action.df, action.station)
            self.dispatcher.executed(action, int(self.world.truck_loads[action.truck]))
            if self.measuring:
                self.report.truck_hours += (action.minute - action.start) / 60.0

    def _hop_payouts(self, start: int, path: List[int], offers: np.ndarray) -> float:
        total, current = 0.0, start
        for nxt in path:
            neighbors = self.geometry.neighbors[current]
            hit = np.flatnonzero(neighbors == nxt)
            if hit.size and len(offers):
                total += float(offers[self.geometry.pairs.of(current)][hit[0]])
            current = nxt
        return total

    def _arrive(self, minute: int, ride: Ride):
        world, station = self.world, ride.destination
        offers = self._offers()
        if world.has_space(station):
            neighbors = self.geometry.neighbors[station]
            if self.prices is not None and not ride.diverted and len(neighbors):
                station_offers = offers[self.geometry.pairs.of(station)]
                if station_offers.any():
                    cost = float(self.sampler.sample(self.customer_rng))
                    pick = choose(station_offers, cost, False, self.geometry.d_choice[station, neighbors])
                    if pick is not None:
                        target = int(neighbors[pick])
                        extra = self.geometry.d_choice[station, target] / self.geometry.speed_kmh * 60.0
                        if self.measuring:
                            self.report.diverted += 1
                        world.schedule(minute + max(1, int(math.floor(extra + 0.5))),
                                       Ride(ride.origin, target, float(station_offers[pick]), True))
                        return
            world.dock(station)
            self._credit(ride.payout)
            return

        if not ride.diverted or self.sim.count_diverted_full:
            self._record("full", station)
        cost = float(self.sampler.sample(self.customer_rng))
        final, path = overflow_walk(station, set(), world.fills, world.capacity, self.geometry, offers, cost)
        world.dock(final)
        self._credit(ride.payout + self._hop_payouts(station, path, offers))

    def _depart(self, minute: int):
        world = self.world
        M = self.timeline.departure_matrix(minute)
        counts = self.demand_rng.poisson(M)
        totals = counts.sum(axis=1)
        travel = self.geometry.travel_time
        for i in np.flatnonzero(totals):
            total = int(totals[i])
            if self.measuring:
                self.report.potential += total
            destinations = np.repeat(np.arange(len(M)), counts[i])
            available = int(world.fills[i])
            if total > available:
                destinations = self.demand_rng.permutation(destinations)[:available]
                for _ in range(total - available):
                    self._record("empty", int(i))
            for j in destinations:
                world.undock(int(i))
                world.schedule(minute + int(travel[i, j]), Ride(int(i), int(j)))

    def step_minute(self, minute: int):
        self.world.clock = minute
        self._execute_trucks(minute)
        self._tick_controllers(minute)
        for ride in self.world.arrivals(minute):
            self._arrive(minute, ride)
        self._depart(minute)
        self.world.check_conservation()

    def run(self) -> SimReport:
        total = len(self.sim.day_types) * MINUTES_PER_DAY
        for minute in range(total):
            self.step_minute(minute)
        logger.info("Run %s: service level %.4f (%d potential, %d empty, %d full, payouts %.2f)",
                    run_id(self.sim.day_type, self.sim.trucks, self.sim.alpha, self.sim.seed),
                    self.report.service_level, self.report.potential, self.report.empty_events,
                    self.report.full_events, self.report.payout_total)
        return self.report

    def write_events(self, path: str):
        write_csv(path, self.events, EVENT_COLUMNS)


def run(bundle: ModelBundle, settings: Optional[LabSettings] = None, sim: Optional[SimConfig] = None,
        event_log: Optional[str] = None) -> SimReport:
    """Simulate burn-in plus measured days and return the measured statistics."""
    simulator = Simulator(bundle, settings, sim)
    report = simulator.run()
    if event_log:
        simulator.write_events(event_log)
    return report
