"""Mutable state of one simulated bike-sharing system."""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import DefaultDict, List

import numpy as np

from ..core.errors import SimulationError

logger = logging.getLogger(__name__)


@dataclass
class Ride:
    """A bike on its way to ``destination``."""

    origin: int
    destination: int
    payout: float = 0.0     # credited when the bike docks
    diverted: bool = False  # already accepted an offer


@dataclass
class WorldState:
    clock: int
    fills: np.ndarray
    capacity: np.ndarray
    fleet_size: int
    truck_loads: np.ndarray
    in_transit: DefaultDict[int, List[Ride]] = field(default_factory=lambda: defaultdict(list))

    @classmethod
    def initial(cls, fills: np.ndarray, capacity: np.ndarray, trucks: int = 0) -> "WorldState":
        fills = np.asarray(fills, dtype=int).copy()
        capacity = np.asarray(capacity, dtype=int)
        if np.any(fills < 0) or np.any(fills > capacity):
            raise SimulationError("initial fills outside station bounds")
        return cls(clock=0, fills=fills, capacity=capacity, fleet_size=int(fills.sum()),
                   truck_loads=np.zeros(trucks, dtype=int))

    @property
    def riding(self) -> int:
        return sum(len(rides) for rides in self.in_transit.values())

    def schedule(self, minute: int, ride: Ride):
        self.in_transit[int(minute)].append(ride)

    def arrivals(self, minute: int) -> List[Ride]:
        return self.in_transit.pop(int(minute), [])

    def has_space(self, station: int) -> bool:
        return self.fills[station] < self.capacity[station]

    def dock(self, station: int):
        if not self.has_space(station):
            raise SimulationError(f"docking at full station {station}")
        self.fills[station] += 1

    def undock(self, station: int):
        if self.fills[station] <= 0:
            raise SimulationError(f"renting from empty station {station}")
        self.fills[station] -= 1

    def apply_truck(self, truck: int, station: int, df: int, l_max: int) -> int:
        """Move up to ``df`` bikes into ``station``, clamped to truck and station limits.

        Returns the bikes actually moved.
        """
        load = int(self.truck_loads[truck])
        if df > 0:
            moved = min(df, load, int(self.capacity[station] - self.fills[station]))
        else:
            moved = -min(-df, int(self.fills[station]), l_max - load)
        self.fills[station] += moved
        self.truck_loads[truck] = load - moved
        return moved

    def check_conservation(self):
        total = int(self.fills.sum()) + self.riding + int(self.truck_loads.sum())
        if total != self.fleet_size:
            raise SimulationError(f"minute {self.clock}: {total} bikes accounted for, fleet is {self.fleet_size}")
        if np.any(self.fills < 0) or np.any(self.fills > self.capacity):
            raise SimulationError(f"minute {self.clock}: station fill outside bounds")
