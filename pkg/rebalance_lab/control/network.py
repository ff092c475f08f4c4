"""Time-expanded station network used for truck routing.

Vertices are (station, grid step) pairs on a 5-minute grid. Predicted fills
are held at minute resolution and read at grid times, so folding a
repositioning action into the network re-propagates one station row from the
action minute onward.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import MINUTES_PER_DAY, RoutingConfig
from ..core.errors import ConfigError
from ..model.demand import DemandTimeline
from ..model.utility import PlateauTable, propagate_fill

logger = logging.getLogger(__name__)


def effective_journey_time(distance_km, km_per_step: float = 1.25):
    """Truck travel plus handling time in grid steps: ``ceil(d / 1.25) + 1``."""
    steps = np.ceil(np.asarray(distance_km, dtype=float) / km_per_step - 1e-9)
    result = np.maximum(steps, 0).astype(int) + 1
    return int(result) if result.ndim == 0 else result


def depot_station(xy: np.ndarray, station_ids: Optional[Sequence[int]] = None,
                  configured: Optional[int] = None) -> int:
    """Position of the depot: the configured station id, else the station nearest the centroid."""
    if configured is not None:
        ids = list(station_ids) if station_ids is not None else list(range(len(xy)))
        if configured not in ids:
            raise ConfigError(f"depot station {configured} is not in the station table")
        return ids.index(configured)
    return int(np.argmin(np.linalg.norm(xy - xy.mean(axis=0), axis=1)))


@dataclass(frozen=True)
class PlannedAction:
    """A repositioning action at vertex ``(station, minute)``; ``load`` is after the action."""

    truck: int
    station: int
    minute: int
    df: int
    load: int
    start: int  # minute the journey to this stop begins


@dataclass
class _Fold:
    station: int
    index: int
    saved: np.ndarray


class TimeExpandedNetwork:
    """Predicted fills and truck arcs from ``now`` to the end of the operating window."""

    def __init__(self, fills: np.ndarray, capacity: np.ndarray, now: int, timeline: DemandTimeline,
                 plateaus: PlateauTable, dbar: np.ndarray, depot: int, config: RoutingConfig,
                 window_end: int, horizon_minutes: int, station_ids: Optional[Sequence[int]] = None):
        self.capacity = np.asarray(capacity, dtype=float)
        self.now = int(now)
        self.step = config.step_minutes
        self.base = -(-self.now // self.step) * self.step
        self.window_end = int(window_end)
        self.dbar = dbar
        self.depot = int(depot)
        self.config = config
        self.plateaus = plateaus
        self.station_ids = np.asarray(station_ids) if station_ids is not None else np.arange(len(capacity))

        end = min(self.window_end, self.base + horizon_minutes, timeline.length - 1)
        end = max(end, self.base)
        self.steps = (end - self.base) // self.step + 1
        self._eta = timeline.window(self.now, end - self.now + 1)
        self.fills = propagate_fill(np.asarray(fills, dtype=float), self._eta[: end - self.now], self.capacity)

        home = self.dbar[:, self.depot] * self.step
        home[self.depot] = 0
        self._home_minutes = home
        self._folds: List[_Fold] = []

    @property
    def station_count(self) -> int:
        return len(self.capacity)

    def time_of(self, k: int) -> int:
        return self.base + int(k) * self.step

    def step_of(self, minute: int) -> int:
        return (int(minute) - self.base) // self.step

    def _row(self, minute: int) -> int:
        return int(minute) - self.now

    def fill(self, station: int, k: int) -> float:
        return float(self.fills[self._row(self.time_of(k)), station])

    def fills_at(self, k: int) -> np.ndarray:
        return self.fills[self._row(self.time_of(k))]

    def plateau(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        lower, upper, _ = self.plateaus.row(self.time_of(k))
        return lower, upper

    def live(self, station: int, k: int) -> bool:
        if not 0 <= k < self.steps:
            return False
        return self.time_of(k) + self._home_minutes[station] <= self.window_end

    def live_mask(self, k_next: np.ndarray) -> np.ndarray:
        """Liveness of ``(s, k_next[s])`` for every station ``s``."""
        inside = (k_next >= 0) & (k_next < self.steps)
        return inside & (self.base + k_next * self.step + self._home_minutes <= self.window_end)

    def successors(self, station: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """Live vertices reachable from ``(station, k)`` by one arc, excluding ``station`` itself."""
        k_next = k + self.dbar[station]
        mask = self.live_mask(k_next)
        mask[station] = False
        targets = np.flatnonzero(mask)
        return targets, k_next[targets]

    def arcs_from(self, station: int, k: int) -> List[Tuple[Tuple[int, int], Tuple[int, int]]]:
        targets, k_next = self.successors(station, k)
        return [((station, k), (int(s), int(kn))) for s, kn in zip(targets, k_next)]

    def fold(self, station: int, minute: int, df: float) -> int:
        """Apply ``df`` at ``(station, minute)`` to the predicted fills; returns an undo token."""
        index = self._row(minute)
        if index < 0 or index >= len(self.fills) or df == 0:
            self._folds.append(_Fold(station, len(self.fills), np.zeros(0)))
            return len(self._folds) - 1
        saved = self.fills[index:, station].copy()
        start = min(max(self.fills[index, station] + df, 0.0), self.capacity[station])
        self.fills[index:, station] = propagate_fill(start, self._eta[index:len(self.fills) - 1, station],
                                                     self.capacity[station])
        self._folds.append(_Fold(station, index, saved))
        return len(self._folds) - 1

    def unfold(self, token: int):
        """Undo folds back to and including ``token`` (last in, first out)."""
        while len(self._folds) > token:
            fold = self._folds.pop()
            if fold.saved.size:
                self.fills[fold.index:, fold.station] = fold.saved

    def fold_actions(self, actions: Iterable[PlannedAction]):
        for action in actions:
            if action.df:
                self.fold(action.station, action.minute, action.df)


def build_network(fills: np.ndarray, capacity: np.ndarray, now: int, timeline: DemandTimeline,
                  plateaus: PlateauTable, xy: np.ndarray, config: RoutingConfig,
                  window_end: Optional[int] = None, depot: Optional[int] = None,
                  committed: Iterable[PlannedAction] = (), station_ids=None) -> TimeExpandedNetwork:
    """Network from current fills with already committed truck actions folded in."""
    d_eucl = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=2)
    dbar = effective_journey_time(d_eucl, config.km_per_step)
    depot = depot_station(xy, station_ids, config.depot) if depot is None else depot
    if window_end is None:
        window_end = (now // MINUTES_PER_DAY) * MINUTES_PER_DAY + config.window_end
    horizon = config.t_impl + config.t_truck + (config.n_truck + 1) * int(dbar.max()) * config.step_minutes
    network = TimeExpandedNetwork(fills, capacity, now, timeline, plateaus, dbar, depot, config,
                                  window_end, horizon, station_ids)
    network.fold_actions(committed)
    logger.debug("Network at minute %d: %d steps, depot %d", now, network.steps, depot)
    return network
