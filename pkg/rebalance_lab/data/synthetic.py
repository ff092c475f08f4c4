"""Synthetic substitute corpus.

Origin-destination pairs come from a gravity kernel, weight
``exp(-distance / sigma)``. Weekdays add a morning commuter peak that flows
from the outskirts toward central stations and the reverse flow in the
evening; weekends keep only the flat base profile. Journeys start between
06:00 and midnight.
"""

import logging
from typing import List, Tuple

import numpy as np

from ..config.settings import MINUTES_PER_DAY, SyntheticSpec
from ..core.errors import DataError
from ..core.seeding import CORPUS_STREAM, stream
from ..utils.helpers import unproject_km
from .corpus import Corpus
from .records import DayCalendar, RideRecord, Snapshot, StationRecord, StationTable, ride_order

logger = logging.getLogger(__name__)

SERVICE_START = 6 * 60
LOOP_WEIGHT = 0.2


def _place_stations(spec: SyntheticSpec, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    radius = spec.radius_km * np.sqrt(rng.random(spec.station_count))
    angle = rng.random(spec.station_count) * 2 * np.pi
    xy = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    capacity = rng.integers(spec.min_capacity, spec.max_capacity + 1, spec.station_count)
    return xy, capacity


def _kernels(spec: SyntheticSpec, xy: np.ndarray) -> Tuple[Tuple[np.ndarray, ...], np.ndarray]:
    dist = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=2)
    base = np.exp(-dist / spec.gravity_sigma_km)
    np.fill_diagonal(base, LOOP_WEIGHT)
    centrality = np.exp(-np.linalg.norm(xy, axis=1) / (0.5 * spec.radius_km))
    morning = base * (1.1 - centrality)[:, None] * centrality[None, :]
    evening = morning.T.copy()
    return tuple(k.ravel() / k.sum() for k in (base, morning, evening)), dist


def _profiles(spec: SyntheticSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-minute system-wide departure intensity of each flow component."""
    minutes = np.arange(SERVICE_START, MINUTES_PER_DAY)
    hours = minutes / 60.0
    base = np.full(minutes.size, spec.base_rate * spec.station_count / 60.0)

    def bump(height, center, width):
        return base * height * np.exp(-0.5 * ((hours - center) / width) ** 2)

    morning = bump(spec.morning_peak_height, spec.morning_peak_hour, spec.morning_peak_width)
    evening = bump(spec.evening_peak_height, spec.evening_peak_hour, spec.evening_peak_width)
    return base, morning, evening


def _allocate_fleet(fleet: int, capacity: np.ndarray) -> np.ndarray:
    share = fleet * capacity / capacity.sum()
    fill = np.floor(share).astype(int)
    remainder = share - fill
    for i in np.argsort(-remainder, kind="stable")[: fleet - fill.sum()]:
        fill[i] += 1
    return np.minimum(fill, capacity)


def _select_days(spec: SyntheticSpec, calendar: DayCalendar) -> List[Tuple[int, str]]:
    wanted = {"weekday": spec.weekday_days, "weekend": spec.weekend_days}
    days, day = [], 0
    while any(wanted.values()):
        day_type = calendar.day_type(day)
        if wanted[day_type] > 0:
            days.append((day, day_type))
            wanted[day_type] -= 1
        day += 1
    return days


def generate_synthetic(spec: SyntheticSpec) -> Corpus:
    """Generate stations, rides and the initial snapshot; deterministic in ``spec.seed``."""
    spec.validate()
    rng = stream(spec.seed, CORPUS_STREAM)
    calendar = DayCalendar(spec.epoch)

    xy, capacity = _place_stations(spec, rng)
    if spec.fleet_size > capacity.sum():
        raise DataError(f"infeasible spec: fleet {spec.fleet_size} exceeds total capacity {capacity.sum()}")
    latlon = unproject_km(xy, (spec.center_lat, spec.center_lon))
    records = [
        StationRecord(id=i + 1, name=f"Synthetic {i + 1}", lat=round(float(lat), 6),
                      lon=round(float(lon), 6), size=int(cap))
        for i, ((lat, lon), cap) in enumerate(zip(latlon, capacity))
    ]
    stations = StationTable(records)

    kernels, dist = _kernels(spec, xy)
    base, morning, evening = _profiles(spec)
    km_per_minute = spec.cycling_speed_kmh / 60.0
    n = spec.station_count

    rides: List[RideRecord] = []
    for day, day_type in _select_days(spec, calendar):
        components = [(base, kernels[0])]
        if day_type == "weekday":
            components += [(morning, kernels[1]), (evening, kernels[2])]
        for intensity, kernel in components:
            counts = rng.poisson(intensity)
            total = int(counts.sum())
            if total == 0:
                continue
            starts = day * MINUTES_PER_DAY + SERVICE_START + np.repeat(np.arange(intensity.size), counts)
            pairs = rng.choice(n * n, size=total, p=kernel)
            origin, destination = np.divmod(pairs, n)
            noise = rng.lognormal(0.0, 0.25, total)
            ride_minutes = np.maximum(1, np.rint(dist[origin, destination] / km_per_minute * noise)).astype(int)
            loops = origin == destination
            ride_minutes[loops] = rng.integers(10, 40, int(loops.sum()))
            bikes = rng.integers(1, max(spec.fleet_size, 1) + 1, total)
            for b, t0, o, d, m in zip(bikes, starts, origin, destination, ride_minutes):
                rides.append(RideRecord(int(b), int(t0), int(o) + 1, int(t0 + m), int(d) + 1))
    rides.sort(key=ride_order)

    fill = _allocate_fleet(spec.fleet_size, capacity)
    snapshot = Snapshot(time=0, fill={rec.id: int(f) for rec, f in zip(records, fill)})
    logger.info("Generated synthetic corpus: %d stations, %d rides, %d bikes", n, len(rides), snapshot.total)
    return Corpus(stations, rides, snapshot, calendar)
