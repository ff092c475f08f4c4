"""Time-varying origin-destination rate model.

Rates are averaged over the recorded history: every observed day of a day
type contributes ``SLICE_MINUTES`` minutes to each of its 72 slices, and a
slice rate is the ride count in that cell divided by its minute count.
Departures are binned by start time, arrivals by end time.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..config.settings import DAY_TYPES, MINUTES_PER_DAY, SLICE_MINUTES, SLICES_PER_DAY
from ..core.errors import DataError
from ..data.records import DayCalendar, RideArrays

logger = logging.getLogger(__name__)

DEFAULT_SPEED_KMH = 12.0


def slice_of(minute) -> np.ndarray:
    """Slice index (0..71) of a minute since the epoch."""
    return (np.asarray(minute) % MINUTES_PER_DAY) // SLICE_MINUTES


def day_type_index(day_type: str) -> int:
    try:
        return DAY_TYPES.index(day_type)
    except ValueError:
        raise DataError(f"unknown day type {day_type!r}") from None


@dataclass(frozen=True)
class FlowSummary:
    """Expected departures, arrivals and net change per station and minute."""

    mu: np.ndarray
    lam: np.ndarray
    eta: np.ndarray


@dataclass
class RateModel:
    """Per-minute OD rates ``M`` (departures) and ``Lam`` (arrivals).

    Both tensors are indexed ``[day_type][slice][origin][destination]``;
    ``hist_minutes[day_type][slice]`` is the averaging denominator.
    """

    M: np.ndarray
    Lam: np.ndarray
    hist_minutes: np.ndarray
    epoch: str = "2010-07-26"

    @property
    def station_count(self) -> int:
        return self.M.shape[-1]

    @property
    def departures(self) -> np.ndarray:
        """mu per [day_type][slice][station]."""
        return self.M.sum(axis=3)

    @property
    def arrivals(self) -> np.ndarray:
        """lambda per [day_type][slice][station]."""
        return self.Lam.sum(axis=2)

    def save(self, path: str):
        np.savez_compressed(path, M=self.M, Lam=self.Lam, hist_minutes=self.hist_minutes,
                            epoch=np.array(self.epoch))

    @classmethod
    def load(cls, path: str) -> "RateModel":
        try:
            with np.load(path) as data:
                return cls(M=data["M"], Lam=data["Lam"], hist_minutes=data["hist_minutes"],
                           epoch=str(data["epoch"]))
        except (OSError, KeyError, ValueError) as e:
            raise DataError(f"unreadable rate model cache: {e}", path=path) from e


def fit_rates(rides: RideArrays, station_count: int, calendar: DayCalendar) -> RateModel:
    """Average departure and arrival counts per (day type, slice, origin, destination)."""
    shape = (len(DAY_TYPES), SLICES_PER_DAY, station_count, station_count)
    counts_m = np.zeros(shape)
    counts_l = np.zeros(shape)
    hist = np.zeros((len(DAY_TYPES), SLICES_PER_DAY), dtype=np.int64)
    if len(rides) == 0:
        logger.warning("No rides in corpus; rate model is all zero")
        return RateModel(counts_m, counts_l, hist, epoch=calendar.epoch.strftime("%Y-%m-%d"))

    start_day = rides.start_time // MINUTES_PER_DAY
    end_day = rides.end_time // MINUTES_PER_DAY
    # a history day is one on which rides start; spill-over arrivals add no day
    observed = np.unique(start_day)
    seen = np.unique(np.concatenate([start_day, end_day]))
    day_types = {int(d): day_type_index(calendar.day_type(int(d))) for d in seen}
    for d in observed:
        hist[day_types[int(d)], :] += SLICE_MINUTES

    w_start = np.array([day_types[int(d)] for d in start_day], dtype=int)
    w_end = np.array([day_types[int(d)] for d in end_day], dtype=int)
    np.add.at(counts_m, (w_start, slice_of(rides.start_time), rides.origin, rides.destination), 1.0)
    np.add.at(counts_l, (w_end, slice_of(rides.end_time), rides.origin, rides.destination), 1.0)

    empty = hist == 0
    if empty.any():
        missing = [DAY_TYPES[w] for w in range(len(DAY_TYPES)) if empty[w].all()]
        logger.warning("No history for day type(s) %s; their rates are zero", missing)
    denom = np.where(empty, 1, hist)[:, :, None, None]
    model = RateModel(counts_m / denom, counts_l / denom, hist, epoch=calendar.epoch.strftime("%Y-%m-%d"))
    logger.info("Fitted rates over %d observed days (%d rides)", len(observed), len(rides))
    return model


def flow_summary(model: RateModel, minute: int, calendar: Optional[DayCalendar] = None) -> FlowSummary:
    """Station flows at ``minute`` since the model epoch."""
    calendar = calendar or DayCalendar(model.epoch)
    w = day_type_index(calendar.day_type(calendar.day_of(minute)))
    k = int(slice_of(minute))
    mu = model.M[w, k].sum(axis=1)
    lam = model.Lam[w, k].sum(axis=0)
    return FlowSummary(mu=mu, lam=lam, eta=lam - mu)


def median_speed(rides: RideArrays, d_eucl: np.ndarray) -> float:
    """Median cycling speed (km/h) over non-loop rides of positive duration."""
    if len(rides) == 0:
        return DEFAULT_SPEED_KMH
    duration = rides.duration
    moving = (rides.origin != rides.destination) & (duration > 0)
    if not moving.any():
        return DEFAULT_SPEED_KMH
    speed = d_eucl[rides.origin[moving], rides.destination[moving]] / (duration[moving] / 60.0)
    speed = speed[speed > 0]
    return float(np.median(speed)) if speed.size else DEFAULT_SPEED_KMH


def travel_times(rides: RideArrays, d_eucl: np.ndarray) -> Tuple[np.ndarray, float]:
    """Mean ride duration per OD pair in whole minutes (at least 1).

    Pairs without history fall back to ``d_eucl`` at the corpus median speed,
    which is returned alongside.
    """
    n = d_eucl.shape[0]
    speed = median_speed(rides, d_eucl)
    total = np.zeros((n, n))
    count = np.zeros((n, n))
    if len(rides):
        np.add.at(total, (rides.origin, rides.destination), rides.duration.astype(float))
        np.add.at(count, (rides.origin, rides.destination), 1.0)
    fallback = d_eucl / speed * 60.0
    mean = np.where(count > 0, total / np.maximum(count, 1.0), fallback)
    return np.maximum(1, np.floor(mean + 0.5)).astype(int), speed


class DemandTimeline:
    """Per-minute flows over a run, one day type per simulated day.

    Minute 0 is midnight of the first day. The day-type sequence wraps
    cyclically, and one extra day is materialized so that look-ahead windows
    starting inside the run never run off the end.
    """

    def __init__(self, model: RateModel, day_types: Sequence[str], lookahead: int = MINUTES_PER_DAY):
        if not day_types:
            raise DataError("day-type sequence must be nonempty")
        self.model = model
        self.day_types = tuple(day_types)
        self.horizon = len(self.day_types) * MINUTES_PER_DAY
        self.length = self.horizon + lookahead

        minutes = np.arange(self.length)
        self._w = np.array([day_type_index(self.day_type_at(m)) for m in range(0, self.length, MINUTES_PER_DAY)])
        w = self._w[minutes // MINUTES_PER_DAY]
        k = slice_of(minutes)
        self.mu = model.departures[w, k]
        self.lam = model.arrivals[w, k]
        self.eta = self.lam - self.mu

    def day_type_at(self, minute: int) -> str:
        return self.day_types[(int(minute) // MINUTES_PER_DAY) % len(self.day_types)]

    def departure_matrix(self, minute: int) -> np.ndarray:
        """OD departure rates ``M`` in force at ``minute``."""
        w = self._w[int(minute) // MINUTES_PER_DAY]
        return self.model.M[w, int(slice_of(minute))]

    def window(self, start: int, length: int) -> np.ndarray:
        """``eta`` rows for minutes ``start .. start + length - 1``, clipped to the timeline."""
        stop = min(int(start) + int(length), self.length)
        return self.eta[int(start):stop]
