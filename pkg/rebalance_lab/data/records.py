"""Record types of the ride corpus."""

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import Dict, List, Sequence

import numpy as np

from ..config.settings import MINUTES_PER_DAY
from ..core.errors import DataError

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"


@dataclass(frozen=True)
class RideRecord:
    """One historical journey; times are minutes since the corpus epoch."""

    bike_id: int
    start_time: int
    start_station: int
    end_time: int
    end_station: int

    @property
    def duration(self) -> int:
        return self.end_time - self.start_time


def ride_order(ride: RideRecord):
    """Canonical chronological ordering of rides."""
    return (ride.start_time, ride.end_time, ride.start_station, ride.end_station, ride.bike_id)


@dataclass(frozen=True)
class StationRecord:
    id: int
    name: str
    lat: float
    lon: float
    size: int


@dataclass(frozen=True)
class Snapshot:
    """Docked-bike count per station id at minute ``time``."""

    time: int
    fill: Dict[int, int]

    @property
    def total(self) -> int:
        return int(sum(self.fill.values()))


class DayCalendar:
    """Maps minutes since the epoch onto days and day types.

    Timestamps are local civil time without DST correction.
    """

    def __init__(self, epoch: str = "2010-07-26"):
        self.epoch = datetime.strptime(epoch, "%Y-%m-%d")

    def day_of(self, minute: int) -> int:
        return int(minute) // MINUTES_PER_DAY

    def date_of(self, day: int) -> date:
        return (self.epoch + timedelta(days=int(day))).date()

    def day_type(self, day: int) -> str:
        return "weekend" if self.date_of(day).weekday() >= 5 else "weekday"

    def to_minutes(self, stamp: datetime) -> int:
        return int((stamp - self.epoch).total_seconds() // 60)

    def format(self, minute: int) -> str:
        return (self.epoch + timedelta(minutes=int(minute))).strftime(TIMESTAMP_FORMAT)


@dataclass
class StationTable:
    """Station records plus the dense index used by every numerical module."""

    records: List[StationRecord]
    index: Dict[int, int] = field(init=False)

    def __post_init__(self):
        self.index = {}
        for i, rec in enumerate(self.records):
            if rec.id in self.index:
                raise DataError(f"duplicate station id {rec.id}")
            if rec.size < 1:
                raise DataError(f"station {rec.id} has non-positive size {rec.size}")
            self.index[rec.id] = i

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> np.ndarray:
        return np.array([r.id for r in self.records], dtype=int)

    @property
    def capacity(self) -> np.ndarray:
        return np.array([r.size for r in self.records], dtype=int)

    @property
    def latlon(self) -> np.ndarray:
        return np.array([[r.lat, r.lon] for r in self.records], dtype=float)

    def position(self, station_id: int) -> int:
        try:
            return self.index[station_id]
        except KeyError:
            raise DataError(f"unknown station id {station_id}") from None

    def fill_vector(self, snapshot: Snapshot) -> np.ndarray:
        """Dense integer fill array aligned with the table order."""
        fills = np.zeros(len(self), dtype=int)
        for station_id, count in snapshot.fill.items():
            fills[self.position(station_id)] = count
        return fills


@dataclass
class RideArrays:
    """Column view of a ride list, station ids replaced by table positions."""

    start_time: np.ndarray
    end_time: np.ndarray
    origin: np.ndarray
    destination: np.ndarray

    @classmethod
    def from_records(cls, rides: Sequence[RideRecord], stations: StationTable) -> "RideArrays":
        n = len(rides)
        arrays = cls(
            start_time=np.empty(n, dtype=np.int64),
            end_time=np.empty(n, dtype=np.int64),
            origin=np.empty(n, dtype=int),
            destination=np.empty(n, dtype=int),
        )
        for k, ride in enumerate(rides):
            arrays.start_time[k] = ride.start_time
            arrays.end_time[k] = ride.end_time
            arrays.origin[k] = stations.position(ride.start_station)
            arrays.destination[k] = stations.position(ride.end_station)
        return arrays

    def __len__(self) -> int:
        return len(self.start_time)

    @property
    def duration(self) -> np.ndarray:
        return self.end_time - self.start_time
