"""Reading and writing ride, station and snapshot files.

Ride CSV columns: ``bike-id, start-date, start-station-id, end-date,
end-station-id``; station CSV columns: ``id, name, lat, lon, size``;
snapshots are JSON ``{"time": int, "fill": {station_id: int}}``.
"""

import json
import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence

import pandas as pd

from ..core.errors import DataError
from .records import (
    TIMESTAMP_FORMAT,
    DayCalendar,
    RideArrays,
    RideRecord,
    Snapshot,
    StationRecord,
    StationTable,
    ride_order,
)

logger = logging.getLogger(__name__)

RIDE_COLUMNS = ["bike-id", "start-date", "start-station-id", "end-date", "end-station-id"]
STATION_COLUMNS = ["id", "name", "lat", "lon", "size"]


def _read_csv(path: str, columns: List[str]) -> pd.DataFrame:
    if not os.path.exists(path):
        raise DataError("file not found", path=path)
    if os.path.getsize(path) == 0:
        return pd.DataFrame(columns=columns, dtype=str)
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False)
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataError(f"unreadable CSV: {e}", path=path) from e
    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataError(f"missing columns {missing}", lines=[1], path=path)
    return frame[columns].apply(lambda col: col.str.strip())


def _line_numbers(mask: pd.Series) -> List[int]:
    # header is line 1, first data row line 2
    return [int(i) + 2 for i in mask[mask].index]


def _integers(frame: pd.DataFrame, column: str, path: str) -> pd.Series:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | (values % 1 != 0)
    if bad.any():
        raise DataError(f"column '{column}' must hold integers", lines=_line_numbers(bad), path=path)
    return values.astype("int64")


def load_stations(path: str) -> List[StationRecord]:
    """Load and validate the station table."""
    frame = _read_csv(path, STATION_COLUMNS)
    ids = _integers(frame, "id", path)
    sizes = _integers(frame, "size", path)
    lat = pd.to_numeric(frame["lat"], errors="coerce")
    lon = pd.to_numeric(frame["lon"], errors="coerce")
    bad = lat.isna() | lon.isna()
    if bad.any():
        raise DataError("unparsable coordinates", lines=_line_numbers(bad), path=path)
    dup = ids.duplicated(keep="first")
    if dup.any():
        raise DataError("duplicate station id", lines=_line_numbers(dup), path=path)
    nonpos = sizes < 1
    if nonpos.any():
        raise DataError("station size must be >= 1", lines=_line_numbers(nonpos), path=path)
    return [
        StationRecord(id=int(i), name=str(n), lat=float(a), lon=float(o), size=int(s))
        for i, n, a, o, s in zip(ids, frame["name"], lat, lon, sizes)
    ]


def load_rides(path: str, stations: Optional[StationTable] = None,
               calendar: Optional[DayCalendar] = None) -> List[RideRecord]:
    """Load rides as records sorted by start time.

    Unknown station ids, unparsable timestamps and rides ending before they
    start are hard errors naming the offending lines.
    """
    calendar = calendar or DayCalendar()
    frame = _read_csv(path, RIDE_COLUMNS)
    if frame.empty:
        return []
    bikes = _integers(frame, "bike-id", path)
    origin = _integers(frame, "start-station-id", path)
    destination = _integers(frame, "end-station-id", path)
    start = pd.to_datetime(frame["start-date"], format=TIMESTAMP_FORMAT, errors="coerce")
    end = pd.to_datetime(frame["end-date"], format=TIMESTAMP_FORMAT, errors="coerce")
    bad = start.isna() | end.isna()
    if bad.any():
        raise DataError("unparsable timestamp", lines=_line_numbers(bad), path=path)
    backwards = end < start
    if backwards.any():
        raise DataError("ride ends before it starts", lines=_line_numbers(backwards), path=path)
    if stations is not None:
        unknown = ~origin.isin(stations.index.keys()) | ~destination.isin(stations.index.keys())
        if unknown.any():
            raise DataError("unknown station id", lines=_line_numbers(unknown), path=path)

    epoch = pd.Timestamp(calendar.epoch)
    start_min = ((start - epoch) // pd.Timedelta(minutes=1)).astype("int64")
    end_min = ((end - epoch) // pd.Timedelta(minutes=1)).astype("int64")
    rides = [
        RideRecord(int(b), int(s0), int(o), int(s1), int(d))
        for b, s0, o, s1, d in zip(bikes, start_min, origin, end_min, destination)
    ]
    rides.sort(key=ride_order)
    return rides


def write_rides(path: str, rides: Sequence[RideRecord], calendar: Optional[DayCalendar] = None):
    calendar = calendar or DayCalendar()
    rows = [
        (r.bike_id, calendar.format(r.start_time), r.start_station, calendar.format(r.end_time), r.end_station)
        for r in rides
    ]
    pd.DataFrame(rows, columns=RIDE_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def write_stations(path: str, stations: Sequence[StationRecord]):
    rows = [(s.id, s.name, repr(float(s.lat)), repr(float(s.lon)), s.size) for s in stations]
    pd.DataFrame(rows, columns=STATION_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def load_snapshot(path: str, stations: Optional[StationTable] = None) -> Snapshot:
    if not os.path.exists(path):
        raise DataError("file not found", path=path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        snapshot = Snapshot(time=int(payload["time"]),
                            fill={int(k): int(v) for k, v in payload["fill"].items()})
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed snapshot: {e}", path=path) from e
    if stations is not None:
        validate_snapshot(snapshot, stations)
    return snapshot


def write_snapshot(path: str, snapshot: Snapshot):
    payload = {"time": snapshot.time, "fill": {str(k): int(v) for k, v in sorted(snapshot.fill.items())}}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def validate_snapshot(snapshot: Snapshot, stations: StationTable, fleet_size: Optional[int] = None):
    for station_id, count in snapshot.fill.items():
        size = stations.records[stations.position(station_id)].size
        if not 0 <= count <= size:
            raise DataError(f"snapshot fill {count} at station {station_id} outside [0, {size}]")
    if fleet_size is not None and snapshot.total != fleet_size:
        raise DataError(f"snapshot holds {snapshot.total} bikes, fleet size is {fleet_size}")


@dataclass
class Corpus:
    """Stations, rides and the initial snapshot of one dataset."""

    stations: StationTable
    rides: List[RideRecord]
    snapshot: Snapshot
    calendar: DayCalendar

    @property
    def fleet_size(self) -> int:
        return self.snapshot.total

    def ride_arrays(self) -> RideArrays:
        return RideArrays.from_records(self.rides, self.stations)

    @classmethod
    def load(cls, stations_path: str, rides_path: str, snapshot_path: str,
             epoch: str = "2010-07-26") -> "Corpus":
        calendar = DayCalendar(epoch)
        table = StationTable(load_stations(stations_path))
        rides = load_rides(rides_path, table, calendar)
        snapshot = load_snapshot(snapshot_path, table)
        logger.info("Loaded corpus: %d stations, %d rides, %d bikes", len(table), len(rides), snapshot.total)
        return cls(table, rides, snapshot, calendar)

    def save(self, directory: str) -> dict:
        os.makedirs(directory, exist_ok=True)
        paths = {
            "stations": os.path.join(directory, "stations.csv"),
            "rides": os.path.join(directory, "rides.csv"),
            "snapshot": os.path.join(directory, "snapshot.json"),
        }
        write_stations(paths["stations"], self.stations.records)
        write_rides(paths["rides"], self.rides, self.calendar)
        write_snapshot(paths["snapshot"], self.snapshot)
        return paths
