import filecmp
import json

import pytest

from rebalance_lab.config.settings import SyntheticSpec
from rebalance_lab.core.errors import DataError
from rebalance_lab.data import (
    Corpus,
    DayCalendar,
    Snapshot,
    StationTable,
    generate_synthetic,
    load_rides,
    load_snapshot,
    load_stations,
    validate_snapshot,
)

RIDE_HEADER = "bike-id,start-date,start-station-id,end-date,end-station-id\n"
STATION_HEADER = "id,name,lat,lon,size\n"


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def stations_csv(tmp_path):
    return _write(tmp_path / "stations.csv", STATION_HEADER
                  + "1, River St Clerkenwell, 51.5291, -0.1099, 18\n"
                  + "47, Warwick Avenue Station, 51.5235, -0.1837, 20\n")


def test_load_station_row(stations_csv):
    records = load_stations(stations_csv)
    assert records[0].id == 1
    assert records[0].name == "River St Clerkenwell"
    assert records[0].size == 18
    assert records[1].lat == pytest.approx(51.5235)


def test_duplicate_station_id_names_line(tmp_path):
    path = _write(tmp_path / "s.csv", STATION_HEADER + "1,a,51.5,-0.1,10\n1,b,51.6,-0.1,12\n")
    with pytest.raises(DataError) as info:
        load_stations(path)
    assert info.value.lines == (3,)


def test_zero_size_station_rejected(tmp_path):
    path = _write(tmp_path / "s.csv", STATION_HEADER + "1,a,51.5,-0.1,0\n")
    with pytest.raises(DataError):
        load_stations(path)


def test_load_ride_row(stations_csv, tmp_path):
    table = StationTable(load_stations(stations_csv))
    path = _write(tmp_path / "rides.csv", RIDE_HEADER + "3340, 2010-07-30 06:00:00, 47, 2010-07-30 06:22:00, 47\n")
    rides = load_rides(path, table, DayCalendar("2010-07-26"))
    assert len(rides) == 1
    ride = rides[0]
    assert ride.bike_id == 3340
    assert ride.start_station == ride.end_station == 47
    assert ride.duration == 22
    assert ride.start_time == 4 * 1440 + 6 * 60


def test_empty_ride_file(tmp_path):
    assert load_rides(_write(tmp_path / "r.csv", RIDE_HEADER)) == []
    assert load_rides(_write(tmp_path / "r0.csv", "")) == []


def test_backwards_ride_names_line(tmp_path):
    path = _write(tmp_path / "r.csv", RIDE_HEADER
                  + "1,2010-07-30 06:00:00,1,2010-07-30 06:10:00,1\n"
                  + "2,2010-07-30 06:30:00,1,2010-07-30 06:10:00,1\n")
    with pytest.raises(DataError) as info:
        load_rides(path)
    assert info.value.lines == (3,)
    assert "line 3" in str(info.value)


def test_unknown_station_and_bad_timestamp(stations_csv, tmp_path):
    table = StationTable(load_stations(stations_csv))
    unknown = _write(tmp_path / "u.csv", RIDE_HEADER + "1,2010-07-30 06:00:00,1,2010-07-30 06:10:00,99\n")
    with pytest.raises(DataError) as info:
        load_rides(unknown, table)
    assert info.value.lines == (2,)
    garbled = _write(tmp_path / "g.csv", RIDE_HEADER + "1,yesterday,1,2010-07-30 06:10:00,1\n")
    with pytest.raises(DataError):
        load_rides(garbled, table)


def test_rides_sorted_by_start(tmp_path):
    path = _write(tmp_path / "r.csv", RIDE_HEADER
                  + "2,2010-07-26 09:00:00,1,2010-07-26 09:10:00,1\n"
                  + "1,2010-07-26 08:00:00,1,2010-07-26 08:10:00,1\n")
    rides = load_rides(path)
    assert [r.bike_id for r in rides] == [1, 2]


def test_snapshot_validation(stations_csv, tmp_path):
    table = StationTable(load_stations(stations_csv))
    path = tmp_path / "snap.json"
    path.write_text(json.dumps({"time": 0, "fill": {"1": 5, "47": 3}}))
    snapshot = load_snapshot(str(path), table)
    assert snapshot.total == 8
    validate_snapshot(snapshot, table, fleet_size=8)
    with pytest.raises(DataError):
        validate_snapshot(snapshot, table, fleet_size=9)
    with pytest.raises(DataError):
        validate_snapshot(Snapshot(0, {1: 19}), table)


def test_synthetic_is_deterministic(tmp_path):
    spec = SyntheticSpec(station_count=6, fleet_size=40, weekday_days=1, weekend_days=1, seed=7)
    first = generate_synthetic(spec).save(str(tmp_path / "a"))
    second = generate_synthetic(spec).save(str(tmp_path / "b"))
    for kind in first:
        assert filecmp.cmp(first[kind], second[kind], shallow=False)


def test_synthetic_round_trips_through_files(tmp_path):
    spec = SyntheticSpec(station_count=5, fleet_size=30, weekday_days=1, weekend_days=0, seed=3)
    corpus = generate_synthetic(spec)
    paths = corpus.save(str(tmp_path))
    loaded = Corpus.load(paths["stations"], paths["rides"], paths["snapshot"], epoch=spec.epoch)
    assert loaded.fleet_size == 30
    assert len(loaded.rides) == len(corpus.rides)
    assert loaded.rides[0] == corpus.rides[0]
    assert list(loaded.stations.capacity) == list(corpus.stations.capacity)


def test_synthetic_weekday_peaks():
    spec = SyntheticSpec(station_count=20, fleet_size=200, weekday_days=4, weekend_days=0, seed=5)
    corpus = generate_synthetic(spec)
    hours = [0] * 24
    for ride in corpus.rides:
        hours[(ride.start_time % 1440) // 60] += 1
    assert hours[8] > hours[12]
    assert hours[17] > hours[12]
    assert sum(hours[:6]) == 0


def test_synthetic_infeasible_fleet():
    spec = SyntheticSpec(station_count=3, fleet_size=1000, max_capacity=10, min_capacity=10)
    with pytest.raises(DataError):
        generate_synthetic(spec)
