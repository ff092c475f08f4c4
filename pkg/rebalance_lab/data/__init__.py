"""Corpus records, file formats and the synthetic generator."""

from .corpus import (
    Corpus,
    load_rides,
    load_snapshot,
    load_stations,
    validate_snapshot,
    write_rides,
    write_snapshot,
    write_stations,
)
from .records import DayCalendar, RideArrays, RideRecord, Snapshot, StationRecord, StationTable
from .synthetic import generate_synthetic

__all__ = [
    'Corpus',
    'DayCalendar',
    'RideArrays',
    'RideRecord',
    'Snapshot',
    'StationRecord',
    'StationTable',
    'generate_synthetic',
    'load_rides',
    'load_snapshot',
    'load_stations',
    'validate_snapshot',
    'write_rides',
    'write_snapshot',
    'write_stations',
]
