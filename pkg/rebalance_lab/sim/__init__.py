"""Closed-loop simulation, sweeps and reports."""

from .report import station_events, tradeoff_table
from .simulator import EVENT_COLUMNS, REPORT_COLUMNS, SimReport, Simulator, run, run_id
from .sweep import aggregate, grid_points, run_sweep
from .world import Ride, WorldState

__all__ = [
    'EVENT_COLUMNS',
    'REPORT_COLUMNS',
    'Ride',
    'SimReport',
    'Simulator',
    'WorldState',
    'aggregate',
    'grid_points',
    'run',
    'run_id',
    'run_sweep',
    'station_events',
    'tradeoff_table',
]
