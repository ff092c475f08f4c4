"""Trade-off tables from run CSVs and event logs."""

import logging
import os
from typing import Iterable, Sequence

import pandas as pd

from ..core.errors import DataError
from .simulator import EVENT_COLUMNS, REPORT_COLUMNS
from .sweep import summary_rows

logger = logging.getLogger(__name__)

STATION_COLUMNS = ["station", "empty", "full", "total", "share"]


def read_runs(paths: Iterable[str]) -> pd.DataFrame:
    frames = []
    for path in paths:
        if not os.path.exists(path):
            raise DataError("run table not found", path=path)
        frame = pd.read_csv(path)
        missing = set(REPORT_COLUMNS) - set(frame.columns)
        if missing:
            raise DataError(f"not a run table; missing columns {sorted(missing)}", path=path)
        frames.append(frame)
    if not frames:
        raise DataError("no run tables given")
    return pd.concat(frames, ignore_index=True)


def tradeoff_table(paths: Sequence[str]) -> pd.DataFrame:
    """Per (day_type, R, alpha): service level mean, SE, 95 % CI, payouts and the empty/full split."""
    frame = read_runs(paths)
    table = summary_rows([frame])
    logger.info("Aggregated %d runs into %d grid cells", len(frame), len(table))
    return table


def station_events(event_log: str) -> pd.DataFrame:
    """No-service counts per station, most affected first."""
    if not os.path.exists(event_log):
        raise DataError("event log not found", path=event_log)
    events = pd.read_csv(event_log)
    if list(events.columns) != EVENT_COLUMNS:
        raise DataError(f"not an event log; expected columns {EVENT_COLUMNS}", path=event_log)
    if events.empty:
        return pd.DataFrame(columns=STATION_COLUMNS)
    counts = events.pivot_table(index="station", columns="kind", values="minute", aggfunc="count", fill_value=0)
    counts = counts.reindex(columns=["empty", "full"], fill_value=0).reset_index()
    counts["total"] = counts["empty"] + counts["full"]
    grand = counts["total"].sum()
    counts["share"] = counts["total"] / grand if grand else 0.0
    return counts.sort_values(["total", "station"], ascending=[False, True])[STATION_COLUMNS].reset_index(drop=True)
