"""Seeded parameter sweeps over truck count and payout weight."""

import dataclasses
import logging
import math
import os
from typing import List, Optional, Sequence, Tuple

import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import norm
from tqdm import tqdm

from ..config.settings import LabSettings, SweepConfig
from ..model.bundle import ModelBundle
from ..utils.helpers import write_csv
from .simulator import REPORT_COLUMNS, Simulator, run_id

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["day_type", "R", "alpha", "runs", "service_level_mean", "service_level_se",
                   "service_level_ci_low", "service_level_ci_high", "payout_mean", "empty_mean", "full_mean",
                   "truck_hours_mean"]
Z_95 = float(norm.ppf(0.975))

GridPoint = Tuple[str, int, float, int]


def grid_points(config: SweepConfig) -> List[GridPoint]:
    """Every (day_type, R, alpha, seed), sorted by (day_type, R, alpha, seed)."""
    points = [(d, r, a, s) for d in config.day_types for r in config.trucks for a in config.alphas
              for s in config.seeds]
    return sorted(points, key=lambda p: (p[0], p[1], p[2], p[3]))


def run_point(bundle: ModelBundle, settings: LabSettings, point: GridPoint) -> dict:
    day_type, trucks, alpha, seed = point
    sim = dataclasses.replace(settings.sim, day_type=day_type, trucks=trucks, alpha=alpha, seed=seed)
    return Simulator(bundle, settings, sim).run().to_row(sim)


def _completed(path: str) -> dict:
    if not os.path.exists(path):
        return {}
    frame = pd.read_csv(path)
    return {row["run_id"]: row for row in frame.to_dict("records")}


def run_sweep(bundle: ModelBundle, settings: LabSettings, out_path: Optional[str] = None,
              config: Optional[SweepConfig] = None, resume: bool = False) -> pd.DataFrame:
    """Run every grid point; with ``resume`` rows already in ``out_path`` are kept as they are."""
    config = config or settings.sweep
    points = grid_points(config)
    done = _completed(out_path) if (resume and out_path) else {}
    todo = [p for p in points if run_id(p[0], p[1], p[2], p[3]) not in done]
    if done:
        logger.info("Resuming sweep: %d of %d runs already complete", len(points) - len(todo), len(points))

    fresh = Parallel(n_jobs=config.jobs)(
        delayed(run_point)(bundle, settings, p) for p in tqdm(todo, desc="sweep", unit="run", disable=not todo))
    rows = {r["run_id"]: r for r in fresh}
    rows.update(done)
    ordered = [rows[run_id(*p)] for p in points]
    frame = pd.DataFrame(ordered, columns=REPORT_COLUMNS)
    if out_path:
        write_csv(out_path, ordered, REPORT_COLUMNS)
    return frame


def aggregate(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean, standard error and normal 95 % interval of the service level per (day_type, R, alpha)."""
    rows = []
    for (day_type, trucks, alpha), group in frame.groupby(["day_type", "R", "alpha"], sort=True):
        n = len(group)
        mean = float(group["service_level"].mean())
        se = float(group["service_level"].std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        rows.append({
            "day_type": day_type, "R": int(trucks), "alpha": float(alpha), "runs": n,
            "service_level_mean": mean, "service_level_se": se,
            "service_level_ci_low": mean - Z_95 * se, "service_level_ci_high": mean + Z_95 * se,
            "payout_mean": float(group["payout_total"].mean()),
            "empty_mean": float(group["empty_events"].mean()),
            "full_mean": float(group["full_events"].mean()),
            "truck_hours_mean": float(group["truck_hours"].mean()),
        })
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def summary_rows(frames: Sequence[pd.DataFrame]) -> pd.DataFrame:
    """Aggregate several run tables, dropping duplicate run ids."""
    frame = pd.concat(list(frames), ignore_index=True).drop_duplicates("run_id", keep="last")
    return aggregate(frame)
