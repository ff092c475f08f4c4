"""Expected fill propagation and the utility of repositioning.

The utility of changing a station's fill from ``f`` to ``f + df`` is the
extra net customer flow the station serves over the look-ahead horizon,
``g(f + df) - g(f)`` with ``g(x) = sum_t |x_{t+1} - x_t|`` along the
saturated trajectory started at ``x``. ``g`` is concave and piecewise linear
with slopes +1, 0, -1, so a station is described by the plateau
``[lower, upper]`` on which it is maximal.

Plateaus come from running envelopes of the cumulative net flow ``C_j``:
start levels above ``a_j = min_{i<=j}(fmax - C_i)`` have hit full by step
``j``, start levels below ``b_j = max_{i<=j}(-C_i)`` have hit empty. When
the envelopes cross, the plateau collapses onto the last level that saw the
earlier event first.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import FeasibilityError
from ..utils.helpers import write_csv
from .demand import DemandTimeline

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
PLATEAU_COLUMNS = ["minute", "station", "lower", "upper", "degenerate"]


@dataclass(frozen=True)
class Plateau:
    lower: float
    upper: float
    degenerate: bool = False


def propagate_fill(f0, eta: np.ndarray, capacity) -> np.ndarray:
    """Saturated fill trajectory ``f_0 .. f_T`` for ``eta`` of length ``T``.

    ``f0`` and ``capacity`` may be scalars or per-station vectors, in which
    case ``eta`` has shape ``(T, stations)``.
    """
    eta = np.asarray(eta, dtype=float)
    f = np.asarray(f0, dtype=float)
    out = np.empty((eta.shape[0] + 1,) + f.shape)
    out[0] = f
    for t in range(eta.shape[0]):
        f = np.clip(f + eta[t], 0.0, capacity)
        out[t + 1] = f
    return out


def _check_feasible(f: float, capacity: float, what: str):
    if f < -FEASIBILITY_TOL or f > capacity + FEASIBILITY_TOL:
        raise FeasibilityError(f"{what} {f:g} outside [0, {capacity:g}]")


def utility_exact(f0: float, df: float, eta: np.ndarray, capacity: float) -> float:
    """Reference utility by joint replay of both trajectories until they merge."""
    _check_feasible(f0, capacity, "fill")
    _check_feasible(f0 + df, capacity, "fill after repositioning")
    if df == 0:
        return 0.0
    f, g = float(f0), float(f0 + df)
    total = 0.0
    for step in np.asarray(eta, dtype=float):
        f_next = min(max(f + step, 0.0), capacity)
        g_next = min(max(g + step, 0.0), capacity)
        total += abs(g_next - g) - abs(f_next - f)
        f, g = f_next, g_next
        if f == g:
            break
    return total


def _envelopes(eta: np.ndarray, capacity: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Running full/empty envelopes with a leading row for step 0."""
    cumulative = np.cumsum(eta, axis=0)
    zero = np.zeros((1,) + cumulative.shape[1:])
    cumulative = np.concatenate([zero, cumulative])
    upper = np.minimum.accumulate(capacity - cumulative, axis=0)
    lower = np.maximum.accumulate(-cumulative, axis=0)
    return np.minimum(upper, capacity), np.maximum(lower, 0.0)


def plateau_bounds(eta: np.ndarray, capacity) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized plateaus for ``eta`` of shape ``(T, stations)``.

    Returns ``(lower, upper, degenerate)`` arrays over stations.
    """
    eta = np.asarray(eta, dtype=float)
    capacity = np.broadcast_to(np.asarray(capacity, dtype=float), eta.shape[1:])
    a, b = _envelopes(eta, capacity)
    lower, upper = b[-1].copy(), a[-1].copy()

    crossed = a < b
    degenerate = crossed.any(axis=0)
    for s in np.flatnonzero(degenerate):
        j = int(np.argmax(crossed[:, s]))
        # row 0 never crosses, so j >= 1
        if a[j, s] < a[j - 1, s]:
            point = b[j - 1, s]
        else:
            point = a[j - 1, s]
        lower[s] = upper[s] = point
    return lower, upper, degenerate


def compute_plateau(eta: np.ndarray, capacity: float, cross_check: bool = False) -> Plateau:
    """Plateau of one station for the look-ahead ``eta`` (1-D)."""
    eta = np.asarray(eta, dtype=float).reshape(-1, 1)
    lower, upper, degenerate = plateau_bounds(eta, capacity)
    plateau = Plateau(float(lower[0]), float(upper[0]), bool(degenerate[0]))
    if cross_check and not verify_plateau(eta[:, 0], capacity, plateau):
        logger.warning("Plateau %s disagrees with the replay oracle", plateau)
    return plateau


def utility_fast(f: float, df: float, plateau: Plateau) -> float:
    """Closed-form utility: slope +1 below the plateau, 0 on it, -1 above."""

    def score(x):
        return -max(plateau.lower - x, 0.0) - max(x - plateau.upper, 0.0)

    return score(f + df) - score(f)


def verify_plateau(eta: np.ndarray, capacity: float, plateau: Plateau, tol: float = 1e-9) -> bool:
    """Check a plateau with three replay calls: rise to it, cross it, fall past it."""
    rise = utility_exact(0.0, plateau.lower, eta, capacity)
    flat = utility_exact(plateau.lower, plateau.upper - plateau.lower, eta, capacity)
    fall = utility_exact(plateau.upper, capacity - plateau.upper, eta, capacity)
    return (abs(rise - plateau.lower) <= tol
            and abs(flat) <= tol
            and abs(fall + (capacity - plateau.upper)) <= tol)


class PlateauTable:
    """Lazily computed plateau rows for every station, keyed by start minute."""

    def __init__(self, timeline: DemandTimeline, capacity: np.ndarray, horizon: int = 1440,
                 station_ids: Optional[Sequence[int]] = None, cross_check: bool = False):
        self.timeline = timeline
        self.capacity = np.asarray(capacity, dtype=float)
        self.horizon = int(horizon)
        self.station_ids = np.asarray(station_ids) if station_ids is not None else np.arange(len(capacity))
        self.cross_check = cross_check
        self._rows: Dict[int, Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def row(self, minute: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(lower, upper, degenerate)`` over stations for look-ahead starting at ``minute``."""
        minute = int(minute)
        if minute not in self._rows:
            eta = self.timeline.window(minute, self.horizon)
            lower, upper, degenerate = plateau_bounds(eta, self.capacity)
            if degenerate.any():
                logger.debug("minute %d: %d degenerate plateaus", minute, int(degenerate.sum()))
            if self.cross_check:
                self._cross_check(minute, eta, lower, upper, degenerate)
            self._rows[minute] = (lower, upper, degenerate)
        return self._rows[minute]

    def plateau(self, station: int, minute: int) -> Plateau:
        lower, upper, degenerate = self.row(minute)
        return Plateau(float(lower[station]), float(upper[station]), bool(degenerate[station]))

    def _cross_check(self, minute, eta, lower, upper, degenerate):
        for s in range(len(self.capacity)):
            plateau = Plateau(float(lower[s]), float(upper[s]), bool(degenerate[s]))
            if not verify_plateau(eta[:, s], float(self.capacity[s]), plateau):
                logger.warning("minute %d station %s: plateau %s fails the replay check",
                               minute, self.station_ids[s], plateau)

    def dump_csv(self, path: str, minutes: Iterable[int]):
        rows = []
        for minute in minutes:
            lower, upper, degenerate = self.row(minute)
            for s, station_id in enumerate(self.station_ids):
                rows.append({"minute": int(minute), "station": int(station_id), "lower": lower[s],
                             "upper": upper[s], "degenerate": int(degenerate[s])})
        write_csv(path, rows, PLATEAU_COLUMNS)
        logger.info("Wrote %d plateau rows to %s", len(rows), path)
