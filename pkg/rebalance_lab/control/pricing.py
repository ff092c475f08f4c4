"""Receding-horizon price controller.

Customers returning a bike to station ``s`` are offered payouts for riding on
to one of its neighbors. The linear response model turns a payout vector into
diverted flows, which enter the fill dynamics

    f(t + 1) = f(t) + eta(t) + df_truck(t) + Gamma(t) p(t)

where ``Gamma(t) = (E_dst - E_src) diag(lambda_src(t)) Pi`` moves diverted
arrivals from a pair's source station to its destination, so bikes are
conserved. Each tick the QP trades squared deviation from the plateau centers
against expected payouts and only the first step's prices are issued.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np
from scipy import sparse

from ..config.settings import MpcConfig
from ..model.customer import LinearResponse
from ..model.demand import DemandTimeline
from ..model.geometry import PairIndex
from ..model.utility import PlateauTable
from ..utils.helpers import write_csv
from . import qp
from .network import PlannedAction

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ["tick", "station", "neighbor", "payout"]


@dataclass
class MpcState:
    """Inputs of one MPC solve; per-step arrays have shape ``(T, S)``."""

    fills: np.ndarray
    eta: np.ndarray
    lam: np.ndarray
    truck_df: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def horizon(self) -> int:
        return self.eta.shape[0]

    @property
    def station_count(self) -> int:
        return len(self.fills)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def deviation(self, forecast: np.ndarray) -> np.ndarray:
        """Centered deviation of ``forecast[1:]`` from the matching plateau centers."""
        return forecast[1:] - self.center


def build_state(fills: np.ndarray, now: int, timeline: DemandTimeline, plateaus: PlateauTable,
                config: MpcConfig, truck_actions: Iterable[PlannedAction] = ()) -> MpcState:
    """Aggregate per-minute flows into control steps starting at ``now``."""
    T, step = config.horizon, config.step_minutes
    S = len(fills)
    eta = np.zeros((T, S))
    lam = np.zeros((T, S))
    for t in range(T):
        start = now + t * step
        stop = min(start + step, timeline.length)
        if start < stop:
            eta[t] = timeline.eta[start:stop].sum(axis=0)
            lam[t] = timeline.lam[start:stop].sum(axis=0)

    truck_df = np.zeros((T, S))
    for action in truck_actions:
        t = (action.minute - now) // step
        if 0 <= t < T:
            truck_df[t, action.station] += action.df

    lower = np.zeros((T, S))
    upper = np.zeros((T, S))
    for t in range(T):
        lo, hi, _ = plateaus.row(min(now + (t + 1) * step, timeline.length - 1))
        lower[t], upper[t] = lo, hi
    return MpcState(np.asarray(fills, dtype=float), eta, lam, truck_df, lower, upper)


def _incidence(pairs: PairIndex, S: int):
    P = len(pairs)
    cols = np.arange(P)
    src = sparse.csr_matrix((np.ones(P), (pairs.src, cols)), shape=(S, P))
    dst = sparse.csr_matrix((np.ones(P), (pairs.dst, cols)), shape=(S, P))
    return src, dst


def gamma_matrix(pairs: PairIndex, Pi: sparse.spmatrix, lam: np.ndarray) -> sparse.csr_matrix:
    """Net diverted flow per station for one control step, as a linear map of the payouts."""
    src, dst = _incidence(pairs, len(lam))
    return ((dst - src) @ sparse.diags(lam[pairs.src]) @ Pi).tocsr()


@dataclass
class MpcLayout:
    """Variable layout ``[p(0) .. p(T-1), f(1) .. f(T)]`` of an assembled MPC."""

    horizon: int
    pairs: int
    stations: int

    def p(self, t: int) -> slice:
        return slice(t * self.pairs, (t + 1) * self.pairs)

    def f(self, t: int) -> slice:
        """Fill block of step ``t`` (1-based, as in the dynamics)."""
        base = self.horizon * self.pairs + (t - 1) * self.stations
        return slice(base, base + self.stations)

    @property
    def size(self) -> int:
        return self.horizon * (self.pairs + self.stations)


def price_weights(state: MpcState, pairs: PairIndex, response: LinearResponse, config: MpcConfig) -> np.ndarray:
    """Per-pair payout weights ``R(t)``, floored so the QP stays strictly convex in ``p``."""
    P = len(pairs)
    take_up = np.zeros(P)
    for s, block in enumerate(response.blocks):
        if block.size:
            take_up[pairs.of(s)] = block.sum(axis=0)
    R = config.alpha * state.lam[:, pairs.src] * take_up[None, :]
    return np.maximum(R, config.alpha * config.r_floor)


def build_mpc(state: MpcState, response: LinearResponse, config: MpcConfig):
    """Assemble the pricing QP; returns ``(QpInstance, MpcLayout)``."""
    pairs = response.pairs
    T, S, P = state.horizon, state.station_count, len(pairs)
    layout = MpcLayout(T, P, S)
    n = layout.size
    Pi = response.matrix()

    Q = 1.0 / np.maximum(config.plateau_floor, state.upper - state.lower)
    R = price_weights(state, pairs, response, config)
    h = np.concatenate([2.0 * R.ravel(), 2.0 * Q.ravel()])
    H = sparse.diags(h, format="csc")
    g = np.concatenate([np.zeros(T * P), (-2.0 * Q * state.center).ravel()])

    eq_blocks, b_eq = [], []
    for t in range(T):
        row = [None] * (2 * T)
        row[t] = -gamma_matrix(pairs, Pi, state.lam[t]) if P else None
        row[T + t] = sparse.identity(S, format="csr")
        rhs = state.eta[t] + state.truck_df[t]
        if t == 0:
            rhs = rhs + state.fills
        else:
            row[T + t - 1] = -sparse.identity(S, format="csr")
        eq_blocks.append(row)
        b_eq.append(rhs)
    if P == 0:
        for row in eq_blocks:
            del row[:T]
    A_eq = sparse.bmat(eq_blocks, format="csc")

    lb = np.concatenate([np.zeros(T * P), np.full(T * S, -np.inf)])
    ub = np.concatenate([np.full(T * P, config.p_max), np.full(T * S, np.inf)])

    A, b = None, None
    if P:
        src, _ = _incidence(pairs, S)
        share = (src @ Pi).tocsr()
        keep = np.flatnonzero(np.abs(share).sum(axis=1).A1 > 0)
        share = share[keep]
        if share.shape[0]:
            A = sparse.hstack([sparse.kron(sparse.identity(T), share), sparse.csr_matrix((T * len(keep), T * S))],
                              format="csc")
            b = np.ones(T * len(keep))
    instance = qp.QpInstance(H, g, A, b, A_eq, np.concatenate(b_eq), lb, ub)
    if instance.size != n:
        raise ValueError(f"MPC assembled with {instance.size} variables, expected {n}")
    return instance, layout


@dataclass
class PriceSchedule:
    """Payouts per control step, shape ``(T, P)``; only step 0 is ever issued."""

    payouts: np.ndarray
    pairs: PairIndex

    @property
    def first(self) -> np.ndarray:
        return self.payouts[0] if len(self.payouts) else np.zeros(len(self.pairs))


def project_prices(p: np.ndarray, response: LinearResponse, p_max: float) -> np.ndarray:
    """Clip to the payout box, then scale each station down until its diverted share is at most one."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, p_max)
    pairs = response.pairs
    for s, block in enumerate(response.blocks):
        if not block.size:
            continue
        span = pairs.of(s)
        share = float((block @ p[span]).sum())
        if share > 1.0:
            p[span] *= 1.0 / share
    return p


def solve_and_issue(instance: qp.QpInstance, layout: MpcLayout, response: LinearResponse, config: MpcConfig,
                    warm_start: Optional[np.ndarray] = None):
    """Solve an assembled MPC; returns ``(schedule or None, QpResult)``."""
    result = qp.solve(instance, tol=config.tol, max_iter=config.max_iter, warm_start=warm_start)
    if not result.ok:
        return None, result
    payouts = np.array([result.x[layout.p(t)] for t in range(layout.horizon)]).reshape(layout.horizon, layout.pairs)
    payouts[0] = project_prices(payouts[0], response, config.p_max)
    return PriceSchedule(payouts, response.pairs), result


def predict_open_loop(state: MpcState, schedule: Optional[PriceSchedule], response: LinearResponse) -> np.ndarray:
    """Unsaturated fill forecast under the linear model, shape ``(T + 1, S)``."""
    T = state.horizon
    forecast = np.zeros((T + 1, state.station_count))
    forecast[0] = state.fills
    Pi = response.matrix()
    for t in range(T):
        diverted = 0.0
        if schedule is not None and len(response.pairs):
            diverted = gamma_matrix(response.pairs, Pi, state.lam[t]) @ schedule.payouts[t]
        forecast[t + 1] = forecast[t] + state.eta[t] + state.truck_df[t] + diverted
    return forecast


class PriceController:
    """Issues payouts every control step and keeps the last schedule for warm starts."""

    def __init__(self, response: LinearResponse, timeline: DemandTimeline, plateaus: PlateauTable,
                 capacity: np.ndarray, config: MpcConfig, station_ids=None):
        self.response = response
        self.timeline = timeline
        self.plateaus = plateaus
        self.capacity = np.asarray(capacity, dtype=float)
        self.config = config
        self.station_ids = np.asarray(station_ids) if station_ids is not None else np.arange(len(capacity))
        self.prices = np.zeros(len(response.pairs))
        self.failures = 0
        self.model_error_ticks = 0
        self.log_rows: List[dict] = []
        self._warm: Optional[np.ndarray] = None

    def tick(self, now: int, fills: np.ndarray, truck_actions: Iterable[PlannedAction] = ()) -> np.ndarray:
        """Re-solve from the current fills; returns the flat per-pair payout vector now in force."""
        state = build_state(fills, now, self.timeline, self.plateaus, self.config, truck_actions)
        instance, layout = build_mpc(state, self.response, self.config)
        warm = self._warm if self._warm is not None and len(self._warm) == layout.size else None
        schedule, result = solve_and_issue(instance, layout, self.response, self.config, warm)
        if schedule is None:
            self.failures += 1
            logger.warning("Pricing QP failed at minute %d (%s); keeping previous prices", now, result.status.value)
        else:
            self.prices = schedule.first
            self._warm = result.x
            self._check_forecast(now, state, schedule)
        logger.debug("Price tick %d: %d iterations, residuals %s, %d nonzero payouts", now, result.iterations,
                     {k: f"{v:.1e}" for k, v in result.residuals.items()}, int((self.prices > 0).sum()))
        self._log(now)
        return self.prices

    def _check_forecast(self, now: int, state: MpcState, schedule: PriceSchedule):
        forecast = predict_open_loop(state, schedule, self.response)[1:]
        outside = int(((forecast < 0) | (forecast > self.capacity[None, :])).any(axis=0).sum())
        if not outside:
            return
        self.model_error_ticks += 1
        log = logger.warning if self.model_error_ticks == 1 else logger.debug
        log("Open-loop price forecast at minute %d leaves station bounds at %d stations", now, outside)

    def _log(self, now: int):
        pairs = self.response.pairs
        for k in np.flatnonzero(self.prices > 0):
            self.log_rows.append({"tick": now, "station": int(self.station_ids[pairs.src[k]]),
                                  "neighbor": int(self.station_ids[pairs.dst[k]]), "payout": float(self.prices[k])})

    def offers(self, station: int) -> np.ndarray:
        """Payouts currently offered at ``station``, in neighbor order."""
        return self.prices[self.response.pairs.of(station)]

    def write_log(self, path: str):
        write_csv(path, self.log_rows, PRICE_COLUMNS)
