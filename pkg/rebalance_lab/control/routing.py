"""Dynamic multi-truck repositioning.

Each truck extends its route through a pruned tree of candidate routes: at
every node the K stations promising the most utility per unit of travel time
are expanded, plus the best stations to stash bikes at or fetch bikes from.
Loading actions of the best candidates are then refined jointly with a small
QP, and trucks are planned one after another on the shared network.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import sparse

from ..config.settings import MINUTES_PER_DAY, RoutingConfig
from ..model.demand import DemandTimeline
from ..model.utility import Plateau, PlateauTable, utility_fast
from ..utils.helpers import write_csv
from . import qp
from .network import PlannedAction, TimeExpandedNetwork, build_network, depot_station

logger = logging.getLogger(__name__)

ACTION_COLUMNS = ["tick", "truck", "station", "time", "df", "load"]
ROUND_EPS = 1e-9


def greedy_best_action(fill: float, lower: float, upper: float, load: int, l_max: int) -> int:
    """Bikes to move into a station so it reaches its plateau, within the truck's limits."""
    if fill > upper:
        return int(max(load - l_max, math.ceil(upper - fill - ROUND_EPS)))
    if fill < lower:
        return int(min(load, math.floor(lower - fill + ROUND_EPS)))
    return 0


def _greedy_vector(fill, lower, upper, load, l_max):
    df = np.zeros(len(fill), dtype=int)
    above = fill > upper
    below = fill < lower
    df[above] = np.maximum(load - l_max, np.ceil(upper[above] - fill[above] - ROUND_EPS)).astype(int)
    df[below] = np.minimum(load, np.floor(lower[below] - fill[below] + ROUND_EPS)).astype(int)
    return df


@dataclass
class RouteStep:
    station: int
    k: int
    minute: int
    df: int
    load: int
    fill: float = 0.0
    lower: float = 0.0
    upper: float = 0.0
    capacity: float = 0.0
    depot: Optional[str] = None

    @property
    def utility(self) -> float:
        return utility_fast(self.fill, self.df, Plateau(self.lower, self.upper))


@dataclass
class TreeNode:
    step: RouteStep
    children: List["TreeNode"] = field(default_factory=list)


@dataclass
class CandidateRoute:
    root: RouteStep
    steps: List[RouteStep]

    @property
    def utility(self) -> float:
        return float(sum(s.utility for s in self.steps))

    @property
    def end_minute(self) -> int:
        return self.steps[-1].minute if self.steps else self.root.minute

    @property
    def duration(self) -> int:
        return max(self.end_minute - self.root.minute, 1)

    @property
    def score(self) -> float:
        return self.utility / self.duration

    def with_actions(self, df: Sequence[int]) -> "CandidateRoute":
        load, steps = self.root.load, []
        for step, d in zip(self.steps, df):
            load -= int(d)
            steps.append(RouteStep(step.station, step.k, step.minute, int(d), load, step.fill,
                                   step.lower, step.upper, step.capacity, step.depot))
        return CandidateRoute(self.root, steps)


def _vertex_data(network: TimeExpandedNetwork, targets: np.ndarray, k_next: np.ndarray):
    rows = network.base + k_next * network.step - network.now
    fill = network.fills[rows, targets]
    lower = np.empty(len(targets))
    upper = np.empty(len(targets))
    for k in np.unique(k_next):
        lo, hi = network.plateau(int(k))
        mask = k_next == k
        lower[mask] = lo[targets[mask]]
        upper[mask] = hi[targets[mask]]
    return fill, lower, upper


def _best(order_keys: List[Tuple], count: int) -> List[int]:
    return [key[-1] for key in sorted(order_keys)[:count]]


def candidate_tree(network: TimeExpandedNetwork, station: int, k: int, load: int, config: RoutingConfig,
                   exclude: Optional[Set[int]] = None) -> TreeNode:
    """Pruned tree of route candidates rooted at the truck's vertex ``(station, k)``."""
    root = TreeNode(RouteStep(station, k, network.time_of(k), 0, load))
    exclude = set(exclude or ())
    ids = network.station_ids
    root_minute = root.step.minute

    def expand(node: TreeNode, visited: Set[int], depth: int):
        s, kk, l = node.step.station, node.step.k, node.step.load
        if depth >= config.n_truck or node.step.minute - root_minute >= config.t_truck:
            return
        targets, k_next = network.successors(s, kk)
        keep = np.array([t not in visited and t not in exclude for t in targets], dtype=bool)
        targets, k_next = targets[keep], k_next[keep]
        if len(targets) == 0:
            return
        fill, lower, upper = _vertex_data(network, targets, k_next)
        df = _greedy_vector(fill, lower, upper, l, config.l_max)
        dbar = network.dbar[s, targets]

        ratio = np.abs(df) / dbar
        keys = [(-ratio[i], dbar[i], ids[targets[i]], i) for i in np.flatnonzero(df != 0)]
        chosen = [(i, None) for i in _best(keys, config.branching)]
        taken = {i for i, _ in chosen}
        for kind, room in (("store", upper - fill), ("pick", fill - lower)):
            value = np.minimum(config.l_depot, room) / dbar
            keys = [(-value[i], dbar[i], ids[targets[i]], i)
                    for i in range(len(targets)) if value[i] > 0 and i not in taken]
            best = _best(keys, 1)
            if best:
                chosen.append((best[0], kind))
                taken.add(best[0])

        for i, kind in chosen:
            d = 0 if kind else int(df[i])
            t = int(targets[i])
            step = RouteStep(t, int(k_next[i]), network.time_of(int(k_next[i])), d, l - d,
                             float(fill[i]), float(lower[i]), float(upper[i]),
                             float(network.capacity[t]), kind)
            child = TreeNode(step)
            node.children.append(child)
            token = network.fold(t, step.minute, d)
            expand(child, visited | {t}, depth + 1)
            network.unfold(token)

    expand(root, {station}, 1)
    return root


def leaves(root: TreeNode) -> List[CandidateRoute]:
    """Every root-to-leaf route of a candidate tree, depth first."""
    routes = []

    def walk(node: TreeNode, path: List[RouteStep]):
        if not node.children:
            if path:
                routes.append(CandidateRoute(root.step, list(path)))
            return
        for child in node.children:
            walk(child, path + [child.step])

    walk(root, [])
    return routes


def _objective(df: np.ndarray, fill, lower, upper, q: float) -> float:
    new = fill + df
    return float(np.sum(np.abs(lower - new) + np.abs(new - upper)) + np.sum(df ** 2) / q)


def _action_bounds(fill, capacity):
    return np.ceil(-fill - ROUND_EPS).astype(int), np.floor(capacity - fill + ROUND_EPS).astype(int)


def _repair(df: np.ndarray, l0: int, l_max: int, lo_df, hi_df) -> np.ndarray:
    """Make an integer action vector satisfy the load chain, earliest stop first."""
    df = df.copy()
    load = l0
    for i in range(len(df)):
        low = max(load - l_max, lo_df[i])
        high = min(load, hi_df[i])
        df[i] = min(max(df[i], low), high)
        load -= df[i]
    return df


def _descend(df: np.ndarray, l0: int, l_max: int, fill, lower, upper, capacity, q: float) -> np.ndarray:
    """Steepest descent over +-1 moves of any subset of truck loads.

    The objective is separable convex in load differences, so a point with
    no improving move is an integer optimum.
    """
    m = len(df)
    lo_df, hi_df = _action_bounds(fill, capacity)
    loads = l0 - np.cumsum(df)
    best_val = _objective(df, fill, lower, upper, q)
    moves = [np.array(bits, dtype=int) for bits in itertools.product((0, 1), repeat=m) if any(bits)]
    for _ in range(4 * m * (l_max + 1) + 4):
        best_move = None
        for bits in moves:
            for sign in (1, -1):
                cand = loads + sign * bits
                if cand.min() < 0 or cand.max() > l_max:
                    continue
                cand_df = np.diff(np.concatenate([[l0], cand])) * -1
                if np.any(cand_df < lo_df) or np.any(cand_df > hi_df):
                    continue
                val = _objective(cand_df, fill, lower, upper, q)
                if val < best_val - 1e-12:
                    best_val, best_move = val, cand
        if best_move is None:
            break
        loads = best_move
    return -np.diff(np.concatenate([[l0], loads]))


def refine_actions(route: CandidateRoute, config: RoutingConfig,
                   tol: float = 1e-6) -> Tuple[CandidateRoute, qp.QpStatus]:
    """Jointly optimize the loading actions of a fixed route.

    Solves the relaxed QP, rounds toward zero, repairs the load chain and
    polishes to the integer optimum. The greedy actions are kept when they
    score higher.
    """
    m = len(route.steps)
    if m == 0:
        return route, qp.QpStatus.SOLVED
    l0, l_max, q = route.root.load, config.l_max, config.q_scale
    fill = np.array([s.fill for s in route.steps])
    lower = np.array([s.lower for s in route.steps])
    upper = np.array([s.upper for s in route.steps])
    capacity = np.array([s.capacity for s in route.steps])

    eye = sparse.identity(m, format="csc")
    zero = sparse.csc_matrix((m, m))
    chain = sparse.csc_matrix(np.tril(np.ones((m, m))))
    A = sparse.vstack([
        sparse.hstack([chain, zero, zero]),
        sparse.hstack([-chain, zero, zero]),
        sparse.hstack([-eye, -eye, zero]),
        sparse.hstack([eye, -eye, zero]),
        sparse.hstack([eye, zero, -eye]),
        sparse.hstack([-eye, zero, -eye]),
    ], format="csc")
    b = np.concatenate([np.full(m, l0), np.full(m, l_max - l0), fill - lower, lower - fill,
                        upper - fill, fill - upper])
    H = sparse.block_diag([sparse.identity(m) * (2.0 / q), zero, zero], format="csc")
    g = np.concatenate([np.zeros(m), np.ones(2 * m)])
    lb = np.concatenate([-fill, np.zeros(2 * m)])
    ub = np.concatenate([capacity - fill, np.full(2 * m, np.inf)])
    result = qp.solve(qp.QpInstance(H, g, A, b, lb=lb, ub=ub), tol=tol)

    greedy = [s.df for s in route.steps]
    if not result.ok:
        logger.warning("Route refinement QP failed (%s); keeping greedy actions", result.status.value)
        return route, result.status

    lo_df, hi_df = _action_bounds(fill, capacity)
    df = np.trunc(result.x[:m] + np.sign(result.x[:m]) * ROUND_EPS).astype(int)
    df = _repair(df, l0, l_max, lo_df, hi_df)
    df = _descend(df, l0, l_max, fill, lower, upper, capacity, q)
    refined = route.with_actions(df)
    if refined.utility + 1e-9 < route.with_actions(greedy).utility:
        return route, result.status
    return refined, result.status


def best_route(network: TimeExpandedNetwork, station: int, k: int, load: int, config: RoutingConfig,
               exclude: Optional[Set[int]] = None) -> Optional[CandidateRoute]:
    """Highest utility-per-minute refined route from ``(station, k)``; None if nothing helps."""
    routes = leaves(candidate_tree(network, station, k, load, config, exclude))
    if not routes:
        return None
    routes.sort(key=lambda r: (-r.score, r.end_minute))
    if config.refine_candidates > 0:
        routes = routes[: config.refine_candidates]
    refined = [refine_actions(r, config)[0] for r in routes]
    best = min(refined, key=lambda r: (-r.score, r.end_minute))
    if best.utility <= 1e-9:
        return None
    return best


@dataclass
class TruckState:
    truck: int
    station: int
    minute: int
    load: int


@dataclass
class TruckPlan:
    """Ordered actions of one truck; ``committed`` of them are fixed from earlier ticks."""

    truck: int
    root: TruckState
    actions: List[PlannedAction] = field(default_factory=list)
    committed: int = 0
    batches: List[int] = field(default_factory=list)
    done: bool = False

    def last(self) -> Tuple[int, int, int]:
        if self.actions:
            a = self.actions[-1]
            return a.station, a.minute, a.load
        return self.root.station, self.root.minute, self.root.load

    @property
    def provisional(self) -> List[PlannedAction]:
        return self.actions[self.committed:]

    def drop_last_batch(self):
        size = self.batches.pop()
        del self.actions[len(self.actions) - size:]


def _complete(plan: TruckPlan, now: int, config: RoutingConfig) -> bool:
    _, minute, _ = plan.last()
    return len(plan.actions) >= config.n_truck - 1 or minute - now >= config.t_truck


def _to_actions(truck: int, route: CandidateRoute) -> List[PlannedAction]:
    actions, start = [], route.root.minute
    for step in route.steps:
        actions.append(PlannedAction(truck, step.station, step.minute, step.df, step.load, start))
        start = step.minute
    return actions


def _visits_later(plan: TruckPlan, action: PlannedAction) -> bool:
    return any(a.station == action.station and a.minute > action.minute for a in plan.provisional)


def repair_collisions(plan: TruckPlan, new: List[PlannedAction], plans: Sequence[TruckPlan]) -> List[PlannedAction]:
    """Resolve visits by ``new`` to stations another truck reaches later.

    Each such truck loses the steps of its last search and ``plan`` keeps
    only the first new step. Returns the steps ``plan`` keeps.
    """
    collided = False
    for other in plans:
        if other is plan or not any(_visits_later(other, action) for action in new):
            continue
        if other.batches:
            other.drop_last_batch()
        other.done = False
        collided = True
    if collided:
        logger.debug("Route collision for truck %d; keeping one new step", plan.truck)
        return new[:1]
    return new


def plan_all_trucks(trucks: Sequence[TruckState], network: TimeExpandedNetwork, config: RoutingConfig,
                    committed: Optional[Dict[int, List[PlannedAction]]] = None) -> List[TruckPlan]:
    """Sequential multi-truck planning with collision repair.

    ``committed`` actions must already be folded into ``network``.
    """
    committed = committed or {}
    plans = [TruckPlan(t.truck, t, list(committed.get(t.truck, [])), len(committed.get(t.truck, [])))
             for t in trucks]
    base_fills = network.fills.copy()

    def refold():
        network.fills[:] = base_fills
        for p in plans:
            network.fold_actions(p.provisional)

    limit = 8 * (len(plans) + 1) * config.n_truck
    for _ in range(limit):
        open_plans = [p for p in plans if not p.done and not _complete(p, network.now, config)]
        if not open_plans:
            break
        plan = min(open_plans, key=lambda p: (p.last()[1], p.truck))
        station, minute, load = plan.last()
        k = network.step_of(minute)
        reserved = {a.station for p in plans if p is not plan for a in p.actions[:p.committed] if a.minute > minute}
        if not network.live(station, k):
            plan.done = True
            continue
        route = best_route(network, station, k, load, config, reserved)
        if route is None:
            plan.done = True
            continue
        new = repair_collisions(plan, _to_actions(plan.truck, route), plans)
        plan.actions.extend(new)
        plan.batches.append(len(new))
        refold()
    else:
        logger.warning("Truck planning hit its iteration limit (%d)", limit)
    return plans


class TruckDispatcher:
    """Receding-horizon truck control: plans every tick and commits the near-term prefix."""

    def __init__(self, trucks: int, capacity: np.ndarray, xy: np.ndarray, station_ids: Sequence[int],
                 timeline: DemandTimeline, plateaus: PlateauTable, config: RoutingConfig):
        self.config = config
        self.capacity = np.asarray(capacity)
        self.xy = xy
        self.station_ids = np.asarray(station_ids)
        self.timeline = timeline
        self.plateaus = plateaus
        self.depot = depot_station(xy, station_ids, config.depot)
        self.trucks = [TruckState(r, self.depot, config.window_start, 0) for r in range(trucks)]
        self.pending: Dict[int, List[PlannedAction]] = {r: [] for r in range(trucks)}
        self.log_rows: List[dict] = []
        self.ticks = 0

    def start_day(self, day: int):
        """Trucks begin the day at the depot, keeping whatever load they carry."""
        start = day * MINUTES_PER_DAY + self.config.window_start
        for truck in self.trucks:
            truck.station, truck.minute = self.depot, start
            self.pending[truck.truck] = []

    def tick_minutes(self, day: int) -> List[int]:
        start = day * MINUTES_PER_DAY + self.config.window_start
        end = day * MINUTES_PER_DAY + self.config.window_end
        return list(range(start, end, self.config.t_impl))

    def replan_tick(self, now: int, fills: np.ndarray, loads: Optional[Sequence[int]] = None) -> List[PlannedAction]:
        """Plan all trucks from the current state and commit actions starting before ``now + T_impl``."""
        self.ticks += 1
        if loads is not None:
            for truck, load in zip(self.trucks, loads):
                if not self.pending[truck.truck]:
                    truck.load = int(load)
        committed_all = [a for actions in self.pending.values() for a in actions]
        network = build_network(fills, self.capacity, now, self.timeline, self.plateaus, self.xy, self.config,
                                depot=self.depot, committed=committed_all, station_ids=self.station_ids)
        roots = []
        for truck in self.trucks:
            minute = max(truck.minute, network.base)
            minute = network.time_of(network.step_of(minute + network.step - 1))
            roots.append(TruckState(truck.truck, truck.station, minute, truck.load))
        plans = plan_all_trucks(roots, network, self.config, self.pending)

        horizon = now + self.config.t_impl
        new_commits = []
        for plan in plans:
            prefix = []
            for a in plan.provisional:
                if a.start >= horizon:
                    break
                prefix.append(a)
            if not prefix and not self.pending[plan.truck]:
                home = self._homing(plan.root, network)
                prefix = [home] if home is not None else []
            for action in prefix:
                self.pending[plan.truck].append(action)
                self._advance(action)
                new_commits.append(action)
                self.log_rows.append({"tick": now, "truck": action.truck,
                                      "station": int(self.station_ids[action.station]),
                                      "time": action.minute, "df": action.df, "load": action.load})
        logger.debug("Tick %d: committed %d truck actions", now, len(new_commits))
        return new_commits

    def _homing(self, root: TruckState, network: TimeExpandedNetwork) -> Optional[PlannedAction]:
        """Journey back to the depot once the truck has no live successor left besides it."""
        if root.station == self.depot:
            return None
        k = network.step_of(root.minute)
        targets, _ = network.successors(root.station, k)
        away = [t for t in targets.tolist() if t != self.depot]
        home_at_next_tick = root.minute + self.config.t_impl + int(network.dbar[root.station, self.depot]) * network.step
        if away and home_at_next_tick <= network.window_end:
            return None
        minute = root.minute + int(network.dbar[root.station, self.depot]) * network.step
        return PlannedAction(root.truck, self.depot, minute, 0, root.load, root.minute)

    def _advance(self, action: PlannedAction):
        truck = self.trucks[action.truck]
        truck.station, truck.minute, truck.load = action.station, action.minute, action.load

    def due(self, minute: int) -> List[PlannedAction]:
        """Pop the committed actions scheduled at ``minute``."""
        out = []
        for truck, actions in self.pending.items():
            while actions and actions[0].minute <= minute:
                out.append(actions.pop(0))
        return out

    def executed(self, action: PlannedAction, load: int):
        """Record the truck's actual load after the simulator executed ``action``."""
        truck = self.trucks[action.truck]
        if not self.pending[action.truck]:
            truck.load = int(load)

    def write_log(self, path: str):
        write_csv(path, self.log_rows, ACTION_COLUMNS)
