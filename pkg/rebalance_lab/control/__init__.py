"""Controllers: QP backend, truck routing and payout pricing."""

from .network import PlannedAction, TimeExpandedNetwork, build_network, depot_station, effective_journey_time
from .pricing import (
    MpcState,
    PriceController,
    PriceSchedule,
    build_mpc,
    build_state,
    predict_open_loop,
    solve_and_issue,
)
from .qp import QpInstance, QpResult, QpStatus, solve
from .routing import (
    CandidateRoute,
    TruckDispatcher,
    TruckPlan,
    TruckState,
    best_route,
    candidate_tree,
    greedy_best_action,
    leaves,
    plan_all_trucks,
    refine_actions,
    repair_collisions,
)

__all__ = [
    'CandidateRoute',
    'MpcState',
    'PlannedAction',
    'PriceController',
    'PriceSchedule',
    'QpInstance',
    'QpResult',
    'QpStatus',
    'TimeExpandedNetwork',
    'TruckDispatcher',
    'TruckPlan',
    'TruckState',
    'best_route',
    'build_mpc',
    'build_network',
    'build_state',
    'candidate_tree',
    'depot_station',
    'effective_journey_time',
    'greedy_best_action',
    'leaves',
    'plan_all_trucks',
    'predict_open_loop',
    'refine_actions',
    'repair_collisions',
    'solve',
    'solve_and_issue',
]
