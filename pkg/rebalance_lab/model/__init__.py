"""Demand, geometry, utility and customer models."""

from .bundle import ModelBundle, fit_models, load_or_fit
from .customer import (
    CostSampler,
    LinearResponse,
    acceptance_probability,
    analytic_acceptance,
    choose,
    fit_linear_response,
    next_hop,
    overflow_walk,
)
from .demand import DemandTimeline, FlowSummary, RateModel, fit_rates, flow_summary, travel_times
from .geometry import Geometry, PairIndex, build_geometry, effective_distance, voronoi_centers
from .utility import (
    Plateau,
    PlateauTable,
    compute_plateau,
    propagate_fill,
    utility_exact,
    utility_fast,
    verify_plateau,
)

__all__ = [
    'CostSampler',
    'DemandTimeline',
    'FlowSummary',
    'Geometry',
    'LinearResponse',
    'ModelBundle',
    'PairIndex',
    'Plateau',
    'PlateauTable',
    'RateModel',
    'acceptance_probability',
    'analytic_acceptance',
    'build_geometry',
    'choose',
    'compute_plateau',
    'effective_distance',
    'fit_linear_response',
    'fit_models',
    'fit_rates',
    'flow_summary',
    'load_or_fit',
    'next_hop',
    'overflow_walk',
    'propagate_fill',
    'travel_times',
    'utility_exact',
    'utility_fast',
    'verify_plateau',
    'voronoi_centers',
]
