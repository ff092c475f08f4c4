"""Shared fixtures: hand-built station layouts, stub rate models and a small fitted corpus."""

import numpy as np
import pytest

from rebalance_lab.config.settings import (
    CustomerConfig,
    LabSettings,
    ModelConfig,
    RoutingConfig,
    SimConfig,
    SyntheticSpec,
)
from rebalance_lab.data import generate_synthetic
from rebalance_lab.data.records import StationRecord, StationTable
from rebalance_lab.model.bundle import fit_models
from rebalance_lab.model.demand import RateModel
from rebalance_lab.model.geometry import Geometry, reverse_sets


def rate_model(flows: np.ndarray) -> RateModel:
    """Rate model with the same per-minute OD flows in every slice of both day types."""
    flows = np.asarray(flows, dtype=float)
    S = flows.shape[0]
    M = np.broadcast_to(flows, (2, 72, S, S)).copy()
    return RateModel(M, M.copy(), np.full((2, 72), 20))


def zero_rates(station_count: int) -> RateModel:
    return rate_model(np.zeros((station_count, station_count)))


class FixedPlateaus:
    """Plateau table stub returning the same bounds at every minute."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)

    def row(self, minute):
        return self.lower, self.upper, np.zeros(len(self.lower), dtype=bool)


def make_geometry(xy, neighbor_count: int = 3, speed_kmh: float = 12.0) -> Geometry:
    """Geometry without Voronoi walks: effective distance equals the straight-line distance."""
    xy = np.asarray(xy, dtype=float)
    d = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=2)
    neighbors = []
    for s in range(len(xy)):
        others = [j for j in np.argsort(d[s], kind="stable") if j != s]
        neighbors.append(np.array(others[:neighbor_count], dtype=int))
    travel = np.maximum(1, np.floor(d / speed_kmh * 60.0 + 0.5)).astype(int)
    return Geometry(
        xy=xy, d_eucl=d, centers_xy=xy.copy(), centers_latlon=xy.copy(), walk=np.zeros(len(xy)),
        d_tilde=d.copy(), travel_time=travel, speed_kmh=speed_kmh, neighbors=neighbors,
        reverse_neighbors=reverse_sets(neighbors), origin=(0.0, 0.0),
    )


def station_table(capacity) -> StationTable:
    return StationTable([StationRecord(id=i + 1, name=f"S{i + 1}", lat=51.5 + 0.001 * i, lon=-0.1, size=int(c))
                         for i, c in enumerate(capacity)])


@pytest.fixture
def routing_config():
    return RoutingConfig(window_start=0, window_end=1440)


@pytest.fixture(scope="session")
def small_spec():
    return SyntheticSpec(station_count=8, fleet_size=60, weekday_days=3, weekend_days=2,
                         min_capacity=10, max_capacity=20, radius_km=1.5, seed=11)


@pytest.fixture(scope="session")
def small_corpus(small_spec):
    return generate_synthetic(small_spec)


@pytest.fixture(scope="session")
def small_settings(small_spec):
    return LabSettings(
        corpus=small_spec,
        model=ModelConfig(neighbor_count=3),
        customer=CustomerConfig(samples=80, customers=100),
        sim=SimConfig(burn_in_days=0, measured_days=1),
    ).validate()


@pytest.fixture(scope="session")
def small_bundle(small_corpus, small_settings):
    return fit_models(small_corpus, small_settings.model, small_settings.customer)
