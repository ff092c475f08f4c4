"""Customer decision model and its linear surrogate.

A returning customer at station ``s`` is offered payout ``p[n]`` for riding on
to neighbor ``n``; with marginal travel cost ``c`` (per km) the offer is worth
``p[n] - d[n] * c``. The customer takes the best offer if it is worth more
than nothing, or unconditionally when ``s`` is full.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import sparse

from ..config.settings import CustomerConfig
from ..core.errors import DataError, SimulationError
from ..core.seeding import FIT_STREAM, stream
from .geometry import Geometry, PairIndex

logger = logging.getLogger(__name__)


class CostSampler:
    """Marginal travel cost distribution; uniform on ``[0, c_max]``."""

    def __init__(self, c_max: float = 20.0):
        self.c_max = float(c_max)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(0.0, self.c_max, size)


def choose(payouts: np.ndarray, cost: float, target_full: bool, distances: np.ndarray) -> Optional[int]:
    """Index of the accepted offer, or None. Ties go to the lowest index."""
    if len(payouts) == 0:
        return None
    values = np.asarray(payouts, dtype=float) - np.asarray(distances, dtype=float) * cost
    best = int(np.argmax(values))
    if target_full or values[best] > 0:
        return best
    return None


def next_hop(current: int, visited: set, geometry: Geometry, payouts: np.ndarray, cost: float) -> int:
    """Station a customer rides to from the full station ``current``.

    ``payouts`` is the flat per-pair payout vector; the customer re-reads the
    offers of every station it reaches.
    """
    pairs = geometry.pairs
    span = pairs.of(current)
    neighbors = geometry.neighbors[current]
    open_mask = np.array([int(n) not in visited for n in neighbors], dtype=bool)
    if open_mask.any():
        candidates = neighbors[open_mask]
        offers = payouts[span][open_mask] if len(payouts) else np.zeros(len(candidates))
        pick = choose(offers, cost, True, geometry.d_choice[current, candidates])
        return int(candidates[pick])

    distances = geometry.d_eucl[current].copy()
    distances[list(visited)] = np.inf
    distances[current] = np.inf
    if not np.isfinite(distances).any():
        raise SimulationError("every station is full; nowhere to return the bike")
    return int(np.argmin(distances))


def overflow_walk(target: int, visited: set, fills: np.ndarray, capacity: np.ndarray,
                  geometry: Geometry, payouts: np.ndarray, cost: float) -> Tuple[int, List[int]]:
    """Walk from the full ``target`` until a station with a free dock is reached.

    Returns the final station and the stations passed on the way. ``visited``
    is updated in place; no station is entered twice.
    """
    current, path = int(target), []
    visited.add(current)
    while fills[current] >= capacity[current]:
        current = next_hop(current, visited, geometry, payouts, cost)
        visited.add(current)
        path.append(current)
    return current, path


def acceptance_fractions(payouts: np.ndarray, distances: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Fraction of customers with the given cost draws that accept each offer.

    ``payouts`` may be a single vector (N,) or a batch (P, N) against cost
    draws of shape (P, C).
    """
    payouts = np.atleast_2d(np.asarray(payouts, dtype=float))
    costs = np.atleast_2d(costs)
    n = payouts.shape[1]
    if n == 0:
        return np.zeros((payouts.shape[0], 0))
    values = payouts[:, None, :] - costs[:, :, None] * np.asarray(distances, dtype=float)[None, None, :]
    best = np.argmax(values, axis=2)
    taken = np.take_along_axis(values, best[:, :, None], axis=2)[:, :, 0] > 0
    fractions = np.zeros((payouts.shape[0], n))
    for k in range(n):
        fractions[:, k] = ((best == k) & taken).mean(axis=1)
    return fractions


def acceptance_probability(payouts: np.ndarray, distances: np.ndarray, sampler: CostSampler,
                           customers: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo probability that a customer at a non-full station takes each offer."""
    costs = sampler.sample(rng, (1, customers))
    return acceptance_fractions(payouts, distances, costs)[0]


def analytic_acceptance(payout: float, distance: float, c_max: float) -> float:
    """Exact acceptance probability for a single offer."""
    if payout <= 0:
        return 0.0
    if distance <= 0:
        return 1.0
    return min(1.0, payout / (c_max * distance))


def fit_station_response(distances: np.ndarray, p_max: float, samples: int, customers: int,
                         sampler: CostSampler, rng: np.random.Generator) -> np.ndarray:
    """Least-squares fit of ``delta_n ~ pi_n . p`` for one station.

    Returns the ``(N, N)`` block whose row ``n`` is the coefficient vector of
    neighbor ``n``. No intercept.
    """
    n = len(distances)
    if n == 0:
        return np.zeros((0, 0))
    design = rng.uniform(0.0, p_max, (samples, n))
    delta = acceptance_fractions(design, distances, sampler.sample(rng, (samples, customers)))
    coef, _, rank, _ = np.linalg.lstsq(design, delta, rcond=None)
    if rank < n:
        logger.warning("Rank-deficient response design (rank %d < %d); using zero coefficients", rank, n)
        return np.zeros((n, n))
    return coef.T


@dataclass
class LinearResponse:
    """Linearized diversion fractions ``pi_bar[k] = (Pi @ p)[k]`` per pair ``k``."""

    pairs: PairIndex
    blocks: List[np.ndarray]

    def matrix(self) -> sparse.csr_matrix:
        """Block-diagonal ``Pi`` over all pairs."""
        if len(self.pairs) == 0:
            return sparse.csr_matrix((0, 0))
        return sparse.block_diag([b for b in self.blocks if b.size], format="csr")

    def predict(self, payouts: np.ndarray) -> np.ndarray:
        return self.matrix() @ np.asarray(payouts, dtype=float)

    def save(self, path: str):
        flat = np.concatenate([b.ravel() for b in self.blocks]) if self.blocks else np.zeros(0)
        np.savez_compressed(path, src=self.pairs.src, dst=self.pairs.dst,
                            offsets=self.pairs.offsets, flat=flat)

    @classmethod
    def load(cls, path: str) -> "LinearResponse":
        try:
            with np.load(path) as data:
                pairs = PairIndex(src=data["src"], dst=data["dst"], offsets=data["offsets"])
                sizes = np.diff(pairs.offsets)
                blocks, start = [], 0
                for size in sizes:
                    blocks.append(data["flat"][start:start + size * size].reshape(size, size))
                    start += size * size
        except (OSError, KeyError, ValueError) as e:
            raise DataError(f"unreadable response cache: {e}", path=path) from e
        return cls(pairs=pairs, blocks=blocks)


def fit_linear_response(geometry: Geometry, config: Optional[CustomerConfig] = None,
                        jobs: int = 1) -> LinearResponse:
    """Fit every station's linear response; station ``s`` draws from stream ``(1, s)``."""
    config = config or CustomerConfig()
    sampler = CostSampler(config.c_max)

    def fit_one(s):
        rng = stream(config.seed, (FIT_STREAM, s))
        return fit_station_response(geometry.d_choice[s, geometry.neighbors[s]], config.p_max,
                                    config.samples, config.customers, sampler, rng)

    blocks = Parallel(n_jobs=jobs)(delayed(fit_one)(s) for s in range(geometry.station_count))
    logger.info("Fitted linear customer response for %d stations", len(blocks))
    return LinearResponse(pairs=geometry.pairs, blocks=list(blocks))
