"""Station geometry: distances, Voronoi centers, effective distances, neighbor sets."""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from shapely.errors import GEOSException
from shapely.geometry import MultiPoint, Point, Polygon, box
from shapely.ops import voronoi_diagram

from ..config.settings import ModelConfig
from ..core.errors import DataError, GeometryError
from ..data.records import RideArrays, StationTable
from ..utils.helpers import project_km, unproject_km
from .demand import travel_times

logger = logging.getLogger(__name__)

BoundingBox = Tuple[float, float, float, float]  # xmin, xmax, ymin, ymax


@dataclass(frozen=True)
class PairIndex:
    """Flat indexing of (station, neighbor) pairs.

    Pairs of station ``s`` occupy ``offsets[s]:offsets[s + 1]`` in neighbor
    order; ``src[k]`` / ``dst[k]`` are the station positions of pair ``k``.
    """

    src: np.ndarray
    dst: np.ndarray
    offsets: np.ndarray

    @classmethod
    def from_neighbors(cls, neighbors: Sequence[np.ndarray]) -> "PairIndex":
        sizes = np.array([len(n) for n in neighbors], dtype=int)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        src = np.repeat(np.arange(len(neighbors)), sizes)
        dst = np.concatenate(neighbors).astype(int) if len(src) else np.zeros(0, dtype=int)
        return cls(src=src, dst=dst, offsets=offsets)

    def __len__(self) -> int:
        return len(self.src)

    def of(self, s: int) -> slice:
        return slice(int(self.offsets[s]), int(self.offsets[s + 1]))


@dataclass
class Geometry:
    """Immutable geometry of a station network, all distances in km."""

    xy: np.ndarray
    d_eucl: np.ndarray
    centers_xy: np.ndarray
    centers_latlon: np.ndarray
    walk: np.ndarray
    d_tilde: np.ndarray
    travel_time: np.ndarray
    speed_kmh: float
    neighbors: List[np.ndarray]
    reverse_neighbors: List[np.ndarray]
    origin: Tuple[float, float]

    @property
    def station_count(self) -> int:
        return len(self.xy)

    @cached_property
    def d_choice(self) -> np.ndarray:
        """Effective distances clamped at zero, as perceived by customers."""
        return np.maximum(self.d_tilde, 0.0)

    @cached_property
    def pairs(self) -> PairIndex:
        return PairIndex.from_neighbors(self.neighbors)

    def save(self, path: str):
        sizes = np.array([len(n) for n in self.neighbors], dtype=int)
        flat = np.concatenate(self.neighbors) if len(self.neighbors) else np.zeros(0, dtype=int)
        np.savez_compressed(
            path, xy=self.xy, d_eucl=self.d_eucl, centers_xy=self.centers_xy,
            centers_latlon=self.centers_latlon, walk=self.walk, d_tilde=self.d_tilde,
            travel_time=self.travel_time, speed_kmh=self.speed_kmh,
            neighbor_sizes=sizes, neighbor_flat=flat, origin=np.array(self.origin),
        )

    @classmethod
    def load(cls, path: str) -> "Geometry":
        try:
            with np.load(path) as data:
                splits = np.cumsum(data["neighbor_sizes"])[:-1]
                neighbors = [a.astype(int) for a in np.split(data["neighbor_flat"], splits)]
                return cls(
                    xy=data["xy"], d_eucl=data["d_eucl"], centers_xy=data["centers_xy"],
                    centers_latlon=data["centers_latlon"], walk=data["walk"],
                    d_tilde=data["d_tilde"], travel_time=data["travel_time"],
                    speed_kmh=float(data["speed_kmh"]), neighbors=neighbors,
                    reverse_neighbors=reverse_sets(neighbors), origin=tuple(data["origin"]),
                )
        except (OSError, KeyError, ValueError) as e:
            raise DataError(f"unreadable geometry cache: {e}", path=path) from e


def voronoi_cells(points: np.ndarray, bbox: BoundingBox) -> List[Polygon]:
    """Voronoi cells of ``points`` clipped to ``bbox``, one polygon per point.

    Co-located stations share one cell.
    """
    points = np.asarray(points, dtype=float)
    if len(points) < 3:
        raise GeometryError(f"Voronoi partition needs at least 3 stations, got {len(points)}")
    if np.linalg.matrix_rank(points - points.mean(axis=0), tol=1e-9) < 2:
        raise GeometryError("stations are collinear; no Voronoi partition")

    xmin, xmax, ymin, ymax = bbox
    frame = box(xmin, ymin, xmax, ymax)
    try:
        regions = list(voronoi_diagram(MultiPoint(points), envelope=frame).geoms)
    except GEOSException as e:
        raise GeometryError(f"Voronoi construction failed: {e}") from e

    cells = []
    for p in points:
        site = Point(p)
        region = min(regions, key=site.distance)
        cells.append(region.intersection(frame))
    return cells


def voronoi_centers(points: np.ndarray, bbox: BoundingBox) -> np.ndarray:
    """Center of mass of each station's clipped Voronoi cell."""
    centers = []
    for p, cell in zip(np.asarray(points, dtype=float), voronoi_cells(points, bbox)):
        # a station on the frame edge can end up with a zero-area cell
        centers.append(p if cell.is_empty or cell.area == 0 else np.array(cell.centroid.coords[0]))
    return np.array(centers)


def effective_distance(i: int, j: int, geometry: Geometry, clamped: bool = False) -> float:
    """Cycling distance plus doubled walk from the destination cell minus the saved walk at the origin."""
    if i == j:
        return 0.0
    value = float(geometry.d_eucl[i, j] + 2.0 * geometry.walk[j] - 2.0 * geometry.walk[i])
    return max(value, 0.0) if clamped else value


def effective_distance_matrix(d_eucl: np.ndarray, walk: np.ndarray) -> np.ndarray:
    d = d_eucl + 2.0 * walk[None, :] - 2.0 * walk[:, None]
    np.fill_diagonal(d, 0.0)
    return d


def neighbor_sets(d_tilde: np.ndarray, count: int) -> List[np.ndarray]:
    """``count`` stations of smallest positive effective distance, nearest first.

    Ties go to the lower station position.
    """
    neighbors = []
    for s in range(d_tilde.shape[0]):
        row = d_tilde[s]
        candidates = np.flatnonzero(row > 0)
        candidates = candidates[candidates != s]
        order = np.lexsort((candidates, row[candidates]))
        neighbors.append(candidates[order][:count].astype(int))
    return neighbors


def reverse_sets(neighbors: Sequence[np.ndarray]) -> List[np.ndarray]:
    reverse = [[] for _ in neighbors]
    for s, ns in enumerate(neighbors):
        for n in ns:
            reverse[int(n)].append(s)
    return [np.array(r, dtype=int) for r in reverse]


def build_geometry(stations: StationTable, rides: Optional[RideArrays],
                   config: Optional[ModelConfig] = None) -> Geometry:
    """Project stations, compute Voronoi centers, effective distances and neighbor sets."""
    config = config or ModelConfig()
    latlon = stations.latlon
    origin = tuple(float(v) for v in latlon.mean(axis=0))
    xy = project_km(latlon, origin)
    d_eucl = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=2)

    pad = config.bbox_padding_km
    bbox = (xy[:, 0].min() - pad, xy[:, 0].max() + pad, xy[:, 1].min() - pad, xy[:, 1].max() + pad)
    centers = voronoi_centers(xy, bbox)
    walk = np.linalg.norm(xy - centers, axis=1)
    d_tilde = effective_distance_matrix(d_eucl, walk)
    negative = int((d_tilde < 0).sum())
    if negative:
        logger.debug("%d station pairs have negative effective distance; clamped for choices", negative)

    neighbors = neighbor_sets(d_tilde, config.neighbor_count)
    short = [s for s, n in enumerate(neighbors) if len(n) < config.neighbor_count]
    if short:
        logger.debug("%d stations have fewer than %d neighbors", len(short), config.neighbor_count)

    if rides is None:
        rides = RideArrays(*(np.zeros(0, dtype=int) for _ in range(4)))
    times, speed = travel_times(rides, d_eucl)
    logger.info("Built geometry for %d stations (median speed %.1f km/h)", len(stations), speed)
    return Geometry(
        xy=xy, d_eucl=d_eucl, centers_xy=centers, centers_latlon=unproject_km(centers, origin),
        walk=walk, d_tilde=d_tilde, travel_time=times, speed_kmh=speed,
        neighbors=neighbors, reverse_neighbors=reverse_sets(neighbors), origin=origin,
    )
