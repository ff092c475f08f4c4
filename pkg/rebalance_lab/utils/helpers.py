"""Small shared helpers: projection, hashing, CSV output."""

import hashlib
import json
import os
from typing import Any, Dict, Iterable, Sequence

import numpy as np
import pandas as pd

EARTH_RADIUS_KM = 6371.0


def project_km(latlon: np.ndarray, origin: Sequence[float]) -> np.ndarray:
    """Equirectangular projection of (lat, lon) degrees to km about ``origin``."""
    latlon = np.asarray(latlon, dtype=float)
    lat0 = np.radians(origin[0])
    x = np.radians(latlon[:, 1] - origin[1]) * np.cos(lat0) * EARTH_RADIUS_KM
    y = np.radians(latlon[:, 0] - origin[0]) * EARTH_RADIUS_KM
    return np.column_stack([x, y])


def unproject_km(xy: np.ndarray, origin: Sequence[float]) -> np.ndarray:
    """Inverse of :func:`project_km`."""
    xy = np.asarray(xy, dtype=float)
    lat0 = np.radians(origin[0])
    lat = origin[0] + np.degrees(xy[:, 1] / EARTH_RADIUS_KM)
    lon = origin[1] + np.degrees(xy[:, 0] / (EARTH_RADIUS_KM * np.cos(lat0)))
    return np.column_stack([lat, lon])


def file_digest(paths: Iterable[str]) -> str:
    """SHA-256 over the contents of ``paths`` in the given order."""
    h = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                h.update(chunk)
        h.update(b"\0")
    return h.hexdigest()


def params_digest(params: Dict[str, Any]) -> str:
    """Stable short digest of a JSON-serializable parameter mapping."""
    text = json.dumps(params, sort_keys=True, default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def write_csv(path: str, rows: Sequence[Dict[str, Any]], columns: Sequence[str]):
    """Write rows with fixed float formatting so reruns are byte-identical."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
