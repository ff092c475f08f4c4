"""Utility functions and classes."""

from .cache import ModelCache, RunManifest, manifest_path
from .helpers import file_digest, params_digest, project_km, unproject_km, write_csv

__all__ = [
    'ModelCache',
    'RunManifest',
    'manifest_path',
    'file_digest',
    'params_digest',
    'project_km',
    'unproject_km',
    'write_csv',
]
