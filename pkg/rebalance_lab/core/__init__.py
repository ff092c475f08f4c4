"""Core laboratory modules.

The facade lives in ``core.facade`` and is re-exported from the top-level
package; it is not imported here because every sub-package depends on
``core.errors``.
"""

from .errors import (
    ConfigError,
    DataError,
    FeasibilityError,
    GeometryError,
    LabError,
    SimulationError,
    SolverError,
)
from .seeding import stream

__all__ = [
    'LabError',
    'ConfigError',
    'DataError',
    'GeometryError',
    'FeasibilityError',
    'SolverError',
    'SimulationError',
    'stream',
]
