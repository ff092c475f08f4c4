"""Exception hierarchy shared by every rebalance_lab component."""

from typing import Iterable, Optional, Sequence


class LabError(Exception):
    """Base class for all laboratory errors."""

    exit_code = 3


class ConfigError(LabError):
    """Invalid configuration file, unknown key or bad flag value."""

    exit_code = 1


class DataError(LabError):
    """Corpus or cache content that violates its schema.

    ``lines`` holds 1-based line numbers (the header is line 1) of the
    offending rows when the error comes from a CSV file.
    """

    exit_code = 2

    def __init__(self, message: str, lines: Optional[Iterable[int]] = None, path: Optional[str] = None):
        self.lines: Sequence[int] = tuple(lines or ())
        self.path = path
        where = f"{path}: " if path else ""
        if self.lines:
            shown = ", ".join(str(n) for n in self.lines[:10])
            more = f" (+{len(self.lines) - 10} more)" if len(self.lines) > 10 else ""
            message = f"{where}{message} [line {shown}{more}]"
        else:
            message = f"{where}{message}"
        super().__init__(message)


class GeometryError(DataError):
    """Station layout that admits no Voronoi partition."""


class FeasibilityError(LabError):
    """Requested fill change leaves the station bounds."""


class SolverError(LabError):
    """Unrecoverable failure in the QP backend."""


class SimulationError(LabError):
    """Broken simulator invariant (bike conservation, nowhere to dock)."""
