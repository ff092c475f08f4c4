"""Convex QP backend.

Problems are ``minimize 1/2 x'Hx + g'x`` subject to ``A x <= b``,
``A_eq x = b_eq`` and ``lb <= x <= ub``. They are handed to OSQP as one
two-sided row block ``l <= C x <= u`` (equality rows, inequality rows, then
one identity row per variable). When OSQP's own polish does not reach the
requested tolerance, the active set read off its duals is polished with a
direct sparse KKT solve.
"""

import enum
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import osqp
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

logger = logging.getLogger(__name__)

ACTIVE_TOL = 1e-9


class QpStatus(enum.Enum):
    SOLVED = "solved"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"
    INACCURATE = "inaccurate"


_OSQP_STATUS = {
    "solved": QpStatus.SOLVED,
    "solved inaccurate": QpStatus.INACCURATE,
    "primal infeasible": QpStatus.INFEASIBLE,
    "primal infeasible inaccurate": QpStatus.INFEASIBLE,
    "maximum iterations reached": QpStatus.MAX_ITER,
}


def _as_csc(matrix, shape) -> sparse.csc_matrix:
    if matrix is None:
        return sparse.csc_matrix(shape)
    return sparse.csc_matrix(matrix, dtype=float)


@dataclass
class QpInstance:
    H: sparse.csc_matrix
    g: np.ndarray
    A: Optional[sparse.csc_matrix] = None
    b: Optional[np.ndarray] = None
    A_eq: Optional[sparse.csc_matrix] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float).ravel()
        n = len(self.g)
        H = _as_csc(self.H, (n, n))
        if H.shape != (n, n):
            raise ValueError(f"H has shape {H.shape}, expected {(n, n)}")
        self.H = ((H + H.T) * 0.5).tocsc()
        self.A = _as_csc(self.A, (0, n))
        self.b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).ravel()
        self.A_eq = _as_csc(self.A_eq, (0, n))
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).ravel()
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).ravel()
        if self.A.shape != (len(self.b), n) or self.A_eq.shape != (len(self.b_eq), n):
            raise ValueError("constraint matrices and right-hand sides disagree in shape")
        if len(self.lb) != n or len(self.ub) != n:
            raise ValueError("bounds must have one entry per variable")

    @property
    def size(self) -> int:
        return len(self.g)

    def rows(self):
        """Stacked two-sided system ``(C, l, u)``."""
        n = self.size
        C = sparse.vstack([self.A_eq, self.A, sparse.identity(n, format="csc")], format="csc")
        lower = np.concatenate([self.b_eq, np.full(len(self.b), -np.inf), self.lb])
        upper = np.concatenate([self.b_eq, self.b, self.ub])
        return C, lower, upper

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.H @ x) + self.g @ x)


@dataclass
class QpResult:
    x: np.ndarray
    status: QpStatus
    residuals: Dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    objective: float = float("nan")
    y: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.status is QpStatus.SOLVED


def residuals(qp: QpInstance, x: np.ndarray, y: np.ndarray) -> Dict[str, float]:
    """Primal feasibility, stationarity and complementarity (infinity norms).

    Duals follow OSQP's sign convention: positive on active upper bounds,
    negative on active lower bounds.
    """
    C, lower, upper = qp.rows()
    cx = C @ x
    primal = np.maximum(0.0, np.maximum(cx - upper, lower - cx))
    stationarity = qp.H @ x + qp.g + C.T @ y
    slack_up = np.where(np.isfinite(upper), upper - cx, 0.0)
    slack_lo = np.where(np.isfinite(lower), cx - lower, 0.0)
    comp = np.maximum(y, 0.0) * np.abs(slack_up) + np.maximum(-y, 0.0) * np.abs(slack_lo)
    return {
        "primal": float(primal.max(initial=0.0)),
        "stationarity": float(np.abs(stationarity).max(initial=0.0)),
        "complementarity": float(comp.max(initial=0.0)),
    }


def _within(res: Dict[str, float], tol: float) -> bool:
    return res["primal"] <= tol and res["stationarity"] <= tol and res["complementarity"] <= 10 * tol


def kkt_polish(qp: QpInstance, y: np.ndarray):
    """Re-solve the equality-constrained KKT system on the active set of ``y``.

    Returns ``(x, y)`` or None when the system is singular or the duals of
    the polished point have the wrong sign.
    """
    C, lower, upper = qp.rows()
    n = qp.size
    equal = np.isclose(lower, upper)
    up = (y > ACTIVE_TOL) & np.isfinite(upper)
    lo = (y < -ACTIVE_TOL) & np.isfinite(lower)
    active = np.flatnonzero(equal | up | lo)
    target = np.where(lo[active] & ~equal[active], lower[active], upper[active])
    C_act = C[active]
    if len(active):
        kkt = sparse.bmat([[qp.H, C_act.T], [C_act, None]], format="csc")
    else:
        kkt = qp.H.tocsc()
    rhs = np.concatenate([-qp.g, target])
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            solution = spsolve(kkt, rhs) if kkt.shape[0] else np.zeros(0)
        except (MatrixRankWarning, RuntimeError):
            return None
    solution = np.atleast_1d(solution)
    if not np.all(np.isfinite(solution)):
        return None
    x, nu = solution[:n], solution[n:]
    polished = np.zeros(len(lower))
    polished[active] = nu
    if np.any(polished[up & ~equal] < -ACTIVE_TOL) or np.any(polished[lo & ~equal] > ACTIVE_TOL):
        return None
    return x, polished


def solve(qp: QpInstance, tol: float = 1e-6, max_iter: int = 20000,
          warm_start: Optional[np.ndarray] = None) -> QpResult:
    """Solve ``qp``; deterministic for identical inputs."""
    n = qp.size
    if n == 0:
        return QpResult(np.zeros(0), QpStatus.SOLVED, {"primal": 0.0, "stationarity": 0.0,
                                                         "complementarity": 0.0}, 0, 0.0, np.zeros(0))
    C, lower, upper = qp.rows()
    if np.any(lower > upper):
        return QpResult(np.zeros(n), QpStatus.INFEASIBLE)

    prob = osqp.OSQP()
    prob.setup(sparse.triu(qp.H, format="csc"), qp.g, C, lower, upper,
               eps_abs=tol * 1e-2, eps_rel=tol * 1e-2, max_iter=max_iter, polish=True,
               verbose=False, warm_start=warm_start is not None)
    if warm_start is not None and len(warm_start) == n:
        prob.warm_start(x=np.asarray(warm_start, dtype=float))
    res = prob.solve()
    status = _OSQP_STATUS.get(res.info.status, QpStatus.INACCURATE)
    iterations = int(res.info.iter)

    if status is QpStatus.INFEASIBLE:
        logger.warning("QP infeasible (%d variables, %d rows)", n, C.shape[0])
        return QpResult(np.zeros(n), status, iterations=iterations)
    if res.x is None or not np.all(np.isfinite(res.x)):
        logger.warning("QP solver returned no iterate (status '%s')", res.info.status)
        return QpResult(np.zeros(n), QpStatus.INACCURATE, iterations=iterations)

    x, y = np.asarray(res.x, dtype=float), np.asarray(res.y, dtype=float)
    found = residuals(qp, x, y)
    if not _within(found, tol):
        polished = kkt_polish(qp, y)
        if polished is not None:
            px, py = polished
            polished_res = residuals(qp, px, py)
            if _within(polished_res, tol) or polished_res["primal"] + polished_res["stationarity"] < \
                    found["primal"] + found["stationarity"]:
                x, y, found = px, py, polished_res
                logger.debug("KKT polish applied after OSQP status '%s'", res.info.status)

    if _within(found, tol):
        status = QpStatus.SOLVED
    elif status is QpStatus.SOLVED:
        status = QpStatus.INACCURATE
    if status is not QpStatus.SOLVED:
        logger.warning("QP ended with status %s (residuals %s)", status.value,
                       {k: f"{v:.1e}" for k, v in found.items()})
    return QpResult(x, status, found, iterations, qp.objective(x), y)
