import numpy as np
import pytest
from scipy import sparse

from rebalance_lab.control.qp import QpInstance, QpStatus, kkt_polish, residuals, solve


def test_bound_constrained_scalar():
    result = solve(QpInstance(H=[[2.0]], g=[0.0], lb=[1.0]))
    assert result.ok
    assert result.x == pytest.approx([1.0], abs=1e-6)


def test_clamped_box_optimum():
    qp = QpInstance(H=2 * np.eye(2), g=[-6.0, 2.0], lb=[0.0, 0.0], ub=[2.0, 2.0])
    result = solve(qp)
    assert result.status is QpStatus.SOLVED
    assert result.x == pytest.approx([2.0, 0.0], abs=1e-6)
    assert result.residuals["complementarity"] <= 1e-5


def test_equality_constraint():
    # minimize x^2 + y^2 subject to x + y = 2
    qp = QpInstance(H=2 * np.eye(2), g=[0.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[2.0])
    result = solve(qp)
    assert result.x == pytest.approx([1.0, 1.0], abs=1e-6)


def test_infeasible_rows_reported():
    qp = QpInstance(H=[[2.0]], g=[0.0], A=[[1.0]], b=[-1.0], lb=[0.0])
    assert solve(qp).status is QpStatus.INFEASIBLE
    assert solve(QpInstance(H=[[2.0]], g=[0.0], lb=[1.0], ub=[0.0])).status is QpStatus.INFEASIBLE


def test_empty_problem():
    result = solve(QpInstance(H=np.zeros((0, 0)), g=np.zeros(0)))
    assert result.ok and result.x.size == 0


def _random_instance(rng, n=4, m=3):
    root = rng.normal(size=(n, n))
    H = root @ root.T + 0.1 * np.eye(n)
    g = rng.normal(size=n) * 3
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.5, 2.0, m)  # the origin stays feasible
    lb = -rng.uniform(0.5, 2.0, n)
    ub = rng.uniform(0.5, 2.0, n)
    return QpInstance(H, g, A, b, lb=lb, ub=ub)


def test_optimum_beats_random_feasible_points():
    rng = np.random.default_rng(11)
    for _ in range(50):
        qp = _random_instance(rng)
        result = solve(qp)
        assert result.ok
        best = qp.objective(result.x)
        points = rng.uniform(qp.lb, qp.ub, (4000, qp.size))
        feasible = points[np.all(points @ qp.A.T.toarray() <= qp.b, axis=1)][:1000]
        assert len(feasible) > 0
        values = 0.5 * np.einsum("ij,jk,ik->i", feasible, qp.H.toarray(), feasible) + feasible @ qp.g
        assert best <= values.min() + 1e-6
        assert residuals(qp, result.x, result.y)["complementarity"] <= 1e-5


def test_scaling_leaves_argmin_unchanged():
    rng = np.random.default_rng(5)
    qp = _random_instance(rng)
    scaled = QpInstance(qp.H * 7.5, qp.g * 7.5, qp.A, qp.b, lb=qp.lb, ub=qp.ub)
    assert solve(scaled).x == pytest.approx(solve(qp).x, abs=1e-5)


def test_warm_start_repeats_solution():
    rng = np.random.default_rng(9)
    qp = _random_instance(rng)
    cold = solve(qp)
    warm = solve(qp, warm_start=cold.x)
    assert warm.x == pytest.approx(cold.x, abs=1e-6)


def test_kkt_polish_recovers_exact_point():
    qp = QpInstance(H=sparse.identity(2, format="csc") * 2, g=[-6.0, 2.0], lb=[0.0, 0.0], ub=[2.0, 2.0])
    # duals of the two active identity rows: upper bound on x, lower bound on y
    polished = kkt_polish(qp, np.array([2.0, -2.0]))
    assert polished is not None
    x, y = polished
    assert x == pytest.approx([2.0, 0.0])
    assert residuals(qp, x, y)["stationarity"] == pytest.approx(0.0, abs=1e-12)
