"""BFGS and line-search behavior on classical problems."""

import numpy as np
import pytest

from pinncal.optimizer import OptimResult, StopCriteria, bfgs_minimize


def quadratic(a_matrix, b):
    def objective(x):
        return 0.5 * x @ a_matrix @ x - b @ x, a_matrix @ x - b
    return objective


def test_quadratic_exact_minimum():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((6, 6))
    a_matrix = m @ m.T + 6 * np.eye(6)
    b = rng.standard_normal(6)
    res = bfgs_minimize(quadratic(a_matrix, b), np.zeros(6))
    assert res.status in ("gradient_converged", "loss_converged")
    assert np.allclose(res.x, np.linalg.solve(a_matrix, b), atol=1e-7)


def test_rosenbrock():
    def objective(x):
        a, b = 1.0, 100.0
        f = (a - x[0]) ** 2 + b * (x[1] - x[0] ** 2) ** 2
        g = np.array([-2 * (a - x[0]) - 4 * b * x[0] * (x[1] - x[0] ** 2),
                      2 * b * (x[1] - x[0] ** 2)])
        return f, g

    res = bfgs_minimize(objective, np.array([-1.2, 1.0]))
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-6)
    assert res.value < 1e-12


def test_infeasible_region_barrier():
    # +inf outside x > 0.1 forces the line search to backtrack
    def objective(x):
        if x[0] <= 0.1:
            return np.inf, np.full(1, np.nan)
        f = (np.log(x[0]) - 1.0) ** 2
        return f, np.array([2 * (np.log(x[0]) - 1.0) / x[0]])

    res = bfgs_minimize(objective, np.array([0.2]))
    assert res.x[0] == pytest.approx(np.e, rel=1e-6)


def test_monotone_decrease_and_history():
    rng = np.random.default_rng(2)
    a_matrix = np.diag(rng.uniform(1, 50, size=8))
    res = bfgs_minimize(quadratic(a_matrix, np.ones(8)), np.ones(8) * 3)
    values = [h[1] for h in res.history]
    assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))
    assert res.history[0][0] == 0
    assert isinstance(res, OptimResult)


def test_max_iterations_status():
    def objective(x):
        f = (1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2
        g = np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2),
                      200 * (x[1] - x[0] ** 2)])
        return f, g

    res = bfgs_minimize(objective, np.array([-1.2, 1.0]),
                        StopCriteria(max_iters=2, loss_change_tol=1e-30))
    assert res.status == "max_iterations"
    assert res.iterations == 2


def test_nonfinite_start_rejected():
    def objective(x):
        return np.inf, x

    with pytest.raises(ValueError):
        bfgs_minimize(objective, np.zeros(2))


def test_invalid_criteria():
    with pytest.raises(ValueError):
        StopCriteria(max_iters=0)
    with pytest.raises(ValueError):
        StopCriteria(grad_tol=0.0)


def test_callback_sees_accepted_iterates():
    seen = []

    def objective(x):
        return float(x @ x), 2 * x

    bfgs_minimize(objective, np.array([1.0, -2.0]),
                  callback=lambda k, x, f: seen.append((k, f)))
    assert seen and seen[0][0] == 1
    assert seen[-1][1] <= seen[0][1]


def test_scaling_flag_off_still_converges():
    rng = np.random.default_rng(3)
    a_matrix = np.diag(rng.uniform(0.5, 5, size=4))
    res = bfgs_minimize(quadratic(a_matrix, np.ones(4)), np.zeros(4),
                        StopCriteria(scale_initial_hessian=False))
    assert np.allclose(res.x, np.linalg.solve(a_matrix, np.ones(4)), atol=1e-7)
