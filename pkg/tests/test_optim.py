import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brainqml.optim import (
    OptimizationError,
    OptimizerConfig,
    _trust_region_step,
    cobyla_minimize,
    nelder_mead_minimize,
)


def test_one_dimensional_convex():
    res = cobyla_minimize(lambda x: (x[0] - 1) ** 2, [5.0])
    assert abs(res.x_best[0] - 1) <= 1e-3
    assert res.status == "converged"


def test_linear_objective_over_disk():
    res = cobyla_minimize(lambda x: x[0] + x[1], [0.0, 0.0], [lambda x: 1 - x[0] ** 2 - x[1] ** 2])
    target = -math.sqrt(2) / 2
    assert np.max(np.abs(res.x_best - target)) <= 1e-2
    assert 1 - np.sum(res.x_best**2) >= -1e-6


def test_constraints_respected_on_box():
    # minimize (x-3)^2 + (y+2)^2 with x <= 1, y >= 0: optimum (1, 0)
    res = cobyla_minimize(
        lambda v: (v[0] - 3) ** 2 + (v[1] + 2) ** 2,
        [0.0, 0.5],
        [lambda v: 1 - v[0], lambda v: v[1]],
        OptimizerConfig(rho_begin=0.5, rho_end=1e-6, max_evals=2000),
    )
    assert np.allclose(res.x_best, [1, 0], atol=1e-4)
    assert min(1 - res.x_best[0], res.x_best[1]) >= -1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10**6))
def test_convex_quadratic_error_bound(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    H = A @ A.T + n * np.eye(n)
    xstar = rng.uniform(-2, 2, n)
    cfg = OptimizerConfig(rho_begin=1.0, rho_end=1e-4, max_evals=5000)
    res = cobyla_minimize(lambda x: float((x - xstar) @ H @ (x - xstar)), np.zeros(n), config=cfg)
    assert np.linalg.norm(res.x_best - xstar) <= 10 * cfg.rho_end


def test_f_best_is_history_minimum_and_monotone_curve():
    res = cobyla_minimize(lambda x: np.sum((x - 0.3) ** 2) + np.sin(3 * x[0]), [1.0, -1.0])
    fs = [f for _, f in res.history]
    assert res.f_best == min(fs)
    assert np.all(np.diff(res.best_so_far()) <= 0)
    assert [i for i, _ in res.history] == list(range(1, res.n_evals + 1))


def test_deterministic_sequences():
    f = lambda x: (x[0] - 0.5) ** 2 + 3 * (x[1] + 0.2) ** 4  # noqa: E731
    a = cobyla_minimize(f, [2.0, 2.0])
    b = cobyla_minimize(f, [2.0, 2.0])
    assert a.history == b.history


def test_max_evals_flagged():
    res = cobyla_minimize(lambda x: np.sum(x**2), np.ones(3), config=OptimizerConfig(max_evals=10))
    assert res.hit_max_evals and res.n_evals == 10
    assert res.f_best == min(f for _, f in res.history)


def test_budget_below_dimension_rejected():
    with pytest.raises(ValueError):
        cobyla_minimize(lambda x: 0.0, np.zeros(5), config=OptimizerConfig(max_evals=6))


def test_nonfinite_objective_aborts():
    with pytest.raises(OptimizationError, match="non-finite"):
        cobyla_minimize(lambda x: math.inf if x[0] > 0.5 else x[0] ** 2, [0.0])


def test_config_validation_and_roundtrip():
    with pytest.raises(ValueError):
        OptimizerConfig(rho_begin=1e-5, rho_end=1e-4)
    cfg = OptimizerConfig(rho_begin=0.5, max_evals=77, adaptive_radius=True)
    assert OptimizerConfig.from_dict(cfg.to_dict()) == cfg


def test_curve_csv_header():
    res = cobyla_minimize(lambda x: x[0] ** 2, [1.0], config=OptimizerConfig(max_evals=5))
    lines = res.curve_csv().splitlines()
    assert lines[0] == "eval,objective" and len(lines) == 6


def test_trust_region_step_unconstrained_is_steepest_descent():
    g = np.array([3.0, -4.0])
    d, boundary = _trust_region_step(g, np.zeros((0, 2)), np.zeros(0), 0.5)
    assert boundary and np.allclose(d, -0.5 * g / 5)


def test_trust_region_step_restores_feasibility_first():
    # linearized constraint x0 >= 0.2 violated at d = 0; step must satisfy it
    d, _ = _trust_region_step(np.array([1.0, 0.0]), np.array([[1.0, 0.0]]), np.array([-0.2]), 1.0)
    assert d[0] >= 0.2 - 1e-12 and np.linalg.norm(d) <= 1 + 1e-12


def test_adaptive_radius_converges():
    cfg = OptimizerConfig(adaptive_radius=True, max_evals=3000)
    res = cobyla_minimize(lambda x: (x[0] - 2) ** 2 + (x[1] + 1) ** 2, [0.0, 0.0], config=cfg)
    assert np.allclose(res.x_best, [2, -1], atol=1e-3)


def test_nelder_mead_fallback_same_interface():
    cfg = OptimizerConfig(method="nelder-mead", rho_end=1e-6, max_evals=2000)
    res = cobyla_minimize(lambda x: (x[0] - 1) ** 2 + (x[1] - 2) ** 2, [0.0, 0.0], config=cfg)
    assert np.allclose(res.x_best, [1, 2], atol=1e-3)
    res = nelder_mead_minimize(lambda x: x[0] + x[1], [0.0, 0.0], [lambda x: 1 - x[0] ** 2 - x[1] ** 2], cfg)
    assert np.allclose(res.x_best, -math.sqrt(2) / 2, atol=2e-2)
