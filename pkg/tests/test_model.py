import math

import numpy as np
import pytest

from sfsparse import model
from helpers import conjugate_grid_sup


def test_quadratic_value_zero_residual():
    y = np.array([1.0, -2.0, 3.0])
    assert model.loss_value(model.QUADRATIC, y, y) == 0.0


def test_quadratic_value_direct_arithmetic():
    val = model.loss_value(model.QUADRATIC, np.array([1.0, 0.0]), np.array([3.0, 2.0]))
    assert val == pytest.approx(2.0, abs=1e-12)


def test_logistic_value_at_origin():
    val = model.loss_value(model.LOGISTIC, np.array([0.0]), np.array([1.0]))
    assert val == pytest.approx(math.log(2.0), abs=1e-12)


def test_gradient_trivial_cases():
    y = np.array([1.0, -2.0])
    assert np.allclose(model.loss_gradient(model.QUADRATIC, y, y), 0.0)
    g = model.loss_gradient(model.LOGISTIC, np.array([0.0]), np.array([1.0]))
    assert g == pytest.approx([-0.5], abs=1e-12)
    g2 = model.loss_gradient(model.QUADRATIC, np.array([1.0, 0.0]), np.array([3.0, 2.0]))
    assert np.allclose(g2, [-1.0, -1.0], atol=1e-12)


@pytest.mark.parametrize("loss", [model.QUADRATIC, model.LOGISTIC])
def test_gradient_matches_central_differences(loss):
    rng = np.random.default_rng(42)
    step = 1e-6
    for _ in range(20):
        n = int(rng.integers(1, 9))
        z = rng.normal(0.0, 2.0, n)
        y = rng.normal(0.0, 2.0, n) if loss == model.QUADRATIC else \
            rng.choice([-1.0, 1.0], n)
        grad = model.loss_gradient(loss, z, y)
        for i in range(n):
            zp, zm = z.copy(), z.copy()
            zp[i] += step
            zm[i] -= step
            fd = (model.loss_value(loss, zp, y) - model.loss_value(loss, zm, y)) / (2 * step)
            assert fd == pytest.approx(grad[i], rel=1e-5, abs=1e-10)


@pytest.mark.parametrize("loss", [model.QUADRATIC, model.LOGISTIC])
def test_curvature_matches_gradient_differences(loss):
    rng = np.random.default_rng(3)
    z = rng.normal(0.0, 1.0, 5)
    y = rng.normal(0.0, 1.0, 5) if loss == model.QUADRATIC else rng.choice([-1.0, 1.0], 5)
    curv = model.loss_curvature(loss, z, y)
    step = 1e-6
    for i in range(5):
        zp, zm = z.copy(), z.copy()
        zp[i] += step
        zm[i] -= step
        fd = (model.loss_gradient(loss, zp, y)[i] - model.loss_gradient(loss, zm, y)[i]) / (2 * step)
        assert fd == pytest.approx(curv[i], rel=1e-4, abs=1e-10)


def test_quadratic_conjugate_examples():
    y = np.array([1.0, -1.0])
    assert model.loss_conjugate(model.QUADRATIC, np.zeros(2), y) == pytest.approx(0.0, abs=1e-15)
    s = np.array([0.5, 0.5])
    val = model.loss_conjugate(model.QUADRATIC, s, y)
    assert val == pytest.approx(0.5, abs=1e-12)
    grid = conjugate_grid_sup(model.QUADRATIC, s, y, lo=-20, hi=20, step=1e-3)
    assert val == pytest.approx(grid, abs=1e-5)


def test_logistic_conjugate_against_grid():
    y = np.array([1.0])
    s = np.array([-0.5])
    val = model.loss_conjugate(model.LOGISTIC, s, y)
    assert val == pytest.approx(-math.log(2.0), abs=1e-12)
    grid = conjugate_grid_sup(model.LOGISTIC, s, y)
    assert val == pytest.approx(grid, abs=1e-6)


def test_logistic_conjugate_domain():
    y = np.array([1.0, -1.0])
    assert model.loss_conjugate(model.LOGISTIC, np.array([0.3, 0.0]), y) == np.inf
    assert model.loss_conjugate(model.LOGISTIC, np.array([-0.6, 0.0]), y) == np.inf
    # boundary: sigma in {0, -1} uses the 0*log0 = 0 convention
    assert model.loss_conjugate(model.LOGISTIC, np.array([0.0, 0.0]), y) == pytest.approx(0.0)
    assert model.loss_conjugate(model.LOGISTIC, np.array([-0.5, 0.5]), y) == pytest.approx(0.0)


@pytest.mark.parametrize("loss", [model.QUADRATIC, model.LOGISTIC])
def test_fenchel_young(loss):
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(1, 21))
        z = rng.normal(0.0, 3.0, n)
        y = rng.normal(0.0, 2.0, n) if loss == model.QUADRATIC else rng.choice([-1.0, 1.0], n)
        if loss == model.QUADRATIC:
            s = rng.normal(0.0, 1.0, n)
        else:
            s = -y * rng.uniform(0.0, 1.0, n) / n  # n s y in [-1, 0]
        fz = model.loss_value(loss, z, y)
        fs = model.loss_conjugate(loss, s, y)
        assert fz + fs >= float(s @ z) - 1e-10
        s_star = model.loss_gradient(loss, z, y)
        gap = fz + model.loss_conjugate(loss, s_star, y) - float(s_star @ z)
        assert abs(gap) <= 1e-8


def test_primal_objective_penalized_at_zero():
    y = np.array([3.0, 2.0, 1.0])
    inst = model.ProblemInstance(np.eye(3), y, model.QUADRATIC,
                                 model.RidgeForm(model.PENALTY, 0.1),
                                 model.SparsityBudget.penalized(0.7))
    assert model.primal_objective(inst, np.zeros(3)) == pytest.approx(float(y @ y) / 6.0)


def test_primal_objective_identity_example():
    inst = model.ProblemInstance(np.eye(3), np.array([3.0, 2.0, 1.0]), model.QUADRATIC,
                                 model.RidgeForm(model.PENALTY, 1e-9),
                                 model.SparsityBudget.constrained(1))
    val = model.primal_objective(inst, np.array([3.0, 0.0, 0.0]))
    assert val == pytest.approx(5.0 / 6.0, abs=1e-7)


def test_primal_objective_logistic_at_zero():
    inst = model.ProblemInstance(np.eye(2), np.array([1.0, -1.0]), model.LOGISTIC,
                                 model.RidgeForm(model.PENALTY, 0.1),
                                 model.SparsityBudget.constrained(1))
    assert model.primal_objective(inst, np.zeros(2)) == pytest.approx(math.log(2.0))


def test_ball_objective_omits_gamma_term_and_flags_feasibility():
    inst = model.ProblemInstance(np.eye(2), np.array([1.0, -1.0]), model.QUADRATIC,
                                 model.RidgeForm(model.BALL, 1.0),
                                 model.SparsityBudget.constrained(2))
    w = np.array([2.0, 0.0])  # infeasible but still evaluated
    assert model.primal_objective(inst, w) == pytest.approx(
        model.loss_value(model.QUADRATIC, inst.x @ w, inst.y))
    assert not model.ball_feasible(inst, w)
    assert model.ball_feasible(inst, np.array([0.9, 0.1]))


def test_penalized_counts_exact_nonzeros():
    inst = model.ProblemInstance(np.eye(3), np.array([1.0, 2.0, 3.0]), model.QUADRATIC,
                                 model.RidgeForm(model.PENALTY, 0.1),
                                 model.SparsityBudget.penalized(10.0))
    base = model.primal_objective(inst, np.zeros(3))
    one = model.primal_objective(inst, np.array([0.0, 1e-12, 0.0]))
    assert one - base == pytest.approx(10.0, rel=1e-6)


def test_rho_bound():
    assert model.rho_bound(model.QUADRATIC) == 0.0
    assert model.rho_bound(model.LOGISTIC) == 0.0
    assert model.rho_bound(model.QUADRATIC, 0.3) == 0.3
    with pytest.raises(ValueError):
        model.rho_bound(model.QUADRATIC, -0.1)


def test_validation_errors():
    y = np.array([1.0, -1.0])
    with pytest.raises(ValueError):
        model.loss_value(model.QUADRATIC, np.array([1.0]), y)
    with pytest.raises(ValueError):
        model.loss_value(model.LOGISTIC, np.zeros(2), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        model.RidgeForm(model.PENALTY, 0.0)
    with pytest.raises(ValueError):
        model.RidgeForm("ridge", 1.0)
    with pytest.raises(ValueError):
        model.SparsityBudget.penalized(0.0)
    with pytest.raises(ValueError):
        model.SparsityBudget.constrained(-1)
    with pytest.raises(ValueError):
        model.ProblemInstance(np.eye(2), np.array([1.0, np.nan]), model.QUADRATIC,
                              model.RidgeForm(model.PENALTY, 1.0),
                              model.SparsityBudget.constrained(1))
    with pytest.raises(ValueError):
        model.ProblemInstance(np.eye(2), y, model.QUADRATIC,
                              model.RidgeForm(model.PENALTY, 1.0),
                              model.SparsityBudget.constrained(3))
    with pytest.raises(ValueError):
        model.ProblemInstance(np.eye(2), np.array([1.0, 0.5]), model.LOGISTIC,
                              model.RidgeForm(model.PENALTY, 1.0),
                              model.SparsityBudget.constrained(1))
