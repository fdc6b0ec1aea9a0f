import numpy as np
import pytest

from sfsparse import model, oracle, relax
from helpers import (exact_svd, make_instance, mixed_tol, reverse_huber_dual_max,
                     ridge_solution, waterfill_brute)


# ---------------------------------------------------------------------------
# sum_top_k


def test_sum_top_k_basic():
    assert relax.sum_top_k([3.0, 1.0, 2.0], 2) == 5.0
    assert relax.sum_top_k([3.0, 1.0, 2.0], 0) == 0.0
    assert relax.sum_top_k([3.0, 1.0, 2.0], 3) == 6.0
    with pytest.raises(ValueError):
        relax.sum_top_k([1.0], 2)


def _sum_top_k_variational(c, k):
    # s_k(c) = min_{t >= 0} t k + sum max(0, c_i - t); candidates at breakpoints
    cands = np.unique(np.concatenate([[0.0], c]))
    vals = [t * k + float(np.sum(np.maximum(0.0, c - t))) for t in cands if t >= 0.0]
    return min(vals)


def test_sum_top_k_variational_identity():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = int(rng.integers(1, 12))
        c = rng.uniform(0.0, 5.0, m)  # the identity needs nonnegative entries
        k = int(rng.integers(0, m + 1))
        assert relax.sum_top_k(c, k) == pytest.approx(
            _sum_top_k_variational(c, k), abs=1e-9)


# ---------------------------------------------------------------------------
# selector updates


def test_waterfill_example():
    u = relax.waterfill_selector([2.0, 1.0, 0.0], 1)
    assert np.allclose(u, [2.0 / 3.0, 1.0 / 3.0, 0.0], atol=1e-12)
    obj = relax.perspective_term(np.array([2.0, 1.0, 0.0]), u)
    assert obj == pytest.approx(9.0, abs=1e-9)
    brute = waterfill_brute([2.0, 1.0, 0.0], 1, steps=1000)
    assert obj <= brute + 1e-9


def test_waterfill_caps_inactive():
    u = relax.waterfill_selector([0.5, -0.2, 0.0, 3.0], 4)
    assert np.allclose(u, [1.0, 1.0, 0.0, 1.0])


def test_waterfill_zero_weights():
    assert np.all(relax.waterfill_selector(np.zeros(4), 2) == 0.0)


def test_waterfill_brute_force_small():
    rng = np.random.default_rng(1)
    for _ in range(10):
        m = int(rng.integers(2, 4))
        w = rng.normal(0.0, 1.0, m)
        k = int(rng.integers(1, m + 1))
        u = relax.waterfill_selector(w, k)
        assert np.sum(u) <= k + 1e-9
        assert np.all((u >= 0.0) & (u <= 1.0 + 1e-12))
        obj = relax.perspective_term(w, u)
        brute = waterfill_brute(w, k, steps=200)
        assert obj <= brute + 1e-6 * (1.0 + brute)


def test_waterfill_kkt_ratio():
    rng = np.random.default_rng(2)
    for _ in range(20):
        m = int(rng.integers(3, 12))
        w = rng.normal(0.0, 2.0, m)
        k = int(rng.integers(1, m))
        u = relax.waterfill_selector(w, k)
        interior = (u > 1e-9) & (u < 1.0 - 1e-9)
        if np.count_nonzero(interior) >= 2:
            ratios = np.abs(w[interior]) / u[interior]
            assert np.max(ratios) - np.min(ratios) <= 1e-6 * (1.0 + np.max(ratios))


def test_penalized_selector_example():
    u = relax.penalized_selector([0.5, 2.0], gamma=2.0, lam=1.0)
    assert np.allclose(u, [0.5, 1.0], atol=1e-12)
    assert np.all(relax.penalized_selector(np.zeros(3), 1.0, 1.0) == 0.0)


def test_penalized_selector_against_grid():
    rng = np.random.default_rng(3)
    grid = np.linspace(1e-9, 1.0, 20001)
    for _ in range(10):
        gamma = float(rng.uniform(0.1, 3.0))
        lam = float(rng.uniform(0.1, 3.0))
        w = float(rng.normal(0.0, 1.0))
        u = relax.penalized_selector([w], gamma, lam)[0]
        vals = 0.5 * gamma * w * w / grid + lam * grid
        u_grid = grid[int(np.argmin(vals))]
        if w != 0.0:
            assert u == pytest.approx(u_grid, abs=1e-3)
        expected = np.sqrt(gamma / (2.0 * lam)) * abs(w)
        if expected < 1.0:
            assert u == pytest.approx(expected, rel=1e-12)


def test_penalized_selector_shrinks_with_large_lambda():
    w = np.array([0.7, -0.3, 1.0])
    u = relax.penalized_selector(w, gamma=1.0, lam=1e6)
    assert np.allclose(u, np.sqrt(1.0 / 2e6) * np.abs(w), rtol=1e-12)


# ---------------------------------------------------------------------------
# reverse Huber


def test_reverse_huber_values():
    assert relax.reverse_huber(0.5) == 0.5
    assert relax.reverse_huber(1.0) == 1.0
    assert relax.reverse_huber(3.0) == 5.0
    assert relax.reverse_huber(-3.0) == 5.0


def test_reverse_huber_variational_identity():
    # min_{u in [0,1]^m, 1'u <= k} sum x_i^2/u_i  ==  max_{t>0} sum 2tB(|x_i|/sqrt t) - tk
    rng = np.random.default_rng(4)
    for _ in range(20):
        m = int(rng.integers(1, 4))
        x = rng.normal(0.0, 1.5, m)
        k = int(rng.integers(1, m + 1))
        u = relax.waterfill_selector(x, k)
        lhs = relax.perspective_term(x, u)
        lhs_brute = waterfill_brute(x, k, steps=400)
        rhs = reverse_huber_dual_max(x, k)
        assert lhs == pytest.approx(rhs, abs=1e-6 * (1.0 + abs(rhs)))
        assert lhs_brute >= rhs - 1e-4 * (1.0 + abs(rhs))


# ---------------------------------------------------------------------------
# solve_relaxation


def test_k_equals_m_reduces_to_ridge():
    inst = make_instance(0, n=25, m=8, r=3, budget=("k", 8))
    sol = relax.solve_relaxation(inst, exact_svd(inst))
    _, ref = ridge_solution(inst)
    assert sol.value == pytest.approx(ref, abs=mixed_tol(ref))
    assert np.all(sol.selector[np.abs(sol.weights) > 1e-10] == 1.0)
    # strong duality is exact here
    assert sol.value - relax.dual_bound(inst, exact_svd(inst), sol.dual_point) \
        <= mixed_tol(sol.value)


def test_k_zero():
    inst = make_instance(0, budget=("k", 0))
    sol = relax.solve_relaxation(inst, exact_svd(inst))
    assert sol.value == pytest.approx(
        model.loss_value(inst.loss, np.zeros(inst.n), inst.y))
    assert np.all(sol.weights == 0.0)
    assert sol.converged


def test_small_instance_between_dual_and_oracle():
    inst = make_instance(5, n=30, m=12, r=2, budget=("k", 3))
    svd = exact_svd(inst)
    sol = relax.solve_relaxation(inst, svd)
    z, _ = relax.extract_dual_point(inst, svd, sol)
    d = relax.dual_bound(inst, svd, z)
    o = oracle.exact_solve(inst).value
    assert sol.value <= o + 1e-6
    assert sol.value >= d - 1e-5


@pytest.mark.parametrize("ridge,budget", [
    ((model.PENALTY, 0.05), ("k", 3)),
    ((model.PENALTY, 0.05), ("lam", 1e-2)),
    ((model.BALL, 1.0), ("k", 3)),
    ((model.BALL, 1.0), ("lam", 5e-3)),
])
def test_weak_duality_and_oracle_upper(ridge, budget):
    for seed in range(4):
        inst = make_instance(seed, n=30, m=10, r=2, ridge=ridge, budget=budget)
        svd = exact_svd(inst)
        sol = relax.solve_relaxation(inst, svd)
        assert sol.converged
        d = relax.dual_bound(inst, svd, sol.dual_point)
        assert d <= sol.value + 1e-6
        o = oracle.exact_solve(inst).value
        assert sol.value <= o + mixed_tol(o)


def test_logistic_families():
    for budget in (("k", 3), ("lam", 1e-2)):
        inst = make_instance(9, n=30, m=8, r=2, loss=model.LOGISTIC, budget=budget)
        svd = exact_svd(inst)
        sol = relax.solve_relaxation(inst, svd)
        d = relax.dual_bound(inst, svd, sol.dual_point)
        o = oracle.exact_solve(inst).value
        assert d <= sol.value + 1e-6
        assert sol.value <= o + mixed_tol(o)


def test_strong_duality_quadratic():
    for seed in range(6):
        inst = make_instance(seed, n=25, m=10, r=2, budget=("k", 3))
        svd = exact_svd(inst)
        opts = relax.SolverOptions(tol_obj=1e-7)
        sol = relax.solve_relaxation(inst, svd, opts)
        d = relax.dual_bound(inst, svd, sol.dual_point)
        assert sol.value - d <= 10.0 * opts.tol_obj * (1.0 + abs(sol.value))


def test_relaxed_solution_invariants():
    inst = make_instance(11, n=25, m=10, r=3, budget=("k", 4))
    sol = relax.solve_relaxation(inst, exact_svd(inst))
    assert np.all(sol.selector >= 0.0) and np.all(sol.selector <= 1.0 + 1e-9)
    assert np.sum(sol.selector) <= inst.budget.k + 1e-7
    dead = sol.selector == 0.0
    assert np.all(sol.weights[dead] == 0.0)
    assert np.allclose(sol.weights, sol.selector * sol.magnitudes)
    # value recomputes from (selector, weights)
    recomputed = model.loss_value(inst.loss, exact_svd(inst).reconstruct() @ sol.weights, inst.y) \
        + 0.5 * inst.ridge.gamma * relax.perspective_term(sol.weights, sol.selector)
    assert sol.value == pytest.approx(recomputed, rel=1e-7)


def test_monotonicity_sweeps():
    vals_k = []
    for k in range(1, 7):
        inst = make_instance(12, n=25, m=8, r=2, budget=("k", k))
        vals_k.append(relax.solve_relaxation(inst, exact_svd(inst)).value)
    assert all(vals_k[i + 1] <= vals_k[i] + 1e-8 for i in range(len(vals_k) - 1))
    vals_l = []
    for lam in (1e-4, 1e-3, 1e-2, 1e-1):
        inst = make_instance(12, n=25, m=8, r=2, budget=("lam", lam))
        vals_l.append(relax.solve_relaxation(inst, exact_svd(inst)).value)
    assert all(vals_l[i + 1] >= vals_l[i] - 1e-8 for i in range(len(vals_l) - 1))


def test_perspective_equivalence_brute_grid():
    # m = 2: p** = min over u of [min_w f(Xw) + (gamma/2) sum w_i^2/u_i],
    # inner problem closed-form; outer on a fine grid
    inst = make_instance(13, n=15, m=2, r=2, budget=("k", 1))
    svd = exact_svd(inst)
    sol = relax.solve_relaxation(inst, svd)
    gamma = inst.ridge.gamma
    n = inst.n
    grid = np.linspace(0.0, 1.0, 301)
    best = np.inf
    for u1 in grid:
        for u2 in grid:
            if u1 + u2 > 1.0 + 1e-12:
                continue
            live = [i for i, ui in enumerate((u1, u2)) if ui > 1e-12]
            if not live:
                val = model.loss_value(inst.loss, np.zeros(n), inst.y)
            else:
                xs = inst.x[:, live]
                dinv = np.diag([1.0 / (u1, u2)[i] for i in live])
                a = xs.T @ xs / n + gamma * dinv
                ws = np.linalg.solve(a, xs.T @ inst.y / n)
                w = np.zeros(2)
                w[live] = ws
                val = model.loss_value(inst.loss, inst.x @ w, inst.y) \
                    + 0.5 * gamma * float(ws @ dinv @ ws)
            best = min(best, val)
    assert sol.value <= best + 1e-6
    assert best - sol.value <= 5e-4 * (1.0 + abs(best))


def test_ball_families_feasible_and_tight():
    inst = make_instance(14, n=25, m=8, r=2, ridge=(model.BALL, 0.5), budget=("k", 3))
    sol = relax.solve_relaxation(inst, exact_svd(inst))
    g = relax.perspective_term(sol.weights, sol.selector)
    assert g <= 0.5 * (1.0 + 1e-7)
    assert sol.ball_multiplier is not None and sol.ball_multiplier >= 0.0


def test_ball_dual_eta_elimination_constrained():
    # closed form -sqrt(gamma * s_k) equals the 1-D maximization over eta
    rng = np.random.default_rng(15)
    a = rng.uniform(0.0, 4.0, 6)
    gamma, k = 1.0, 3
    top = relax.sum_top_k(a, k)
    etas = np.linspace(1e-6, 50.0, 400001)
    brute = np.max(-etas * gamma / 2.0 - top / (2.0 * etas))
    assert -np.sqrt(gamma * top) == pytest.approx(float(brute), abs=1e-6)


def test_ball_dual_example_eta_term():
    # s_k = 4, gamma = 1 -> the eta term contributes -2 at eta* = 2
    etas = np.linspace(1e-6, 50.0, 400001)
    brute = float(np.max(-etas / 2.0 - 4.0 / (2.0 * etas)))
    assert brute == pytest.approx(-2.0, abs=1e-6)
    assert -np.sqrt(1.0 * 4.0) == pytest.approx(-2.0)


def test_ball_dual_eta_term_penalized_matches_grid():
    rng = np.random.default_rng(16)
    for _ in range(10):
        a = rng.uniform(0.0, 3.0, 5) ** 2
        lam = float(rng.uniform(0.05, 1.0))
        gamma = float(rng.uniform(0.5, 4.0))
        exact = relax._pen_ball_eta_term(a, lam, gamma)
        etas = np.linspace(1e-8, 60.0, 2000001)
        vals = etas * gamma / 2.0 + np.sum(
            np.maximum(0.0, a[:, None] / (2.0 * etas[None, :]) - lam), axis=0)
        assert exact == pytest.approx(float(np.min(vals)), abs=1e-5)


def test_extract_dual_point_is_gradient():
    inst = make_instance(17, n=20, m=8, r=2, budget=("k", 3))
    svd = exact_svd(inst)
    sol = relax.solve_relaxation(inst, svd)
    z, nu = relax.extract_dual_point(inst, svd, sol)
    zc = svd.svt @ sol.weights
    expected = model.loss_gradient(inst.loss, svd.u @ zc, inst.y)
    assert np.allclose(z, expected, atol=1e-14)
    assert np.allclose(nu, -svd.u.T @ expected, atol=1e-14)
    # Fenchel-Young equality at the gradient
    fx = model.loss_value(inst.loss, svd.u @ zc, inst.y)
    gap = fx + model.loss_conjugate(inst.loss, z, inst.y) - float(z @ (svd.u @ zc))
    assert abs(gap) <= 1e-7


def test_dual_bound_at_zero_point():
    inst = make_instance(18, n=20, m=8, r=2, budget=("k", 3))
    svd = exact_svd(inst)
    # z = 0 gives -f*(0) = 0 for the quadratic loss
    assert relax.dual_bound(inst, svd, np.zeros(inst.n)) == pytest.approx(0.0)


def test_dual_bound_outside_domain_logistic():
    inst = make_instance(19, n=10, m=6, r=2, loss=model.LOGISTIC, budget=("k", 2))
    svd = exact_svd(inst)
    z = np.full(inst.n, 1.0)  # n z y outside [-1, 0] somewhere
    assert relax.dual_bound(inst, svd, z) == -np.inf


def test_warm_start_injection():
    inst = make_instance(20, n=25, m=10, r=2, budget=("k", 3))
    svd = exact_svd(inst)
    cold = relax.solve_relaxation(inst, svd)
    warm = relax.solve_relaxation(inst, svd, relax.SolverOptions(
        init_selector=cold.selector, init_weights=cold.weights))
    assert warm.value == pytest.approx(cold.value, rel=1e-9)
    assert warm.sweeps <= cold.sweeps
