"""Shared fixtures-in-plain-python for the test suite: instance factories and
small independent oracles (grid searches, enumerations)."""

import numpy as np

from sfsparse import model, spectra


def mixed_tol(value, tol=1e-6):
    return tol * (1.0 + abs(value))


def make_instance(seed, n=30, m=12, r=2, loss=model.QUADRATIC,
                  ridge=(model.PENALTY, 0.05), budget=("k", 3), noise=0.5):
    """Random low-rank instance; deterministic per seed."""
    x = spectra.make_lowrank(n, m, r, seed=seed)
    beta = spectra.make_sparse_coef(m, min(3, m), 2.0, seed=seed + 1000)
    rng = np.random.default_rng(seed + 2000)
    signal = x @ beta + rng.normal(0.0, noise, n)
    if loss == model.LOGISTIC:
        y = np.where(signal >= 0.0, 1.0, -1.0)
    else:
        y = signal
    kind, val = budget
    bud = model.SparsityBudget.constrained(val) if kind == "k" \
        else model.SparsityBudget.penalized(val)
    inst = model.ProblemInstance(x, y, loss, model.RidgeForm(*ridge), bud)
    return inst


def exact_svd(inst):
    return spectra.compact_svd(inst.x, tol=1e-12)


def conjugate_grid_sup(loss, s, y, lo=-50.0, hi=50.0, step=1e-4):
    """Per-coordinate grid supremum of s'z - f(z; y); both losses are
    coordinate-separable so the supremum splits into 1-D grids."""
    n = len(y)
    total = 0.0
    zs = np.arange(lo, hi + step, step)
    for i in range(n):
        if loss == model.QUADRATIC:
            fz = (zs - y[i]) ** 2 / (2.0 * n)
        else:
            fz = np.logaddexp(0.0, -y[i] * zs) / n
        total += float(np.max(s[i] * zs - fz))
    return total


def ridge_solution(inst):
    """Closed-form unrestricted ridge optimum for the quadratic+penalty family."""
    n = inst.n
    a = inst.x.T @ inst.x / n + inst.ridge.gamma * np.eye(inst.m)
    w = np.linalg.solve(a, inst.x.T @ inst.y / n)
    return w, model.primal_objective(
        model.ProblemInstance(inst.x, inst.y, inst.loss, inst.ridge,
                              model.SparsityBudget.constrained(inst.m)), w)


def waterfill_brute(weights, k, steps=200):
    """Grid minimization of sum w_i^2/u_i over u in [0,1]^m, 1'u <= k (m <= 3)."""
    w = np.abs(np.asarray(weights, dtype=float))
    m = len(w)
    grid = np.linspace(0.0, 1.0, steps + 1)
    best = np.inf

    def value(u):
        if np.sum(u) > k + 1e-12:
            return np.inf
        tot = 0.0
        for wi, ui in zip(w, u):
            if wi == 0.0:
                continue
            if ui <= 0.0:
                return np.inf
            tot += wi * wi / ui
        return tot

    if m == 1:
        cands = (np.array([g]) for g in grid)
    elif m == 2:
        cands = (np.array([a, b]) for a in grid for b in grid)
    else:
        cands = (np.array([a, b, c]) for a in grid for b in grid for c in grid)
    for u in cands:
        best = min(best, value(u))
    return best


def reverse_huber_dual_max(x, k):
    """max over t > 0 of sum_i 2 t B(|x_i|/sqrt(t)) - t k, evaluated exactly.

    With pieces split at t = x_i^2 the summand is 2 sqrt(t)|x_i| for
    x_i^2 <= t and x_i^2 + t beyond, so each piece is concave with an
    interior stationary point sqrt(t) = (sum of small |x_i|) / (k - #big).
    """
    a = np.abs(np.asarray(x, dtype=float))
    bps = np.sort(a) ** 2
    edges = np.unique(np.concatenate([[0.0], bps, [np.inf]]))

    def val(t):
        big = a * a > t
        return float(np.sum(a[big] ** 2 + t * np.count_nonzero(big)
                            if np.any(big) else 0.0)
                     + 2.0 * np.sqrt(t) * np.sum(a[~big]) - t * k)

    best = -np.inf
    for lo, hi in zip(edges[:-1], edges[1:]):
        probe = lo + 1e-12 if np.isinf(hi) else 0.5 * (lo + hi)
        big = a * a > probe
        nbig = int(np.count_nonzero(big))
        small_sum = float(np.sum(a[~big]))
        if k - nbig > 0:
            t_star = (small_sum / (k - nbig)) ** 2
            if lo < t_star < hi:
                best = max(best, val(t_star))
        for edge in (lo, hi):
            if 0.0 < edge < np.inf:
                best = max(best, val(edge))
    return best
