"""Exact solver for small instances by exhaustive support enumeration.

This is the ground truth the certificate machinery is tested against; it
exists to test, not to compete.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from . import model
from .model import BALL, CONSTRAINED, LOGISTIC, PENALIZED, PENALTY, QUADRATIC

DEFAULT_CAP = 2_000_000

#: Newton settings for the logistic restricted subproblems.
NEWTON_GRAD_TOL = 1e-10
NEWTON_MAX_ITER = 200

#: Relative complementary-slackness target for the ball multiplier bisection.
BALL_CS_TOL = 1e-10


class EnumerationTooLarge(Exception):
    """The support enumeration would exceed the configured cap."""


class SubproblemError(Exception):
    """A restricted subproblem solver failed to converge."""


@dataclass
class OracleResult:
    value: float
    w: np.ndarray
    support: tuple
    subproblems_solved: int


def enumeration_count(m, budget):
    """Number of supports exact_solve would visit."""
    if budget.kind == CONSTRAINED:
        return sum(comb(m, j) for j in range(budget.k + 1))
    return 2 ** m


def exact_solve(inst, cap=DEFAULT_CAP):
    """Global optimum of the instance by enumerating supports.

    Constrained budgets visit every support of size <= k; penalized budgets
    visit all 2^m subsets and charge lam per selected coordinate.  Supports
    are visited smallest-size-first, lexicographically within a size, and
    ties keep the earliest support, so the result is deterministic.
    """
    m = inst.m
    count = enumeration_count(m, inst.budget)
    if count > cap:
        raise EnumerationTooLarge(
            f"{count} supports to enumerate exceed the cap of {cap}"
        )
    max_size = inst.budget.k if inst.budget.kind == CONSTRAINED else m
    lam = inst.budget.lam if inst.budget.kind == PENALIZED else 0.0

    best_val = np.inf
    best_w = np.zeros(m)
    solved = 0
    for size in range(max_size + 1):
        for support in combinations(range(m), size):
            w, val = restricted_minimize(inst, support)
            solved += 1
            val += lam * len(support)
            if val < best_val - 0.0:
                best_val = val
                best_w = w
    support = tuple(np.flatnonzero(best_w))
    # a penalized optimum is charged for its actual nonzeros, not |S|
    if inst.budget.kind == PENALIZED:
        best_val = model.primal_objective(inst, best_w)
    return OracleResult(value=float(best_val), w=best_w, support=support,
                        subproblems_solved=solved)


def restricted_minimize(inst, support):
    """Minimize the smooth part of the objective with w zero off ``support``.

    Returns ``(w, value)`` with ``w`` a full-length vector.  The value is
    f(Xw) plus the (gamma/2)||w||^2 term for penalty ridges; ball ridges
    enforce ||w||^2 <= gamma via a Lagrange-multiplier bisection and report
    f(Xw) alone.  Any lam*||w||_0 term is the caller's business.
    """
    support = tuple(sorted(set(int(i) for i in support)))
    if any(i < 0 or i >= inst.m for i in support):
        raise ValueError(f"support indices out of range [0, {inst.m})")
    w = np.zeros(inst.m)
    if not support:
        return w, model.loss_value(inst.loss, np.zeros(inst.n), inst.y)
    xs = inst.x[:, support]
    if inst.ridge.kind == PENALTY:
        if inst.loss == QUADRATIC:
            ws = _quadratic_ridge(xs, inst.y, inst.ridge.gamma)
        else:
            ws = _newton_ridge(xs, inst.y, inst.ridge.gamma)
        val = model.loss_value(inst.loss, xs @ ws, inst.y) \
            + 0.5 * inst.ridge.gamma * float(ws @ ws)
    else:
        if inst.loss == QUADRATIC:
            ws = _quadratic_ball(xs, inst.y, inst.ridge.gamma)
        else:
            ws = _newton_ball(xs, inst.y, inst.ridge.gamma)
        val = model.loss_value(inst.loss, xs @ ws, inst.y)
    w[list(support)] = ws
    return w, float(val)


def _quadratic_ridge(xs, y, gamma):
    n = len(y)
    a = xs.T @ xs / n + gamma * np.eye(xs.shape[1])
    return np.linalg.solve(a, xs.T @ y / n)


def _newton_ridge(xs, y, mu, w0=None):
    # damped Newton for logistic loss + (mu/2)||w||^2, mu > 0
    s = xs.shape[1]
    w = np.zeros(s) if w0 is None else w0.copy()
    for _ in range(NEWTON_MAX_ITER):
        z = xs @ w
        g = xs.T @ model.loss_gradient(LOGISTIC, z, y) + mu * w
        if np.max(np.abs(g)) <= NEWTON_GRAD_TOL:
            return w
        h = xs.T @ (model.loss_curvature(LOGISTIC, z, y)[:, None] * xs) + mu * np.eye(s)
        d = np.linalg.solve(h, -g)
        obj = model.loss_value(LOGISTIC, z, y) + 0.5 * mu * float(w @ w)
        step = 1.0
        gd = float(g @ d)
        for _ in range(60):
            wn = w + step * d
            objn = model.loss_value(LOGISTIC, xs @ wn, y) + 0.5 * mu * float(wn @ wn)
            if objn <= obj + 1e-4 * step * gd:
                break
            step *= 0.5
        w = w + step * d
    g = xs.T @ model.loss_gradient(LOGISTIC, xs @ w, y) + mu * w
    if np.max(np.abs(g)) > 1e-6:
        raise SubproblemError(
            f"logistic Newton stalled at gradient norm {np.max(np.abs(g)):.2e}"
        )
    return w


def _quadratic_ball(xs, y, gamma):
    # trust-region style: (Xs^T Xs/n + mu I) w = Xs^T y/n with mu >= 0 chosen
    # so that ||w||^2 = gamma when the constraint binds; solved in the
    # eigenbasis via bisection on the secular equation.
    n = len(y)
    a = xs.T @ xs / n
    c = xs.T @ y / n
    d, q = np.linalg.eigh(a)
    cq = q.T @ c
    live = d > max(d[-1], 0.0) * 1e-14

    def norm2(mu):
        den = d + mu
        terms = np.zeros_like(cq)
        ok = live | (mu > 0)
        terms[ok] = (cq[ok] / den[ok]) ** 2
        return float(np.sum(terms))

    def solution(mu):
        den = d + mu
        coef = np.zeros_like(cq)
        ok = live | (mu > 0)
        coef[ok] = cq[ok] / den[ok]
        return q @ coef

    if norm2(0.0) <= gamma:
        return solution(0.0)
    lo, hi = 0.0, float(np.linalg.norm(cq) / np.sqrt(gamma))  # norm2(hi) <= gamma
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm2(mid) > gamma:
            lo = mid
        else:
            hi = mid
        if norm2(hi) >= gamma * (1.0 - BALL_CS_TOL):
            break
    return solution(hi)


def _newton_ball(xs, y, gamma):
    # outer bisection on the multiplier of ||w||^2 <= gamma, inner Newton
    w = _newton_ridge(xs, y, 1e-12)
    if float(w @ w) <= gamma:
        return w
    lo = 0.0
    hi = 1e-6
    w_hi = _newton_ridge(xs, y, hi, w)
    grow = 0
    while float(w_hi @ w_hi) > gamma:
        lo, hi = hi, hi * 8.0
        w_hi = _newton_ridge(xs, y, hi, w_hi)
        grow += 1
        if grow > 60:
            raise SubproblemError("ball multiplier bracket did not close")
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        w_mid = _newton_ridge(xs, y, max(mid, 1e-300), w_hi)
        if float(w_mid @ w_mid) > gamma:
            lo = mid
        else:
            hi, w_hi = mid, w_mid
        if float(w_hi @ w_hi) >= gamma * (1.0 - BALL_CS_TOL):
            break
    return w_hi
