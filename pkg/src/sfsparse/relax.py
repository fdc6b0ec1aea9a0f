"""Interval-relaxation solvers and dual lower bounds for all four problem
families (ridge penalty or ball  x  cardinality constraint or penalty).

The relaxation replaces the boolean selector u in {0,1}^m by u in [0,1]^m;
after substituting vtilde = D(u) v the objective

    f(X vtilde) + (c/2) * sum_i vtilde_i^2 / u_i   (+ lam * 1'u)

is jointly convex, and both blocks have exact minimizers: vtilde through an
r x r reduced linear (or damped-Newton) solve, u through a waterfill or a
coordinatewise shrink.  Alternating minimization with a duality-gap stopping
rule solves each family; ball-constrained families wrap the same machinery
in a bisection on the ball multiplier.

Everything runs on the rank-r reconstruction carried by the SvdFactors; the
discarded residual only enters the rank-perturbation bounds in
:mod:`sfsparse.certify`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model
from .model import BALL, CONSTRAINED, LOGISTIC, PENALIZED, PENALTY, QUADRATIC

#: revival guard: how often a parked coordinate may be re-opened
_MAX_REVIVALS = 4
_REVIVE_VALUE = 1e-2


def sum_top_k(c, k):
    """Sum of the k largest entries of c."""
    c = np.asarray(c, dtype=float)
    if int(k) != k or not 0 <= k <= c.shape[0]:
        raise ValueError(f"k must be an integer in [0, {c.shape[0]}], got {k!r}")
    k = int(k)
    if k == 0:
        return 0.0
    if k == c.shape[0]:
        return float(np.sum(c))
    return float(np.sum(np.partition(c, -k)[-k:]))


def waterfill_selector(weights, k):
    """Exact minimizer of sum_i w_i^2 / u_i over {u in [0,1]^m : 1'u <= k}.

    u_i = min(1, |w_i| / sqrt(theta)) with theta >= 0 picked so the budget
    is met with equality whenever it binds; u_i = 0 wherever w_i = 0.
    """
    w = np.abs(np.asarray(weights, dtype=float))
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    k = int(k)
    u = np.zeros_like(w)
    if k == 0:
        return u
    support = w > 0.0
    nnz = int(np.count_nonzero(support))
    if nnz == 0:
        return u
    if nnz <= k:
        u[support] = 1.0
        return u
    a = np.sort(w[support])[::-1]
    tails = np.concatenate([np.cumsum(a[::-1])[::-1], [0.0]])
    root = None
    for j in range(min(k, nnz)):  # j = number of capped coordinates
        cand = tails[j] / (k - j)
        if (j == 0 or a[j - 1] >= cand * (1.0 - 1e-12)) and a[j] <= cand * (1.0 + 1e-12):
            root = cand
            break
    if root is None:  # numerically flat spectrum; fall back to the last candidate
        root = tails[min(k, nnz) - 1] / (k - min(k, nnz) + 1)
    u[support] = np.minimum(1.0, w[support] / root)
    return u


def penalized_selector(weights, gamma, lam):
    """Coordinatewise minimizer of (gamma/2) w_i^2/u_i + lam u_i over [0,1]."""
    if gamma <= 0.0 or lam <= 0.0:
        raise ValueError("gamma and lam must be strictly positive")
    w = np.abs(np.asarray(weights, dtype=float))
    return np.minimum(1.0, np.sqrt(gamma / (2.0 * lam)) * w)


def reverse_huber(zeta):
    """B(z) = |z| for |z| <= 1, (z^2 + 1)/2 beyond."""
    z = abs(float(zeta))
    return z if z <= 1.0 else 0.5 * (z * z + 1.0)


def perspective_term(weights, selector):
    """sum_i w_i^2 / u_i with the 0/0 := 0 pseudoinverse convention."""
    w = np.asarray(weights, dtype=float)
    u = np.asarray(selector, dtype=float)
    mask = u > 0.0
    return float(np.sum(w[mask] ** 2 / u[mask]))


@dataclass
class SolverOptions:
    """Tolerances and caps for :func:`solve_relaxation`.

    ``tol_obj`` is both the relative objective-change stall threshold and
    the relative duality-gap target certifying the reported optimum.
    """

    tol_obj: float = 1e-7
    max_sweeps: int = 10_000
    gap_check_every: int = 20
    newton_steps: int = 6
    ball_max_outer: int = 120
    init_selector: np.ndarray | None = None
    init_weights: np.ndarray | None = None


@dataclass
class RelaxedSolution:
    """Solution of the interval relaxation plus its dual certificates.

    ``weights`` is vtilde = selector * magnitudes (the relaxed coefficient
    vector), ``value`` the relaxed objective, ``compressed`` the point
    svt @ weights in rank-r coordinates, ``dual_point`` the Fenchel dual
    point grad f at the relaxed fit, ``eq_multiplier`` the compressed
    multiplier -U_r' grad f of the rank-r equality constraint, and
    ``ball_multiplier`` the ball-constraint multiplier (ball families only).
    """

    selector: np.ndarray
    magnitudes: np.ndarray
    weights: np.ndarray
    value: float
    compressed: np.ndarray
    dual_point: np.ndarray
    eq_multiplier: np.ndarray
    ball_multiplier: float | None
    sweeps: int
    converged: bool
    gap: float


class _Core:
    """Loss evaluations through the rank-r factors (design X_r = U @ L)."""

    def __init__(self, svd, y, loss):
        self.L = svd.svt
        self.U = svd.u
        self.y = y
        self.loss = loss
        self.n = y.shape[0]
        self.r, self.m = self.L.shape
        if loss == QUADRATIC:
            self.b = self.U.T @ y
            self.c0 = float(y @ y - self.b @ self.b) / (2.0 * self.n)

    def f(self, zc):
        if self.loss == QUADRATIC:
            d = zc - self.b
            return float(d @ d) / (2.0 * self.n) + self.c0
        return model.loss_value(LOGISTIC, self.U @ zc, self.y)

    def grad_hat(self, zc):
        # U' grad f, an r-vector
        if self.loss == QUADRATIC:
            return (zc - self.b) / self.n
        return self.U.T @ model.loss_gradient(LOGISTIC, self.U @ zc, self.y)

    def curv_hat(self, zc):
        if self.loss == QUADRATIC:
            return np.eye(self.r) / self.n
        w = model.loss_curvature(LOGISTIC, self.U @ zc, self.y)
        return (self.U * w[:, None]).T @ self.U

    def grad_full(self, zc):
        if self.loss == QUADRATIC:
            return (self.U @ zc - self.y) / self.n
        return model.loss_gradient(LOGISTIC, self.U @ zc, self.y)

    def solve_weights(self, selector, c_reg, weights):
        """Exact (quadratic) or damped-Newton (logistic) minimizer of
        f(X_r w) + (c_reg/2) sum w_i^2/u_i at fixed selector u.

        Coordinates with u_i = 0 stay exactly zero: the solution has the
        form w = D(u) L' q for an r-vector q.
        """
        u = selector
        lu = self.L * u
        kmat = lu @ self.L.T
        if self.loss == QUADRATIC:
            q = _solve_psd(kmat + self.n * c_reg * np.eye(self.r), self.b)
            return u * (self.L.T @ q)
        vt = weights
        for _ in range(max(1, int(self._newton_steps))):
            zc = self.L @ vt
            ghat = self.grad_hat(zc)
            grad = self.L.T @ ghat + c_reg * _safe_ratio(vt, u)
            if np.max(np.abs(grad), initial=0.0) <= 1e-12:
                break
            h = self.curv_hat(zc)
            q = np.linalg.solve(h @ kmat + c_reg * np.eye(self.r), h @ zc - ghat)
            target = u * (self.L.T @ q)
            step_dir = target - vt
            gd = float(grad @ step_dir)
            if gd > 0.0:
                break
            base = self.f(zc) + 0.5 * c_reg * perspective_term(vt, u)
            step = 1.0
            for _ in range(50):
                cand = vt + step * step_dir
                val = self.f(self.L @ cand) + 0.5 * c_reg * perspective_term(cand, u)
                if val <= base + 1e-4 * step * gd:
                    break
                step *= 0.5
            vt = vt + step * step_dir
        return vt

    _newton_steps = 6


def _solve_psd(a, b):
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(a, b, rcond=None)[0]


def _safe_ratio(w, u):
    out = np.zeros_like(w)
    mask = u > 0.0
    out[mask] = w[mask] / u[mask]
    return out


def _check_svd(inst, svd):
    if svd.u.shape[0] != inst.n or svd.vh.shape[1] != inst.m:
        raise ValueError(
            f"svd factors of shape ({svd.u.shape[0]}, {svd.vh.shape[1]}) do not "
            f"match the instance ({inst.n}, {inst.m})"
        )


def solve_relaxation(inst, svd, opts=None):
    """Solve the interval relaxation of the instance over its rank-r factors.

    Dispatches on (ridge kind x budget kind).  The reported ``value`` is a
    valid upper bound on the relaxed optimum in every case; ``converged``
    means the measured duality gap dropped below tol_obj * (1 + |value|)
    (an iteration-cap exit returns converged=False, never an error).
    """
    opts = opts or SolverOptions()
    _check_svd(inst, svd)
    core = _Core(svd, inst.y, inst.loss)
    core._newton_steps = opts.newton_steps
    gamma = inst.ridge.gamma
    con = inst.budget.kind == CONSTRAINED
    k = inst.budget.k if con else None
    lam = inst.budget.lam if not con else None

    if con and k == 0:
        vt = np.zeros(inst.m)
        u = np.zeros(inst.m)
        return _finish(inst, core, vt, u, eta=0.0 if inst.ridge.kind == BALL else None,
                       sweeps=0, converged=True, gap=0.0)

    u0, vt0 = _initial_point(inst, opts)
    if inst.ridge.kind == PENALTY:
        vt, u, sweeps, converged, gap = _am_penalty(
            core, gamma, k, lam, opts, vt0, u0,
            sweep_budget=opts.max_sweeps, tol_gap=opts.tol_obj)
        eta = None
    else:
        vt, u, eta, sweeps, converged, gap = _solve_ball(
            core, gamma, k, lam, opts, vt0, u0)
    return _finish(inst, core, vt, u, eta, sweeps, converged, gap)


def _initial_point(inst, opts):
    m = inst.m
    if opts.init_selector is not None:
        u0 = np.clip(np.asarray(opts.init_selector, dtype=float), 0.0, 1.0)
    elif inst.budget.kind == CONSTRAINED:
        u0 = np.full(m, inst.budget.k / m)
    else:
        u0 = np.full(m, 0.5)
    if opts.init_weights is not None:
        vt0 = np.asarray(opts.init_weights, dtype=float).copy()
        vt0[u0 <= 0.0] = 0.0
    else:
        vt0 = np.zeros(m)
    return u0, vt0


def _finish(inst, core, vt, u, eta, sweeps, converged, gap):
    zc = core.L @ vt
    value = core.f(zc)
    if inst.ridge.kind == PENALTY:
        value += 0.5 * inst.ridge.gamma * perspective_term(vt, u)
    if inst.budget.kind == PENALIZED:
        value += inst.budget.lam * float(np.sum(u))
    z = core.grad_full(zc)
    nu = -core.U.T @ z
    return RelaxedSolution(
        selector=u,
        magnitudes=_safe_ratio(vt, u),
        weights=vt,
        value=float(value),
        compressed=zc,
        dual_point=z,
        eq_multiplier=nu,
        ball_multiplier=eta,
        sweeps=sweeps,
        converged=bool(converged),
        gap=float(gap),
    )


def _am_penalty(core, c_reg, k, lam, opts, vt, u, sweep_budget, tol_gap):
    """Alternating minimization for the penalty-coupled families.

    With c_reg = gamma this solves the ridge-penalty relaxations; the ball
    solver reuses it with c_reg = eta as the Lagrangian subproblem.
    """
    con = k is not None

    def u_rule(w):
        return waterfill_selector(w, k) if con else penalized_selector(w, c_reg, lam)

    def objective(w, sel):
        t = core.f(core.L @ w) + 0.5 * c_reg * perspective_term(w, sel)
        if not con:
            t += lam * float(np.sum(sel))
        return t

    revivals = np.zeros(core.m, dtype=int)
    t = np.inf
    gap = np.inf
    converged = False
    sweeps = 0
    while sweeps < sweep_budget:
        sweeps += 1
        vt = core.solve_weights(u, c_reg, vt)
        u = u_rule(vt)
        t_new = objective(vt, u)
        stalled = np.isfinite(t) and abs(t - t_new) <= opts.tol_obj * (1.0 + abs(t_new))
        t = t_new
        if stalled or sweeps % opts.gap_check_every == 0:
            ghat = core.grad_hat(core.L @ vt)
            g = core.L.T @ ghat
            cand = _revival_set(vt, u, g, c_reg, k, lam, revivals)
            if cand is not None:
                u = u.copy()
                u[cand] = np.maximum(u[cand], _REVIVE_VALUE)
                revivals[cand] += 1
                continue
            gap = t - _penalty_dual(core, c_reg, k, lam, vt, ghat)
            if gap <= tol_gap * (1.0 + abs(t)):
                converged = True
                break
    if not converged:  # make sure the returned pair is u_rule-consistent
        u = u_rule(vt)
        t = objective(vt, u)
        ghat = core.grad_hat(core.L @ vt)
        gap = t - _penalty_dual(core, c_reg, k, lam, vt, ghat)
        converged = gap <= tol_gap * (1.0 + abs(t))
    return vt, u, sweeps, converged, gap


def _penalty_dual(core, c_reg, k, lam, vt, ghat):
    # dual of the (c_reg, budget) family at z = grad f(X_r vt)
    z = core.grad_full(core.L @ vt)
    fstar = model.loss_conjugate(core.loss, z, core.y)
    if not np.isfinite(fstar):
        return -np.inf
    a = (core.L.T @ ghat) ** 2
    if k is not None:
        return -fstar - sum_top_k(a, k) / (2.0 * c_reg)
    return -fstar + float(np.sum(np.minimum(0.0, lam - a / (2.0 * c_reg))))


def _revival_set(vt, u, g, c_reg, k, lam, revivals):
    """Dead coordinates whose joint first-order test says they should live.

    AM can park (vt_i, u_i) at (0, 0); moving jointly off zero decreases the
    objective iff |(X_r' grad f)_i| exceeds the family threshold, so such
    coordinates are re-opened (at most _MAX_REVIVALS times each).
    """
    dead = u <= 0.0
    if not np.any(dead):
        return None
    scale = float(np.max(np.abs(g), initial=0.0))
    if k is not None:
        frac = (u > 1e-9) & (u < 1.0 - 1e-9)
        if np.any(frac):
            root = float(np.max(np.abs(vt[frac]) / u[frac]))
        elif float(np.sum(u)) < k - 1e-9:
            root = 0.0
        else:
            capped = u >= 1.0 - 1e-9
            root = float(np.min(np.abs(vt[capped]))) if np.any(capped) else 0.0
        thr = c_reg * root
    else:
        thr = np.sqrt(2.0 * c_reg * lam)
    cand = dead & (np.abs(g) > thr * (1.0 + 1e-9) + 1e-12 * scale) & (revivals < _MAX_REVIVALS)
    return cand if np.any(cand) else None


def _solve_ball(core, gamma, k, lam, opts, vt, u):
    """Ball families: bisection on the multiplier eta of sum vt_i^2/u_i <= gamma.

    Each trial eta solves the Lagrangian subproblem (the penalty machinery
    with c_reg = eta); the constraint value at the subproblem optimum is
    nonincreasing in eta.  Bisection continues until the feasified iterate's
    own duality gap (measured with the closed-form eta-eliminated dual)
    meets the target.
    """
    budget = opts.max_sweeps
    spent = 0
    inner_cap = max(200, opts.max_sweeps // 20)

    def inner(eta, vt0, u0):
        nonlocal spent
        cap = min(inner_cap, max(1, budget - spent))
        vt1, u1, sw, _, _ = _am_penalty(
            core, eta, k, lam, opts, vt0, u0,
            sweep_budget=cap, tol_gap=0.3 * opts.tol_obj)
        spent += sw
        return vt1, u1, perspective_term(vt1, u1)

    def candidate_gap(vt1, u1, g_val):
        s = 1.0 if g_val <= gamma else np.sqrt(gamma / g_val)
        vtf = s * vt1
        t = core.f(core.L @ vtf)
        if lam is not None:
            t += lam * float(np.sum(u1))
        d = _ball_dual(core, gamma, k, lam, vtf)
        return vtf, t, t - d

    scale = float(np.max(np.abs(core.L.T @ core.grad_hat(np.zeros(core.r)))))
    eta = max(scale / max(np.sqrt(gamma), 1e-12), 1e-12)

    vt1, u1, g_val = inner(eta, vt, u)
    grow = 0
    while g_val > gamma and grow < 200:
        eta *= 4.0
        vt1, u1, g_val = inner(eta, vt1, u1)
        grow += 1
    hi, vt_hi, u_hi, g_hi = eta, vt1, u1, g_val
    lo = 0.0
    # shrink toward zero to find an infeasible side (or accept eta ~ 0)
    probe = eta
    while probe > 1e-14 * max(eta, 1.0):
        probe /= 8.0
        vt1, u1, g_val = inner(probe, vt_hi, u_hi)
        if g_val > gamma:
            lo = probe
            break
        hi, vt_hi, u_hi, g_hi = probe, vt1, u1, g_val
        vtf, t, gap = candidate_gap(vt_hi, u_hi, g_hi)
        if gap <= opts.tol_obj * (1.0 + abs(t)):
            return vtf, u_hi, probe, spent, True, gap

    best = candidate_gap(vt_hi, u_hi, g_hi) + (hi, u_hi)
    for _ in range(opts.ball_max_outer):
        vtf, t, gap = best[0], best[1], best[2]
        if gap <= opts.tol_obj * (1.0 + abs(t)) or spent >= budget:
            break
        if hi <= lo * (1.0 + 1e-13) + 1e-300:
            break
        mid = np.sqrt(max(lo, hi * 1e-16) * hi) if lo > 0.0 else 0.5 * (lo + hi)
        vt1, u1, g_val = inner(mid, vt_hi, u_hi)
        if g_val > gamma:
            lo = mid
        else:
            hi, vt_hi, u_hi, g_hi = mid, vt1, u1, g_val
        cand = candidate_gap(vt_hi, u_hi, g_hi) + (hi, u_hi)
        if cand[2] < best[2]:
            best = cand
    vtf, t, gap, eta_best, u_best = best
    converged = gap <= opts.tol_obj * (1.0 + abs(t))
    return vtf, u_best, float(eta_best), spent, converged, gap


def _ball_dual(core, gamma, k, lam, vt):
    zc = core.L @ vt
    z = core.grad_full(zc)
    fstar = model.loss_conjugate(core.loss, z, core.y)
    if not np.isfinite(fstar):
        return -np.inf
    a = (core.L.T @ core.grad_hat(zc)) ** 2
    if k is not None:
        return -fstar - np.sqrt(gamma * sum_top_k(a, k))
    return -fstar - _pen_ball_eta_term(a, lam, gamma)


def _pen_ball_eta_term(a, lam, gamma):
    """min over eta > 0 of eta*gamma/2 + sum_i max(0, a_i/(2 eta) - lam).

    Piecewise smooth with breakpoints at eta = a_i / (2 lam); on each piece
    the minimizer is sqrt(A/gamma) for the active mass A, so the exact
    minimum is found by scanning the sorted breakpoints.
    """
    a = np.asarray(a, dtype=float)
    pos = np.sort(a[a > 0.0])
    if pos.size == 0:
        return 0.0
    bps = pos / (2.0 * lam)  # ascending, paired with pos
    suffix = np.concatenate([np.cumsum(pos[::-1])[::-1], [0.0]])
    edges = np.concatenate([[0.0], bps, [np.inf]])
    best = np.inf
    for j in range(edges.size - 1):
        mass = suffix[j]  # active coordinates on this piece: those with bp > left edge
        nact = pos.size - j
        eta = np.sqrt(mass / gamma) if mass > 0.0 else edges[j]
        eta = min(max(eta, edges[j], 1e-300), edges[j + 1])
        val = 0.5 * eta * gamma + (mass / (2.0 * eta) - lam * nact if nact else 0.0)
        best = min(best, val)
    return float(max(best, 0.0))


def extract_dual_point(inst, svd, sol):
    """Fenchel dual point z = grad f at the relaxed fit, and the compressed
    equality multiplier nu = -U_r' z of the rank-r constraint."""
    _check_svd(inst, svd)
    core = _Core(svd, inst.y, inst.loss)
    zc = core.L @ sol.weights
    z = core.grad_full(zc)
    nu = -core.U.T @ z
    return z, nu


def dual_bound(inst, svd, z):
    """Family-dispatched dual objective at z: always a lower bound on the
    family's primal optimum (for the rank-r data); -inf outside dom f*."""
    _check_svd(inst, svd)
    z = model.as_vector(z, "z")
    if z.shape[0] != inst.n:
        raise ValueError(f"z has length {z.shape[0]}, expected {inst.n}")
    fstar = model.loss_conjugate(inst.loss, z, inst.y)
    if not np.isfinite(fstar):
        return -np.inf
    a = (svd.svt.T @ (svd.u.T @ z)) ** 2
    gamma = inst.ridge.gamma
    if inst.budget.kind == CONSTRAINED:
        top = sum_top_k(a, inst.budget.k)
        if inst.ridge.kind == PENALTY:
            return -fstar - top / (2.0 * gamma)
        return -fstar - float(np.sqrt(gamma * top))
    lam = inst.budget.lam
    if inst.ridge.kind == PENALTY:
        return -fstar + float(np.sum(np.minimum(0.0, lam - a / (2.0 * gamma))))
    return -fstar - _pen_ball_eta_term(a, lam, gamma)
