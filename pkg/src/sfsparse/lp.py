"""Dense bounded-variable simplex returning basic feasible solutions.

The primalization step needs true vertices (at most #rows variables strictly
between their bounds), which interior-point methods do not deliver, so this
is a small revised simplex with explicit lower/upper variable bounds,
phase-1 artificial variables, and Bland's anti-cycling rule.  Problems here
are tiny (a handful of rows, up to a few thousand columns); everything is
dense and each iteration refactorizes the basis.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"

#: Post-row-scaling feasibility tolerance (phase-1 residual and final check).
FEAS_TOL = 1e-7
#: Tolerance deciding whether a coordinate sits strictly between its bounds.
BOUND_TOL = 1e-7

_RC_TOL = 1e-9
_PIV_TOL = 1e-11


class LpCycleError(Exception):
    """Iteration cap hit; reported as a distinct failure, never silently."""


@dataclass(frozen=True)
class LpProblem:
    """min objective @ u  s.t.  eq_rows @ u = eq_rhs, ineq_rows @ u <= ineq_rhs,
    lower <= u <= upper.

    ``eq_slack`` > 0 widens every equality row into the range
    b - eq_slack <= a @ u <= b + eq_slack, measured after each row is scaled
    to unit max-abs coefficient (see :func:`lp_feasible_with_slack`).
    """

    objective: np.ndarray
    eq_rows: np.ndarray
    eq_rhs: np.ndarray
    ineq_rows: np.ndarray
    ineq_rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    eq_slack: float = 0.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        m = c.shape[0]
        eq = np.asarray(self.eq_rows, dtype=float).reshape(-1, m)
        beq = np.atleast_1d(np.asarray(self.eq_rhs, dtype=float)).reshape(-1)
        ineq = np.asarray(self.ineq_rows, dtype=float).reshape(-1, m)
        bineq = np.atleast_1d(np.asarray(self.ineq_rhs, dtype=float)).reshape(-1)
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if eq.shape[0] != beq.shape[0]:
            raise ValueError("eq_rows and eq_rhs disagree on the number of rows")
        if ineq.shape[0] != bineq.shape[0]:
            raise ValueError("ineq_rows and ineq_rhs disagree on the number of rows")
        if lo.shape != (m,) or hi.shape != (m,):
            raise ValueError("lower/upper must match the objective length")
        for arr, name in ((c, "objective"), (eq, "eq_rows"), (beq, "eq_rhs"),
                          (ineq, "ineq_rows"), (bineq, "ineq_rhs"),
                          (lo, "lower"), (hi, "upper")):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        if not np.isfinite(self.eq_slack) or self.eq_slack < 0.0:
            raise ValueError(f"eq_slack must be nonnegative, got {self.eq_slack!r}")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "eq_rows", eq)
        object.__setattr__(self, "eq_rhs", beq)
        object.__setattr__(self, "ineq_rows", ineq)
        object.__setattr__(self, "ineq_rhs", bineq)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def nvars(self):
        return self.objective.shape[0]

    @property
    def nrows(self):
        return self.eq_rows.shape[0] + self.ineq_rows.shape[0]


@dataclass
class LpSolution:
    u: np.ndarray
    status: str
    basis: tuple
    nonbound_count: int
    value: float
    iterations: int


def lp_feasible_with_slack(prob, slack):
    """Widen every equality row to b - slack <= a @ u <= b + slack (row-scaled)."""
    if not np.isfinite(slack) or slack < 0.0:
        raise ValueError(f"slack must be nonnegative, got {slack!r}")
    return replace(prob, eq_slack=float(slack))


def lp_solve(prob, max_iter=None):
    """Solve the LP; returns a vertex or an Infeasible status.

    At an Optimal solution every constraint is satisfied to within
    :data:`FEAS_TOL` absolute after row scaling, and at most
    ``prob.nrows`` coordinates of u sit strictly between their bounds.
    Identical problems yield identical solutions (Bland's rule with
    lowest-index tie breaks throughout).
    """
    m = prob.nvars
    p, q = prob.eq_rows.shape[0], prob.ineq_rows.shape[0]
    nrows = p + q
    if nrows == 0:
        u = np.where(prob.objective < 0.0, prob.upper, prob.lower)
        return LpSolution(u=u, status=OPTIMAL, basis=(),
                          nonbound_count=0,
                          value=float(prob.objective @ u), iterations=0)

    rows = np.vstack([prob.eq_rows, prob.ineq_rows])
    rhs = np.concatenate([prob.eq_rhs, prob.ineq_rhs])
    scale = np.max(np.abs(rows), axis=1)
    scale[scale == 0.0] = 1.0
    rows = rows / scale[:, None]
    rhs = rhs / scale

    ranged = prob.eq_slack > 0.0
    # columns: structural u | one slack per ineq row (+ per eq row if ranged)
    slack_rows = list(range(p, nrows)) + (list(range(p)) if ranged else [])
    nslack = len(slack_rows)
    nvars = m + nslack + nrows  # + artificials
    a = np.zeros((nrows, nvars))
    a[:, :m] = rows
    lo = np.empty(nvars)
    hi = np.empty(nvars)
    lo[:m], hi[:m] = prob.lower, prob.upper
    b = rhs.copy()
    for j, i in enumerate(slack_rows):
        a[i, m + j] = 1.0
        if i < p:  # ranged equality: a@u + s = b + slack, s in [0, 2*slack]
            b[i] = rhs[i] + prob.eq_slack
            lo[m + j], hi[m + j] = 0.0, 2.0 * prob.eq_slack
        else:
            lo[m + j], hi[m + j] = 0.0, np.inf

    x = np.where(np.abs(lo[: m + nslack]) <= np.abs(hi[: m + nslack]), lo[: m + nslack],
                 hi[: m + nslack])
    x = np.where(np.isfinite(x), x, lo[: m + nslack])  # inf upper -> start at lower
    at_upper = x == hi[: m + nslack]
    x_full = np.zeros(nvars)
    x_full[: m + nslack] = x
    resid = b - a[:, : m + nslack] @ x
    art0 = m + nslack
    for i in range(nrows):
        a[i, art0 + i] = 1.0 if resid[i] >= 0.0 else -1.0
        x_full[art0 + i] = abs(resid[i])
    lo[art0:] = 0.0
    hi[art0:] = np.inf
    at_up = np.zeros(nvars, dtype=bool)
    at_up[: m + nslack] = at_upper
    basis = list(range(art0, nvars))

    if max_iter is None:
        max_iter = 2000 + 60 * nvars

    cost1 = np.zeros(nvars)
    cost1[art0:] = 1.0
    iters1 = _simplex(a, b, cost1, lo, hi, x_full, at_up, basis, max_iter,
                      frozen_from=None)
    if float(np.sum(x_full[art0:])) > FEAS_TOL:
        return LpSolution(u=x_full[:m].copy(), status=INFEASIBLE, basis=(),
                          nonbound_count=0, value=np.nan, iterations=iters1)
    # pin artificials at zero for phase 2
    hi[art0:] = 0.0
    x_full[art0:] = np.maximum(x_full[art0:], 0.0)
    x_full[art0:][x_full[art0:] <= FEAS_TOL] = 0.0

    cost2 = np.zeros(nvars)
    cost2[:m] = prob.objective
    iters2 = _simplex(a, b, cost2, lo, hi, x_full, at_up, basis, max_iter,
                      frozen_from=art0)

    u = x_full[:m].copy()
    res_eq = rows @ u - rhs
    viol = 0.0
    if p:
        viol = max(viol, float(np.max(np.abs(res_eq[:p])) - prob.eq_slack))
    if q:
        viol = max(viol, float(np.max(res_eq[p:])))
    viol = max(viol, float(np.max(prob.lower - u, initial=0.0)),
               float(np.max(u - prob.upper, initial=0.0)))
    if viol > FEAS_TOL:
        raise RuntimeError(f"simplex returned an infeasible point (violation {viol:.2e})")
    strict = (u > prob.lower + BOUND_TOL) & (u < prob.upper - BOUND_TOL)
    return LpSolution(
        u=u,
        status=OPTIMAL,
        basis=tuple(sorted(j for j in basis if j < m)),
        nonbound_count=int(np.count_nonzero(strict)),
        value=float(prob.objective @ u),
        iterations=iters1 + iters2,
    )


def _simplex(a, b, cost, lo, hi, x, at_up, basis, max_iter, frozen_from):
    """Bounded-variable primal simplex (Bland's rule); mutates x, at_up, basis."""
    nrows, nvars = a.shape
    in_basis = np.zeros(nvars, dtype=bool)
    in_basis[basis] = True
    for it in range(1, max_iter + 1):
        bmat = a[:, basis]
        nonbasic = ~in_basis
        xn = np.where(at_up, hi, lo)
        xn = np.where(np.isfinite(xn), xn, 0.0)
        x[nonbasic] = xn[nonbasic]
        xb = np.linalg.solve(bmat, b - a[:, nonbasic] @ x[nonbasic])
        x[basis] = xb

        y = np.linalg.solve(bmat.T, cost[basis])
        d = cost - y @ a
        enter = -1
        direction = 0.0
        for j in range(nvars):
            if in_basis[j] or lo[j] == hi[j]:
                continue
            if frozen_from is not None and j >= frozen_from:
                continue
            if not at_up[j] and d[j] < -_RC_TOL:
                enter, direction = j, 1.0
                break
            if at_up[j] and d[j] > _RC_TOL:
                enter, direction = j, -1.0
                break
        if enter < 0:
            return it - 1

        w = np.linalg.solve(bmat, a[:, enter])
        # basic values move at rate -direction*w per unit step of the entering var
        t_best = hi[enter] - lo[enter]
        leave_pos = -1
        leave_to_upper = False
        for i in range(nrows):
            delta = -direction * w[i]
            bi = basis[i]
            if delta > _PIV_TOL:
                room = hi[bi] - x[bi]
                if not np.isfinite(room):
                    continue
                ti, to_upper = room / delta, True
            elif delta < -_PIV_TOL:
                ti, to_upper = (x[bi] - lo[bi]) / (-delta), False
            else:
                continue
            ti = max(ti, 0.0)
            if ti < t_best - 1e-12 or (
                ti <= t_best + 1e-12 and leave_pos >= 0 and bi < basis[leave_pos]
            ):
                t_best, leave_pos, leave_to_upper = ti, i, to_upper
        if not np.isfinite(t_best):
            raise RuntimeError("unbounded direction in simplex (malformed problem)")

        if leave_pos < 0:
            # entering variable flips to its opposite bound
            at_up[enter] = not at_up[enter]
            continue
        out = basis[leave_pos]
        x[enter] = (hi[enter] if at_up[enter] else lo[enter]) + direction * t_best
        in_basis[out] = False
        in_basis[enter] = True
        at_up[out] = leave_to_upper
        basis[leave_pos] = enter
    raise LpCycleError(f"simplex hit the iteration cap ({max_iter})")
