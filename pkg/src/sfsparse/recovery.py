"""Recovery of feasible sparse points from a relaxed solution.

The relaxed selector is fed to a linear program whose vertex has at most
(#rows) fractional coordinates; rounding those up yields a feasible point
whose objective the gap certificates bound.  A random Gaussian objective
picks among optimal vertices; several trials are drawn to report the
dispersion of the recovered value.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import lp, model
from .model import BALL, CONSTRAINED, PENALIZED, PENALTY

#: Equality-row widening attempts, in row-scaled units (see lp.lp_feasible_with_slack).
SLACK_LADDER = (0.0, 1e-9, 1e-7, 1e-5)

#: A selector entry within this distance of {0, 1} counts as binary.
BINARY_TOL = 1e-7


class AllTrialsInfeasible(Exception):
    """Every recovery LP stayed infeasible through the whole slack ladder.

    Signals an unconverged relaxed solution: the LP rows are built from its
    reported optimum, so a converged solution is always feasible for them.
    """


@dataclass
class PrimalPoint:
    """A feasible sparse point rounded from an LP vertex.

    ``weights`` = selector * magnitudes coordinatewise; ``value`` is the true
    primal objective of ``weights`` (lam charged on the actual cardinality).
    """

    weights: np.ndarray
    selector: np.ndarray
    magnitudes: np.ndarray
    support: tuple
    value: float
    card: int
    slack_used: float = 0.0
    trial: int = 0
    fractional_count: int = 0


def recovery_lp(inst, svd, sol, c):
    """Assemble the rounding LP for the instance's family.

    Rows over u in [0,1]^m, with v* the relaxed magnitudes and z* the
    relaxed compressed point:

    * penalty+constrained: sum u_i (gamma/2) v*_i^2 = t* - f; 1'u <= k;
      svt-weighted equality rows sum u_i l_i v*_i = z*.
    * penalty+penalized: objective row gains the lam term, no budget row.
    * ball+constrained: budget row, ball row sum u_i v*_i^2 <= gamma, the
      equality rows, and no objective row.
    * ball+penalized: objective row with the lam term alone, ball row,
      equality rows.
    """
    c = model.as_vector(c, "c")
    if c.shape[0] != inst.m:
        raise ValueError(f"objective has length {c.shape[0]}, expected {inst.m}")
    u_star, v_star = sol.selector, sol.magnitudes
    gamma = inst.ridge.gamma
    eq_rows, eq_rhs, ineq_rows, ineq_rhs = [], [], [], []

    if inst.ridge.kind == PENALTY:
        row = 0.5 * gamma * v_star ** 2
        if inst.budget.kind == PENALIZED:
            row = row + inst.budget.lam
        eq_rows.append(row)
        eq_rhs.append(float(row @ u_star))
        if inst.budget.kind == CONSTRAINED:
            ineq_rows.append(np.ones(inst.m))
            ineq_rhs.append(float(inst.budget.k))
    else:
        if inst.budget.kind == CONSTRAINED:
            ineq_rows.append(np.ones(inst.m))
            ineq_rhs.append(float(inst.budget.k))
        else:
            row = np.full(inst.m, inst.budget.lam)
            eq_rows.append(row)
            eq_rhs.append(float(row @ u_star))
        ineq_rows.append(v_star ** 2)
        ineq_rhs.append(float(gamma))

    svt = svd.svt
    for i in range(svt.shape[0]):
        eq_rows.append(svt[i] * v_star)
        eq_rhs.append(float(sol.compressed[i]))

    zeros = np.zeros((0, inst.m))
    return lp.LpProblem(
        objective=c,
        eq_rows=np.vstack(eq_rows) if eq_rows else zeros,
        eq_rhs=np.asarray(eq_rhs, dtype=float),
        ineq_rows=np.vstack(ineq_rows) if ineq_rows else zeros,
        ineq_rhs=np.asarray(ineq_rhs, dtype=float),
        lower=np.zeros(inst.m),
        upper=np.ones(inst.m),
    )


def round_selector(inst, svd, sol, ubar):
    """Round an LP vertex ubar to a feasible sparse point.

    Fractional coordinates S get selector 1 and magnitude ubar_i v*_i;
    binary coordinates keep v*_i, so weights = ubar * v* everywhere and the
    compressed point (hence the fit term) is preserved exactly.  The value
    is the primal objective on the rank-r data with lam charged per actual
    nonzero.
    """
    ubar = np.clip(np.asarray(ubar, dtype=float), 0.0, 1.0)
    v_star = sol.magnitudes
    binary = (ubar <= BINARY_TOL) | (ubar >= 1.0 - BINARY_TOL)
    snapped = np.where(ubar >= 0.5, 1.0, 0.0)
    selector = np.where(binary, snapped, 1.0)
    magnitudes = np.where(binary, v_star, ubar * v_star)
    weights = selector * magnitudes
    support = tuple(int(i) for i in np.flatnonzero(weights))
    inst_r = _lowrank_instance(inst, svd)
    value = model.primal_objective(inst_r, weights)
    return PrimalPoint(
        weights=weights,
        selector=selector,
        magnitudes=magnitudes,
        support=support,
        value=float(value),
        card=len(support),
    )


def _lowrank_instance(inst, svd):
    return model.ProblemInstance(
        x=svd.reconstruct(), y=inst.y, loss=inst.loss,
        ridge=inst.ridge, budget=inst.budget,
    )


def primalize(inst, svd, sol, seed=0, trials=20):
    """Draw ``trials`` Gaussian objectives, solve the recovery LP for each,
    round, and return (best point, all points).

    Each trial's RNG stream derives from (seed, trial), so results do not
    depend on execution order.  Equality rows are widened along
    :data:`SLACK_LADDER` when the LP is infeasible at the tighter settings;
    the slack that succeeded is recorded on the point.  Raises
    :class:`AllTrialsInfeasible` if no trial survives the ladder.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials!r}")
    nrows_cap = svd.rank + (1 if inst.budget.kind == PENALIZED and inst.ridge.kind == PENALTY else 2)
    points = []
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        c = rng.standard_normal(inst.m)
        base = recovery_lp(inst, svd, sol, c)
        res = None
        used = None
        for slack in SLACK_LADDER:
            prob = base if slack == 0.0 else lp.lp_feasible_with_slack(base, slack)
            cand = lp.lp_solve(prob)
            if cand.status == lp.OPTIMAL:
                res, used = cand, slack
                break
        if res is None:
            continue
        if res.nonbound_count > nrows_cap:
            raise RuntimeError(
                f"LP vertex has {res.nonbound_count} fractional coordinates, "
                f"expected at most {nrows_cap}"
            )
        point = round_selector(inst, svd, sol, res.u)
        point.slack_used = used
        point.trial = trial
        point.fractional_count = res.nonbound_count
        _check_point(inst, svd, point)
        points.append(point)
    if not points:
        raise AllTrialsInfeasible(
            f"all {trials} recovery LPs infeasible through slack ladder {SLACK_LADDER}"
        )
    best = min(points, key=lambda p: (p.value, p.card, p.trial))
    return best, points


def _check_point(inst, svd, point):
    if inst.budget.kind == CONSTRAINED:
        cap = inst.budget.k + svd.rank + 2
        if point.card > cap:
            raise RuntimeError(
                f"rounded point has {point.card} nonzeros, expected at most "
                f"k + r + 2 = {cap}"
            )
    if inst.ridge.kind == BALL:
        w2 = float(point.weights @ point.weights)
        if w2 > inst.ridge.gamma * (1.0 + 1e-7):
            raise RuntimeError(
                f"rounded point violates the ball: ||w||^2 = {w2:.12g} vs "
                f"gamma = {inst.ridge.gamma:.12g}"
            )
