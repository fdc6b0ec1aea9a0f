"""Problem data, loss functions, conjugates, and primal objectives.

Two losses are supported, with the normalizations all bounds in this
package inherit:

* quadratic:  f(z; y) = ||z - y||^2 / (2n)
* logistic:   f(z; y) = (1/n) sum_i log(1 + exp(-y_i z_i)),  y_i in {-1, +1}
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

QUADRATIC = "quadratic"
LOGISTIC = "logistic"
LOSSES = (QUADRATIC, LOGISTIC)

PENALTY = "penalty"
BALL = "ball"

CONSTRAINED = "constrained"
PENALIZED = "penalized"

# Relative slack accepted when checking ||w||^2 <= gamma for ball ridges.
BALL_FEAS_RTOL = 1e-9


def as_vector(a, name="array"):
    """Coerce to a finite 1-D float array or raise ValueError."""
    v = np.asarray(a, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return v


def as_matrix(a, name="array"):
    """Coerce to a finite 2-D float array or raise ValueError."""
    x = np.asarray(a, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {x.shape}")
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise ValueError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return x


@dataclass(frozen=True)
class RidgeForm:
    """Quadratic regularizer: either a penalty (gamma/2)||w||^2 or a ball ||w||^2 <= gamma."""

    kind: str
    gamma: float

    def __post_init__(self):
        if self.kind not in (PENALTY, BALL):
            raise ValueError(f"ridge kind must be '{PENALTY}' or '{BALL}', got {self.kind!r}")
        if not np.isfinite(self.gamma) or self.gamma <= 0.0:
            raise ValueError(f"ridge gamma must be strictly positive, got {self.gamma!r}")


@dataclass(frozen=True)
class SparsityBudget:
    """Cardinality control: a hard bound ||w||_0 <= k or a penalty lam * ||w||_0."""

    kind: str
    k: int | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.kind == CONSTRAINED:
            if self.k is None or int(self.k) != self.k or self.k < 0:
                raise ValueError(f"constrained budget needs a nonnegative integer k, got {self.k!r}")
            object.__setattr__(self, "k", int(self.k))
        elif self.kind == PENALIZED:
            if self.lam is None or not np.isfinite(self.lam) or self.lam <= 0.0:
                raise ValueError(f"penalized budget needs lam > 0, got {self.lam!r}")
        else:
            raise ValueError(f"budget kind must be '{CONSTRAINED}' or '{PENALIZED}', got {self.kind!r}")

    @classmethod
    def constrained(cls, k):
        return cls(CONSTRAINED, k=k)

    @classmethod
    def penalized(cls, lam):
        return cls(PENALIZED, lam=lam)


@dataclass
class ProblemInstance:
    """A sparse regression problem: data (x, y), a loss tag, a ridge form, and a sparsity budget.

    Rows of ``x`` are samples.  For the logistic loss every ``y_i`` must lie
    in {-1, +1}.
    """

    x: np.ndarray
    y: np.ndarray
    loss: str
    ridge: RidgeForm
    budget: SparsityBudget

    def __post_init__(self):
        self.x = as_matrix(self.x, "x")
        self.y = as_vector(self.y, "y")
        n, m = self.x.shape
        if self.y.shape[0] != n:
            raise ValueError(f"y has length {self.y.shape[0]}, expected {n} (rows of x)")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.loss == LOGISTIC:
            _check_labels(self.y)
        if not isinstance(self.ridge, RidgeForm):
            raise ValueError("ridge must be a RidgeForm")
        if not isinstance(self.budget, SparsityBudget):
            raise ValueError("budget must be a SparsityBudget")
        if self.budget.kind == CONSTRAINED and self.budget.k > m:
            raise ValueError(f"budget k={self.budget.k} exceeds number of features m={m}")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def m(self):
        return self.x.shape[1]


def _check_labels(y):
    if not np.all(np.isin(y, (-1.0, 1.0))):
        bad = y[~np.isin(y, (-1.0, 1.0))][0]
        raise ValueError(f"logistic labels must be -1 or +1, got {bad!r}")


def sigmoid(t):
    """Numerically stable logistic sigmoid."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _log1pexp(t):
    # log(1 + exp(t)) without overflow
    return np.logaddexp(0.0, t)


def _check_pair(z, y):
    z = as_vector(z, "z")
    y = as_vector(y, "y")
    if z.shape != y.shape:
        raise ValueError(f"length mismatch: z has {z.shape[0]}, y has {y.shape[0]}")
    return z, y


def loss_value(loss, z, y):
    """Evaluate f(z; y) for the given loss tag."""
    z, y = _check_pair(z, y)
    n = z.shape[0]
    if loss == QUADRATIC:
        return float(np.dot(z - y, z - y) / (2.0 * n))
    if loss == LOGISTIC:
        _check_labels(y)
        return float(np.sum(_log1pexp(-y * z)) / n)
    raise ValueError(f"unknown loss {loss!r}")


def loss_gradient(loss, z, y):
    """Gradient of f(.; y) at z."""
    z, y = _check_pair(z, y)
    n = z.shape[0]
    if loss == QUADRATIC:
        return (z - y) / n
    if loss == LOGISTIC:
        _check_labels(y)
        return -y * sigmoid(-y * z) / n
    raise ValueError(f"unknown loss {loss!r}")


def loss_curvature(loss, z, y):
    """Diagonal of the Hessian of f(.; y) at z (both losses have diagonal Hessians)."""
    z, y = _check_pair(z, y)
    n = z.shape[0]
    if loss == QUADRATIC:
        return np.full(n, 1.0 / n)
    if loss == LOGISTIC:
        _check_labels(y)
        p = sigmoid(y * z)
        return p * (1.0 - p) / n
    raise ValueError(f"unknown loss {loss!r}")


def loss_conjugate(loss, s, y):
    """Fenchel conjugate f*(s) = sup_z s.z - f(z; y).

    Quadratic: s.y + (n/2)||s||^2.  Logistic: separable negative entropy,
    finite only when every n*s_i*y_i lies in [-1, 0]; +inf is returned
    outside that domain (never an error).
    """
    s, y = _check_pair(s, y)
    n = s.shape[0]
    if loss == QUADRATIC:
        return float(s @ y + 0.5 * n * (s @ s))
    if loss == LOGISTIC:
        _check_labels(y)
        sig = n * s * y
        # tiny overshoot from float round-off is clamped; genuine violations -> +inf
        tol = 1e-12
        if np.any(sig < -1.0 - tol) or np.any(sig > tol):
            return np.inf
        sig = np.clip(sig, -1.0, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(sig < 0.0, (-sig) * np.log(np.maximum(-sig, 1e-300)), 0.0)
            b = np.where(sig > -1.0, (1.0 + sig) * np.log(np.maximum(1.0 + sig, 1e-300)), 0.0)
        return float(np.sum(a + b) / n)
    raise ValueError(f"unknown loss {loss!r}")


def primal_objective(inst, w):
    """Objective of the original problem at w.

    Penalty ridge: f(Xw) + (gamma/2)||w||^2 [+ lam*||w||_0 for a penalized
    budget].  Ball ridge: the gamma term is omitted from the value; use
    :func:`ball_feasible` for the accompanying ||w||^2 <= gamma flag
    (possibly infeasible w is evaluated, not rejected).
    """
    w = as_vector(w, "w")
    if w.shape[0] != inst.m:
        raise ValueError(f"w has length {w.shape[0]}, expected {inst.m}")
    val = loss_value(inst.loss, inst.x @ w, inst.y)
    if inst.ridge.kind == PENALTY:
        val += 0.5 * inst.ridge.gamma * float(w @ w)
    if inst.budget.kind == PENALIZED:
        val += inst.budget.lam * float(np.count_nonzero(w))
    return val


def ball_feasible(inst, w, rtol=BALL_FEAS_RTOL):
    """Whether w satisfies the ball ridge ||w||^2 <= gamma*(1+rtol); True for penalty ridges."""
    w = as_vector(w, "w")
    if inst.ridge.kind != BALL:
        return True
    return float(w @ w) <= inst.ridge.gamma * (1.0 + rtol)


def rho_bound(loss, user_rho=None):
    """Lack-of-convexity bound rho(f) = sup f - f**.

    Zero for the built-in closed convex losses; a user-declared bound is
    passed through for non-convex loss hooks.
    """
    if user_rho is not None:
        if not np.isfinite(user_rho) or user_rho < 0.0:
            raise ValueError(f"user_rho must be a finite nonnegative real, got {user_rho!r}")
        return float(user_rho)
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    return 0.0
