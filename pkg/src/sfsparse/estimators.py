"""Scikit-learn style estimators wrapping the certificate pipeline.

Both estimators fit by solving the interval relaxation of the requested
cardinality problem, rounding to a feasible sparse coefficient vector
through the recovery LP, and attaching the resulting gap certificate.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin

from . import model, spectra
from .certificates import certified_solve
from .model import BALL, LOGISTIC, PENALTY, QUADRATIC
from .relax import SolverOptions


class _BaseSparseRidge(BaseEstimator):
    _loss = None

    def __init__(self, k=None, lam=None, ridge=PENALTY, gamma=0.01, rank=None,
                 trials=20, tol=1e-7, max_sweeps=10_000, random_state=0):
        self.k = k
        self.lam = lam
        self.ridge = ridge
        self.gamma = gamma
        self.rank = rank
        self.trials = trials
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.random_state = random_state

    def _budget(self):
        if (self.k is None) == (self.lam is None):
            raise ValueError("set exactly one of k (constrained) and lam (penalized)")
        if self.k is not None:
            return model.SparsityBudget.constrained(self.k)
        return model.SparsityBudget.penalized(self.lam)

    def _fit(self, X, y):
        X = model.as_matrix(X, "X")
        y = model.as_vector(y, "y")
        inst = model.ProblemInstance(
            x=X, y=y, loss=self._loss,
            ridge=model.RidgeForm(self.ridge, self.gamma),
            budget=self._budget(),
        )
        if self.rank is not None:
            svd = spectra.compact_svd(X, rank=self.rank)
        else:
            svd = spectra.compact_svd(X, tol=1e-12)
        opts = SolverOptions(tol_obj=self.tol, max_sweeps=self.max_sweeps)
        cert, sol, best = certified_solve(
            inst, svd, seed=self.random_state, trials=self.trials, opts=opts)
        self.coef_ = best.weights
        self.support_ = np.asarray(best.support, dtype=int)
        self.certificate_ = cert
        self.relaxed_value_ = sol.value
        self.n_iter_ = sol.sweeps
        self.n_features_in_ = X.shape[1]
        return self

    def _decision(self, X):
        X = model.as_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, estimator was fit with {self.n_features_in_}")
        return X @ self.coef_


class SparseRidgeRegressor(RegressorMixin, _BaseSparseRidge):
    """Sparse ridge regression with a certified duality gap.

    Minimizes ||Xw - y||^2/(2n) plus the chosen ridge form under either a
    hard cardinality bound ``k`` or a cardinality penalty ``lam``.  After
    ``fit``, ``coef_`` holds the recovered sparse weights and
    ``certificate_`` the verified bound chain.
    """

    _loss = QUADRATIC

    def fit(self, X, y):
        return self._fit(X, y)

    def predict(self, X):
        return self._decision(X)


class SparseRidgeClassifier(ClassifierMixin, _BaseSparseRidge):
    """Sparse logistic regression with a certified duality gap.

    Binary only; labels are mapped to {-1, +1} internally.  ``ridge`` and
    the budget parameters behave as in :class:`SparseRidgeRegressor`.
    """

    _loss = LOGISTIC

    def fit(self, X, y):
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if self.classes_.shape[0] != 2:
            raise ValueError(
                f"expected exactly 2 classes, got {self.classes_.shape[0]}")
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        return self._fit(X, signs)

    def decision_function(self, X):
        return self._decision(X)

    def predict(self, X):
        margin = self._decision(X)
        return np.where(margin >= 0.0, self.classes_[1], self.classes_[0])
