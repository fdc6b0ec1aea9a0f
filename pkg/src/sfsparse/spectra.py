"""Compact SVD, numerical rank, and the synthetic data generators.

All randomness flows through ``numpy.random.default_rng`` (PCG64), so every
generator is bit-reproducible given its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import as_matrix


@dataclass(frozen=True)
class SvdFactors:
    """Compact rank-r factors of a matrix X.

    ``u`` (n, r) and ``vh`` (r, m) have orthonormal columns/rows, ``s`` holds
    the kept singular values (positive, nonincreasing), ``residual`` is the
    discarded remainder X - u @ diag(s) @ vh, and ``svt`` = diag(s) @ vh is
    the (r, m) compressed design whose i-th column maps feature i into the
    rank-r coordinate space.
    """

    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray
    residual: np.ndarray

    @property
    def rank(self):
        return self.s.shape[0]

    @property
    def svt(self):
        return self.s[:, None] * self.vh

    def reconstruct(self):
        """The rank-r matrix u @ diag(s) @ vh."""
        return self.u @ self.svt


def compact_svd(x, rank=None, tol=None):
    """Compact SVD of ``x`` truncated either to ``rank`` triplets or at ``tol``.

    Exactly one of ``rank`` and ``tol`` must be given.  With ``rank``, the top
    ``rank`` singular triplets are kept (trailing numerically-zero ones are
    dropped so the kept spectrum stays strictly positive).  With ``tol``, all
    triplets with s_i > tol * s_1 are kept.
    """
    x = as_matrix(x, "x")
    if (rank is None) == (tol is None):
        raise ValueError("provide exactly one of rank and tol")
    u, s, vh = np.linalg.svd(x, full_matrices=False)
    if rank is not None:
        if int(rank) != rank or not 1 <= rank <= min(x.shape):
            raise ValueError(f"rank must be an integer in [1, {min(x.shape)}], got {rank!r}")
        r = int(rank)
    else:
        if not 0.0 < tol:
            raise ValueError(f"tol must be positive, got {tol!r}")
        r = int(np.sum(s > tol * s[0])) if s[0] > 0.0 else 0
    # never keep exact-zero directions
    r = min(r, int(np.sum(s > s[0] * 1e-15)) if s.size and s[0] > 0.0 else 0)
    u, s, vh = u[:, :r], s[:r], vh[:r, :]
    residual = x - u @ (s[:, None] * vh)
    return SvdFactors(u=u, s=s, vh=vh, residual=residual)


def numerical_rank(x, tau=0.01):
    """Smallest r with s_{r+1} <= tau * s_1 (s beyond min(n, m) taken as 0)."""
    x = as_matrix(x, "x")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    s = np.linalg.svd(x, compute_uv=False)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.sum(s > tau * s[0]))


def make_lowrank(n, m, rank, seed):
    """Gaussian matrix truncated to exact rank ``rank`` via its top SVD triplets."""
    if not 1 <= rank <= min(n, m):
        raise ValueError(f"rank must lie in [1, {min(n, m)}], got {rank!r}")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, m))
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return u[:, :rank] @ (s[:rank, None] * vh[:rank, :])


def make_bell_lowrank(n, m, effective_rank, seed):
    """Matrix with a bell-shaped spectrum s_i = exp(-(i / effective_rank)^2).

    Random orthonormal factors carry the profile; the spectrum is strictly
    decreasing with a rapidly-vanishing tail, so the numerical rank tracks
    ``effective_rank`` up to the threshold used.
    """
    p = min(n, m)
    if not 1 <= effective_rank <= p:
        raise ValueError(f"effective_rank must lie in [1, {p}], got {effective_rank!r}")
    rng = np.random.default_rng(seed)
    qu, _ = np.linalg.qr(rng.standard_normal((n, p)))
    qv, _ = np.linalg.qr(rng.standard_normal((m, p)))
    s = np.exp(-((np.arange(p) / effective_rank) ** 2))
    return (qu * s) @ qv.T


def make_sparse_coef(m, support_size, std, seed):
    """Length-m vector with exactly ``support_size`` N(0, std^2) entries at random positions."""
    if not 0 <= support_size <= m:
        raise ValueError(f"support_size must lie in [0, {m}], got {support_size!r}")
    rng = np.random.default_rng(seed)
    beta = np.zeros(m)
    if support_size:
        idx = rng.choice(m, size=support_size, replace=False)
        beta[idx] = rng.normal(0.0, std, size=support_size)
    return beta
