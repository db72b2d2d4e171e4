"""Noiseless Gaussian-process regression with an isotropic Matern covariance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .special import matern_correlation

__all__ = [
    "MaternKernel",
    "GPPosterior",
    "SingularModelError",
    "DuplicatePointError",
    "kernel_eval",
    "condition",
    "posterior_mean_cov",
    "update",
    "sample_paths",
    "jittered_cholesky",
]

JITTER_START = 1e-12
JITTER_MAX = 1e-6


class SingularModelError(RuntimeError):
    """The covariance matrix could not be factorized even with maximal jitter."""


class DuplicatePointError(ValueError):
    """An evaluation point was supplied twice to a noiseless model."""


@dataclass(frozen=True)
class MaternKernel:
    """k(x, y) = sigma2 * r_nu(||x - y|| / beta)."""

    sigma2: float = 1.0
    beta: float = 0.2
    nu: float = 2.5

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.nu > 0:
            raise ValueError("nu must be positive")

    def __call__(self, x, y):
        """Cross-covariance matrix between the rows of ``x`` and ``y``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if x.shape[1] != y.shape[1]:
            raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
        if x.shape[0] == 0 or y.shape[0] == 0:
            return np.zeros((x.shape[0], y.shape[0]))
        h = cdist(x, y) / self.beta
        return self.sigma2 * np.asarray(matern_correlation(h, self.nu))


def kernel_eval(kernel: MaternKernel, x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return float(kernel(x[None, :], y[None, :])[0, 0])


def jittered_cholesky(K, sigma2, start=JITTER_START):
    """Lower Cholesky factor of K + eps*I, escalating eps by x10 from ``start*sigma2`` up to 1e-6*sigma2.

    Returns ``(L, eps)``; raises SingularModelError when every level fails.
    """
    n = K.shape[0]
    if n == 0:
        return np.zeros((0, 0)), start * sigma2
    rel = max(start, JITTER_START)
    while rel <= JITTER_MAX * (1 + 1e-9):
        eps = rel * sigma2
        try:
            L = cholesky(K + eps * np.eye(n), lower=True)
        except LinAlgError:
            rel *= 10.0
            continue
        return L, eps
    raise SingularModelError(f"covariance of size {n} not factorizable with jitter up to {JITTER_MAX:g}*sigma2")


def _as_design(points, d=None):
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        if d is None and pts.ndim == 2:
            d = pts.shape[1]
        if d is None:
            raise ValueError("dimension required for an empty design")
        return np.zeros((0, d))
    if pts.ndim == 1:
        pts = pts[:, None] if d == 1 or d is None else pts[None, :]
    if d is not None and pts.shape[1] != d:
        raise ValueError(f"design has dimension {pts.shape[1]}, expected {d}")
    return pts


def _check_distinct(pts):
    if len(np.unique(pts, axis=0)) != len(pts):
        raise DuplicatePointError("design contains duplicate points")


@dataclass(frozen=True, eq=False)
class GPPosterior:
    """Zero-mean GP conditioned on exact observations ``values`` at the rows of ``points``."""

    kernel: MaternKernel
    points: np.ndarray
    values: np.ndarray
    chol: np.ndarray
    jitter: float
    alpha: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def mean_cov(self, targets):
        return posterior_mean_cov(self, targets)

    def mean_var(self, targets):
        """Posterior means and variances only (no full covariance block)."""
        return _mean_cov(self, targets, full=False)


def _alpha(L, values):
    if len(values) == 0:
        return np.zeros(0)
    return solve_triangular(L.T, solve_triangular(L, values, lower=True), lower=False)


def condition(kernel: MaternKernel, design, values, d=None, jitter_start=JITTER_START) -> GPPosterior:
    """Condition the zero-mean prior on noiseless observations."""
    pts = _as_design(design, d)
    vals = np.asarray(values, dtype=float).ravel()
    if len(vals) != len(pts):
        raise ValueError("values and design sizes differ")
    if not np.all(np.isfinite(vals)):
        raise ValueError("observations must be finite")
    _check_distinct(pts)
    L, eps = jittered_cholesky(kernel(pts, pts), kernel.sigma2, jitter_start)
    return GPPosterior(kernel, pts, vals, L, eps, _alpha(L, vals))


def _mean_cov(post: GPPosterior, targets, full=True):
    T = _as_design(targets, post.d)
    if len(T) == 0:
        raise ValueError("targets must be non-empty")
    k = post.kernel
    if post.n == 0:
        mean = np.zeros(len(T))
        cov = k(T, T) if full else np.full(len(T), k.sigma2)
        return mean, cov
    Kdt = k(post.points, T)
    V = solve_triangular(post.chol, Kdt, lower=True)
    mean = Kdt.T @ post.alpha
    if full:
        cov = k(T, T) - V.T @ V
        cov = 0.5 * (cov + cov.T)
    else:
        cov = k.sigma2 - np.einsum("ij,ij->j", V, V)

    # Observed targets carry a degenerate conditional law: exact value, zero (co)variance.
    dist = cdist(T, post.points)
    ti, di = np.nonzero(dist == 0.0)
    if len(ti):
        mean[ti] = post.values[di]
        if full:
            cov[ti, :] = 0.0
            cov[:, ti] = 0.0
        else:
            cov[ti] = 0.0
    if full:
        diag = np.einsum("ii->i", cov)
        diag[diag < 0] = 0.0
    else:
        cov = np.maximum(cov, 0.0)
    return mean, cov


def posterior_mean_cov(post: GPPosterior, targets):
    """Posterior mean vector and full covariance matrix at ``targets`` (rows)."""
    return _mean_cov(post, targets, full=True)


def update(post: GPPosterior, x_new, v_new) -> GPPosterior:
    """Condition on one more observation by extending the Cholesky factor by a row."""
    x = np.asarray(x_new, dtype=float).reshape(1, -1)
    if x.shape[1] != post.d:
        raise ValueError(f"point has dimension {x.shape[1]}, expected {post.d}")
    if not np.isfinite(v_new):
        raise ValueError("observation must be finite")
    if post.n and np.any(np.all(post.points == x, axis=1)):
        raise DuplicatePointError(f"point {x.ravel()} already in the design")
    k = post.kernel
    pts = np.vstack([post.points, x])
    vals = np.append(post.values, float(v_new))
    kvec = k(post.points, x).ravel()
    l = solve_triangular(post.chol, kvec, lower=True) if post.n else np.zeros(0)
    d2 = k.sigma2 + post.jitter - l @ l
    if d2 <= 0.5 * post.jitter:
        # Rank-one extension lost positivity; refactorize with the jitter ladder.
        return condition(k, pts, vals, jitter_start=post.jitter / k.sigma2)
    n = post.n
    L = np.zeros((n + 1, n + 1))
    L[:n, :n] = post.chol
    L[n, :n] = l
    L[n, n] = np.sqrt(d2)
    return GPPosterior(k, pts, vals, L, post.jitter, _alpha(L, vals))


def sample_paths(kernel: MaternKernel, grid, n_paths: int, seed: int) -> np.ndarray:
    """Draw ``n_paths`` independent zero-mean GP paths on ``grid``; shape (n_paths, len(grid))."""
    pts = _as_design(grid)
    _check_distinct(pts)
    if n_paths < 0:
        raise ValueError("n_paths must be nonnegative")
    if n_paths == 0:
        return np.zeros((0, len(pts)))
    L, _ = jittered_cholesky(kernel(pts, pts), kernel.sigma2)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_paths, len(pts)))
    return z @ L.T
