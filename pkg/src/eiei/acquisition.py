"""Sampling criteria: EI, two-point EI, expected EI (EEI), EIEI and the integrated EI.

Criteria are written for maximization of the objective. ``t`` is always the
current best observed value M_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .gp import GPPosterior, posterior_mean_cov
from .special import DomainError, bvn_cdf

__all__ = [
    "CandidateSet",
    "Gaussian2",
    "expected_improvement",
    "two_point_ei",
    "two_point_ei_arrays",
    "eei",
    "eiei",
    "eiei_all",
    "integrated_ei",
    "multi_point_ei_mc",
    "sd_floor",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# Standard deviations below SD_FLOOR_REL * sigma are treated as exactly zero.
SD_FLOOR_REL = 1e-9
# A 2x2 covariance with det <= RANK1_TOL * s11 * s22 is handled as rank one.
RANK1_TOL = 1e-14
_ROW_CHUNK = 4096


def sd_floor(post: GPPosterior) -> float:
    return SD_FLOOR_REL * math.sqrt(post.kernel.sigma2)


@dataclass(frozen=True)
class CandidateSet:
    """Finite point set used both as integration sample and as search set; uniform weight per point."""

    points: np.ndarray
    total_measure: float = 1.0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] == 0:
            raise ValueError("candidate set must be non-empty")
        if not self.total_measure > 0:
            raise ValueError("total_measure must be positive")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def weight(self) -> float:
        return self.total_measure / len(self)

    @classmethod
    def uniform_random(cls, lower, upper, m, seed):
        """``m`` iid uniform points in the box, weighted by its Lebesgue volume."""
        lower, upper = np.asarray(lower, float), np.asarray(upper, float)
        rng = np.random.default_rng(seed)
        pts = lower + (upper - lower) * rng.uniform(size=(m, len(lower)))
        return cls(pts, float(np.prod(upper - lower)))

    @classmethod
    def regular(cls, lower, upper, m):
        """Tensor grid with ceil(m ** (1/d)) nodes per axis, truncated to ``m`` points when d == 1."""
        lower, upper = np.asarray(lower, float), np.asarray(upper, float)
        d = len(lower)
        per_axis = m if d == 1 else int(math.ceil(round(m ** (1.0 / d), 9)))
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(lower, upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        return cls(pts, float(np.prod(upper - lower)))


@dataclass(frozen=True)
class Gaussian2:
    """Joint normal law of a pair (Y1, Y2)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(2)
        cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        if abs(cov[0, 1] - cov[1, 0]) > 1e-12 * max(1.0, abs(cov).max()):
            raise DomainError("covariance must be symmetric")
        if cov[0, 0] < 0 or cov[1, 1] < 0:
            raise DomainError("variances must be nonnegative")
        if cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2 < -1e-10:
            raise DomainError("covariance is not positive semi-definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def _ei(mean, sd, t, floor=0.0):
    mean, sd = np.asarray(mean, float), np.asarray(sd, float)
    gap = mean - t
    pos = sd > floor
    safe = np.where(pos, sd, 1.0)
    with np.errstate(over="ignore"):
        u = gap / safe
        val = gap * sc.ndtr(u) + safe * _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    return np.where(pos, np.maximum(val, np.maximum(gap, 0.0)), np.maximum(gap, 0.0))


def expected_improvement(mean, sd, t, sd_floor=0.0):
    """E[(Y - t)_+] for Y ~ N(mean, sd^2); sd at or below ``sd_floor`` counts as zero."""
    if np.any(np.asarray(sd) < 0):
        raise DomainError("standard deviation must be nonnegative")
    out = _ei(mean, sd, t, sd_floor)
    return out.item() if out.ndim == 0 else out


def _expected_max_affine(alpha, beta):
    """E[max_l (alpha_l + beta_l Z)], Z ~ N(0, 1); alpha and beta have shape (n, L).

    Integrates the upper envelope exactly, piece by piece between pairwise crossings.
    """
    n, nl = alpha.shape
    cross = []
    for i in range(nl):
        for j in range(i + 1, nl):
            db = beta[:, i] - beta[:, j]
            with np.errstate(divide="ignore", invalid="ignore"):
                z = -(alpha[:, i] - alpha[:, j]) / db
            cross.append(np.where(db != 0, z, np.inf))
    edges = np.sort(np.stack(cross, axis=1), axis=1)
    edges = np.concatenate([np.full((n, 1), -np.inf), edges, np.full((n, 1), np.inf)], axis=1)
    total = np.zeros(n)
    for p in range(edges.shape[1] - 1):
        lo, hi = edges[:, p], edges[:, p + 1]
        flo, fhi = np.isfinite(lo), np.isfinite(hi)
        with np.errstate(invalid="ignore"):
            mid = np.where(flo & fhi, 0.5 * (lo + hi), np.where(fhi, hi - 1.0, np.where(flo, lo + 1.0, 0.0)))
        best = np.argmax(alpha + beta * mid[:, None], axis=1)
        a = np.take_along_axis(alpha, best[:, None], axis=1)[:, 0]
        b = np.take_along_axis(beta, best[:, None], axis=1)[:, 0]
        mass = np.where(lo > 0, sc.ndtr(-lo) - sc.ndtr(-hi), sc.ndtr(hi) - sc.ndtr(lo))
        dens_lo = np.where(flo, _INV_SQRT_2PI * np.exp(-0.5 * np.where(flo, lo, 0.0) ** 2), 0.0)
        dens_hi = np.where(fhi, _INV_SQRT_2PI * np.exp(-0.5 * np.where(fhi, hi, 0.0) ** 2), 0.0)
        total += np.where(hi > lo, a * mass + b * (dens_lo - dens_hi), 0.0)
    return total


def _tallis_term(mu_a, var_a, mu_b, var_b, cov_ab, det):
    """E[A 1{A > 0, B > 0}] for a nondegenerate Gaussian pair (A, B) with det(cov) = ``det``."""
    sa, sb = np.sqrt(var_a), np.sqrt(var_b)
    a, b = mu_a / sa, mu_b / sb
    rho = np.clip(cov_ab / (sa * sb), -1.0, 1.0)
    q = np.sqrt(np.maximum(det, 0.0) / (var_a * var_b))
    with np.errstate(divide="ignore", invalid="ignore"):
        cb = np.where(q > 0, (b - rho * a) / q, np.sign(b - rho * a) * np.inf)
        ca = np.where(q > 0, (a - rho * b) / q, np.sign(a - rho * b) * np.inf)
    phi_a = _INV_SQRT_2PI * np.exp(-0.5 * a * a)
    phi_b = _INV_SQRT_2PI * np.exp(-0.5 * b * b)
    return sa * (a * bvn_cdf(a, b, rho) + phi_a * sc.ndtr(cb) + rho * phi_b * sc.ndtr(ca))


def two_point_ei_arrays(m1, m2, s11, s22, s12, t, var_floor=0.0):
    """Vectorised E[(max(Y1, Y2) - t)_+] for Gaussian pairs given by means and covariance entries.

    Nondegenerate pairs use the closed form E[sum_k (Y_k - t) 1{Y_k > t, Y_k > Y_j}]
    with one bivariate normal cdf per term. Pairs whose covariance is (numerically)
    rank one reduce to a piecewise-linear function of a single normal variable.
    """
    m1, m2, s11, s22, s12 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (m1, m2, s11, s22, s12)))
    shape = m1.shape
    m1, m2, s11, s22, s12 = (v.ravel() for v in (m1, m2, s11, s22, s12))
    s11 = np.where(s11 <= var_floor, 0.0, s11)
    s22 = np.where(s22 <= var_floor, 0.0, s22)
    s12 = np.where((s11 == 0.0) | (s22 == 0.0), 0.0, s12)
    det = s11 * s22 - s12 * s12
    rank1 = det <= RANK1_TOL * s11 * s22
    out = np.empty(m1.shape)

    g = ~rank1
    if g.any():
        a1, a2, v1, v2, c, dt = m1[g], m2[g], s11[g], s22[g], s12[g], det[g]
        vdiff = v1 + v2 - 2.0 * c
        out[g] = _tallis_term(a1 - t, v1, a1 - a2, vdiff, v1 - c, dt) + _tallis_term(
            a2 - t, v2, a2 - a1, vdiff, v2 - c, dt
        )
    if rank1.any():
        a1, a2, v1, v2, c = m1[rank1], m2[rank1], s11[rank1], s22[rank1], s12[rank1]
        first = v1 >= v2
        lead = np.sqrt(np.where(first, v1, v2))
        with np.errstate(divide="ignore", invalid="ignore"):
            other = np.where(lead > 0, c / lead, 0.0)
        b1 = np.where(first, lead, other)
        b2 = np.where(first, other, lead)
        alpha = np.stack([np.zeros_like(a1), a1 - t, a2 - t], axis=1)
        beta = np.stack([np.zeros_like(a1), b1, b2], axis=1)
        out[rank1] = _expected_max_affine(alpha, beta)
    return out.reshape(shape)


def two_point_ei(law: Gaussian2, t: float) -> float:
    """Two-point expected improvement E[(max(Y1, Y2) - t)_+]."""
    m, c = law.mean, law.cov
    return float(two_point_ei_arrays(m[0], m[1], c[0, 0], c[1, 1], c[0, 1], t))


def _pair_eei(mx, my, vx, vy, cxy, t, floor):
    """EEI(y; x) = EI_2(x, y) - EI(x), clipped to its theoretical range [0, EI(y)]."""
    var_floor = floor * floor
    ei2 = two_point_ei_arrays(mx, my, vx, vy, cxy, t, var_floor)
    eix = _ei(mx, np.sqrt(vx), t, floor)
    eiy = _ei(my, np.sqrt(vy), t, floor)
    return np.clip(ei2 - eix, 0.0, eiy)


def eei(post: GPPosterior, t: float, x_next, y) -> float:
    """Expected value, given the data, of the EI at ``y`` after one more evaluation at ``x_next``."""
    pts = np.vstack([np.asarray(x_next, float).reshape(1, -1), np.asarray(y, float).reshape(1, -1)])
    mean, cov = posterior_mean_cov(post, pts)
    return float(_pair_eei(mean[0], mean[1], cov[0, 0], cov[1, 1], cov[0, 1], t, sd_floor(post)))


def integrated_ei(post: GPPosterior, t: float, cand: CandidateSet) -> float:
    """Integral of the current EI over the candidate measure (the uncertainty H'_n)."""
    mean, var = post.mean_var(cand.points)
    return float(cand.weight * np.sum(_ei(mean, np.sqrt(var), t, sd_floor(post))))


def eiei_all(post: GPPosterior, t: float, cand: CandidateSet, rows=None, mean=None, cov=None):
    """EIEI criterion at every candidate index in ``rows`` (default: all), integrating over ``cand``.

    ``mean``/``cov`` may carry a precomputed posterior over ``cand.points``.
    """
    if mean is None or cov is None:
        mean, cov = posterior_mean_cov(post, cand.points)
    rows = np.arange(len(cand)) if rows is None else np.asarray(rows, dtype=int)
    floor = sd_floor(post)
    var = np.diag(cov)
    m = len(cand)
    out = np.empty(len(rows))
    step = max(1, _ROW_CHUNK * 16 // m)
    for s in range(0, len(rows), step):
        r = rows[s : s + step]
        e = _pair_eei(mean[r, None], mean[None, :], var[r, None], var[None, :], cov[r, :], t, floor)
        out[s : s + step] = cand.weight * e.sum(axis=1)
    return out


def eiei(post: GPPosterior, t: float, x_next, cand: CandidateSet) -> float:
    """Monte Carlo EIEI: (lambda(X)/m) * sum_i EEI(Y_i; x_next) over the candidate sample."""
    x = np.asarray(x_next, float).reshape(1, -1)
    pts = np.vstack([x, cand.points])
    mean, cov = posterior_mean_cov(post, pts)
    floor = sd_floor(post)
    var = np.diag(cov)
    e = _pair_eei(mean[0], mean[1:], var[0], var[1:], cov[0, 1:], t, floor)
    return float(cand.weight * e.sum())


def multi_point_ei_mc(means, cov, t: float, n_samples: int, seed: int):
    """Monte Carlo estimate of E[(max_k Y_k - t)_+] with its standard error."""
    means = np.atleast_1d(np.asarray(means, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    r = len(means)
    if cov.shape != (r, r):
        raise DomainError("covariance shape does not match means")
    scale = max(1.0, float(np.abs(cov).max()))
    if np.abs(cov - cov.T).max() > 1e-10 * scale:
        raise DomainError("covariance must be symmetric")
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    if w.min() < -1e-10 * scale:
        raise DomainError("covariance is not positive semi-definite")
    root = v * np.sqrt(np.maximum(w, 0.0))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, r))
    gain = np.maximum((means + z @ root.T).max(axis=1) - t, 0.0)
    est = float(gain.mean())
    se = float(gain.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else float("inf")
    return est, se
