"""Scalar special functions: standard normal pdf/cdf, bivariate normal cdf, Matern correlation.

All functions accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special as sc

__all__ = [
    "DomainError",
    "std_normal_pdf",
    "std_normal_cdf",
    "bvn_cdf",
    "matern_correlation",
    "matern_half_integer",
    "matern_bessel",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_TWO_PI = 2.0 * math.pi
# |rho| beyond this is treated as perfect (anti)correlation.
RHO_CLAMP = 1.0 - 1e-12


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


def _scalar_or_array(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def std_normal_pdf(z):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("std_normal_pdf requires finite input")
    return _scalar_or_array(_INV_SQRT_2PI * np.exp(-0.5 * z * z))


def std_normal_cdf(z):
    z = np.asarray(z, dtype=float)
    if np.any(np.isnan(z)):
        raise DomainError("std_normal_cdf is undefined at NaN")
    return _scalar_or_array(sc.ndtr(z))


# Gauss-Legendre rules used by Genz's BVNU, mapped to [0, 2] (nodes 1 -+ x).
def _gl_rule(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 1.0 + x, w


_GL6 = _gl_rule(6)
_GL12 = _gl_rule(12)
_GL20 = _gl_rule(20)


def _bvnu_moderate(h, k, r, rule):
    """Upper orthant P(X > h, Y > k) for |r| < 0.925 (Drezner-Wesolowsky via asin substitution)."""
    x, w = rule
    hk = h * k
    hs = 0.5 * (h * h + k * k)
    asr = 0.5 * np.arcsin(r)
    sn = np.sin(asr[:, None] * x[None, :])
    integrand = np.exp((sn * hk[:, None] - hs[:, None]) / (1.0 - sn * sn))
    return integrand @ w * asr / _TWO_PI + sc.ndtr(-h) * sc.ndtr(-k)


def _bvnu_high(h, k, r):
    """Upper orthant for 0.925 <= |r| < 1, Genz's asymptotic-expansion branch."""
    x, w = _GL20
    neg = r < 0
    k = np.where(neg, -k, k)
    hk = h * k
    as_ = 1.0 - r * r
    a = np.sqrt(as_)
    bs = (h - k) ** 2
    asr = -0.5 * (bs / as_ + hk)
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 80.0

    bvn = np.where(
        asr > -100.0,
        a * np.exp(np.maximum(asr, -100.0)) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_),
        0.0,
    )
    b = np.sqrt(bs)
    sp = math.sqrt(_TWO_PI) * sc.ndtr(-b / a)
    tail = np.exp(-0.5 * np.maximum(hk, -100.0)) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
    bvn = np.where(hk > -100.0, bvn - tail, bvn)

    a2 = 0.5 * a
    xs = (a2[:, None] * x[None, :]) ** 2
    asr_x = -0.5 * (bs[:, None] / xs + hk[:, None])
    ok = asr_x > -100.0
    spx = 1.0 + c[:, None] * xs * (1.0 + 5.0 * d[:, None] * xs)
    rs = np.sqrt(1.0 - xs)
    # May overflow only where asr_x <= -100, and those nodes are masked out below.
    with np.errstate(over="ignore"):
        ep = np.exp(-(hk[:, None] / 2.0) * xs / (1.0 + rs) ** 2) / rs
    terms = np.where(ok, np.exp(np.where(ok, asr_x, 0.0)) * (spx - ep), 0.0)
    bvn = (a2 * (terms @ w) - bvn) / _TWO_PI

    pos_part = bvn + sc.ndtr(-np.maximum(h, k))
    lower = np.where(h < 0, sc.ndtr(k) - sc.ndtr(h), sc.ndtr(-h) - sc.ndtr(-k))
    neg_part = np.where(h >= k, -bvn, lower - bvn)
    return np.where(neg, neg_part, pos_part)


def _bvnu(h, k, r):
    """Vectorised upper orthant probability; h, k finite 1-D arrays, |r| < 1."""
    out = np.empty_like(h)
    ar = np.abs(r)
    groups = (
        (ar < 0.3, _GL6),
        ((ar >= 0.3) & (ar < 0.75), _GL12),
        ((ar >= 0.75) & (ar < 0.925), _GL20),
    )
    for mask, rule in groups:
        if mask.any():
            out[mask] = _bvnu_moderate(h[mask], k[mask], r[mask], rule)
    high = ar >= 0.925
    if high.any():
        out[high] = _bvnu_high(h[high], k[high], r[high])
    return out


def bvn_cdf(h, k, rho):
    """P(Z1 <= h, Z2 <= k) for a standard bivariate normal with correlation ``rho``.

    Genz's BVNU algorithm (Drezner-Wesolowsky Gauss-Legendre integration with a
    separate expansion for |rho| >= 0.925). Correlations within 1e-12 of +-1 use
    the degenerate limits Phi(min(h, k)) and (Phi(h) - Phi(-k))_+.
    """
    h, k, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (h, k, rho)))
    if np.any(np.isnan(h)) or np.any(np.isnan(k)) or np.any(np.isnan(rho)):
        raise DomainError("bvn_cdf is undefined at NaN")
    if np.any(np.abs(rho) > 1.0 + 1e-12):
        raise DomainError("correlation must lie in [-1, 1]")
    shape = h.shape
    h, k, rho = h.ravel(), k.ravel(), np.clip(rho.ravel(), -1.0, 1.0)
    out = np.empty(h.shape)

    fin = np.isfinite(h) & np.isfinite(k)
    # Infinite limits reduce to a marginal (or 0/1).
    inf = ~fin
    if inf.any():
        hi, ki = h[inf], k[inf]
        out[inf] = np.where((hi == -np.inf) | (ki == -np.inf), 0.0, sc.ndtr(np.minimum(hi, ki)))

    plus = fin & (rho >= RHO_CLAMP)
    out[plus] = sc.ndtr(np.minimum(h[plus], k[plus]))
    minus = fin & (rho <= -RHO_CLAMP)
    out[minus] = np.maximum(0.0, sc.ndtr(h[minus]) - sc.ndtr(-k[minus]))

    gen = fin & ~plus & ~minus
    if gen.any():
        out[gen] = _bvnu(-h[gen], -k[gen], rho[gen])
    out = np.clip(out, 0.0, 1.0).reshape(shape)
    return _scalar_or_array(out)


def _check_matern_args(h, nu):
    h = np.asarray(h, dtype=float)
    if not nu > 0:
        raise DomainError("Matern smoothness must be positive")
    if np.any(np.isnan(h)) or np.any(h < 0):
        raise DomainError("Matern correlation requires h >= 0")
    return h


def _is_half_integer(nu):
    return abs(nu - 0.5 - round(nu - 0.5)) < 1e-12 and nu >= 0.5


def matern_half_integer(h, nu):
    """Closed form for nu = p + 1/2: exp(-z) times a degree-p polynomial in z = 2 sqrt(nu) h."""
    h = _check_matern_args(h, nu)
    if not _is_half_integer(nu):
        raise DomainError(f"nu={nu} is not a half-integer")
    p = int(round(nu - 0.5))
    z = 2.0 * math.sqrt(nu) * h
    # r(z) = exp(-z) p!/(2p)! sum_i (p+i)!/(i!(p-i)!) (2z)^(p-i)
    coefs = [
        math.factorial(p) * math.factorial(p + i) / (math.factorial(2 * p) * math.factorial(i) * math.factorial(p - i))
        for i in range(p + 1)
    ]
    poly = np.zeros_like(z)
    for i, c in enumerate(coefs):
        poly = poly + c * (2.0 * z) ** (p - i)
    return _scalar_or_array(np.exp(-z) * poly)


def matern_bessel(h, nu):
    """General-nu evaluation through the modified Bessel function K_nu."""
    h = _check_matern_args(h, nu)
    z = 2.0 * math.sqrt(nu) * h
    out = np.ones_like(z)
    pos = z > 0
    zp = z[pos]
    out[pos] = np.exp(
        nu * np.log(zp) + np.log(sc.kv(nu, zp)) - (nu - 1.0) * math.log(2.0) - sc.gammaln(nu)
    )
    out[pos & ~np.isfinite(out)] = 0.0
    return _scalar_or_array(out)


def matern_correlation(h, nu):
    """Matern correlation r_nu(h) = (2 sqrt(nu) h)^nu K_nu(2 sqrt(nu) h) / (2^(nu-1) Gamma(nu))."""
    if _is_half_integer(nu):
        return matern_half_integer(h, nu)
    return matern_bessel(h, nu)
