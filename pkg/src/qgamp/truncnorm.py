"""Moments of a Gaussian restricted to a union of intervals.

All routines are vectorised.  Interval masses are carried in the log domain
so that cells lying many standard deviations into a tail never underflow to a
difference of two numbers close to one.

Two evaluation paths are used for a single interval ``[a, b)`` of the
standard normal:

* narrow intervals (``b - a <= 1`` and ``|midpoint| * width <= 20``) are
  integrated with Gauss-Legendre quadrature on the centred variable, which
  avoids the cancellation ``E[t^2] - E[t]^2`` when the conditional variance
  is tiny compared with the squared mean;
* everything else uses closed forms built from the scaled complementary
  error function (Mills ratio), reflected so the bulk lies in ``t >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, log_ndtr, ndtr

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_SQRT_HALF_PI = np.sqrt(0.5 * np.pi)
_NARROW_WIDTH = 1.0
_NARROW_SPREAD = 20.0
# Gauss-Legendre rules for the narrow path, picked by the spread |centre| * half-width
# (at most 10 there).  The rule error scales like spread**(2n) / (2n)!, so 16 nodes
# are plenty up to 4 and 32 nodes up to 10.
_GL_TIERS = ((4.0, np.polynomial.legendre.leggauss(16)), (np.inf, np.polynomial.legendre.leggauss(32)))

# Cell masses below this are treated as numerically empty by callers.
MASS_FLOOR = 1e-300
LOG_MASS_FLOOR = float(np.log(MASS_FLOOR))


@dataclass(frozen=True)
class GaussianMoments:
    """Mass, conditional mean and conditional variance of a truncated Gaussian."""

    mass: float
    mean: float
    variance: float

    @property
    def degenerate(self) -> bool:
        return not self.mass > MASS_FLOOR


def _mills(x):
    # R(x) = Q(x) / phi(x); finite for x >= 0, 0 at +inf.
    return _SQRT_HALF_PI * erfcx(x / np.sqrt(2.0))


def _narrow(a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    spread = np.abs(c) * h
    out = [np.empty(c.shape) for _ in range(3)]
    lower = -np.inf
    for upper, rule in _GL_TIERS:
        sel = (spread > lower) & (spread <= upper) if np.isfinite(lower) else spread <= upper
        if sel.any():
            for dst, val in zip(out, _narrow_rule(c[sel], h[sel], *rule)):
                dst[sel] = val
        lower = upper
    return tuple(out)


def _narrow_rule(c, h, nodes, weights):
    u = h[..., None] * nodes
    expo = -c[..., None] * u - 0.5 * u * u
    shift = expo.max(axis=-1, keepdims=True)
    f = weights * np.exp(expo - shift)
    s0 = f.sum(axis=-1)
    mu = (f * u).sum(axis=-1) / s0
    d = u - mu[..., None]
    var = (f * d * d).sum(axis=-1) / s0
    log_z = -0.5 * c * c - _LOG_SQRT_2PI + np.log(s0 * h) + shift[..., 0]
    return log_z, c + mu, var


def _right_tail(a, b):
    # Requires a >= 0 and b > a (b may be +inf).
    b_inf = np.isposinf(b)
    bf = np.where(b_inf, a + 1.0, b)
    delta = np.where(b_inf, np.inf, 0.5 * (bf - a) * (bf + a))
    ed = np.exp(-delta)
    d = _mills(a) - np.where(b_inf, 0.0, ed * _mills(bf))
    log_z = -0.5 * a * a - _LOG_SQRT_2PI + np.log(d)
    mean = -np.expm1(-delta) / d
    second = 1.0 + (a - np.where(b_inf, 0.0, bf * ed)) / d
    return log_z, mean, second - mean * mean


def _straddle(a, b):
    # Requires a < 0 < b, either may be infinite.
    z = ndtr(b) - ndtr(a)
    pa = np.exp(-0.5 * a * a) / np.sqrt(2.0 * np.pi)
    pb = np.exp(-0.5 * b * b) / np.sqrt(2.0 * np.pi)
    with np.errstate(invalid="ignore"):
        apa = np.where(np.isinf(a), 0.0, a * pa)
        bpb = np.where(np.isinf(b), 0.0, b * pb)
    mean = (pa - pb) / z
    second = 1.0 + (apa - bpb) / z
    return np.log(z), mean, second - mean * mean


def standard_interval_moments(a, b):
    """Log-mass, mean and variance of ``t ~ N(0, 1)`` given ``a <= t < b``.

    Empty intervals (``a >= b`` or NaN bounds) give ``-inf`` log-mass with
    zero mean and variance.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    log_z = np.full(a.shape, -np.inf)
    mean = np.zeros(a.shape)
    var = np.zeros(a.shape)

    valid = b > a
    full = valid & np.isneginf(a) & np.isposinf(b)
    with np.errstate(invalid="ignore"):
        width = b - a
        centre = 0.5 * (a + b)
        narrow = valid & (width <= _NARROW_WIDTH) & (np.abs(centre) * width <= _NARROW_SPREAD)
    rest = valid & ~narrow & ~full

    if narrow.any():
        log_z[narrow], mean[narrow], var[narrow] = _narrow(a[narrow], b[narrow])

    if rest.any():
        ar, br = a[rest], b[rest]
        flip = (ar + br) < 0
        aa = np.where(flip, -br, ar)
        bb = np.where(flip, -ar, br)
        lz = np.empty(aa.shape)
        mu = np.empty(aa.shape)
        vv = np.empty(aa.shape)
        tail = aa >= 0
        if tail.any():
            lz[tail], mu[tail], vv[tail] = _right_tail(aa[tail], bb[tail])
        mid = ~tail
        if mid.any():
            lz[mid], mu[mid], vv[mid] = _straddle(aa[mid], bb[mid])
        log_z[rest] = lz
        mean[rest] = np.where(flip, -mu, mu)
        var[rest] = vv

    log_z[full] = 0.0
    mean[full] = 0.0
    var[full] = 1.0
    np.maximum(var, 0.0, out=var)
    return log_z, mean, var


def interval_moments(lo, hi, mean, variance):
    """Per-interval moments of ``N(mean, variance)`` restricted to ``[lo, hi)``.

    Returns ``(log_mass, cond_mean, cond_var)`` broadcast over the inputs.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.asarray(variance, dtype=float))
    with np.errstate(invalid="ignore"):
        a = (np.asarray(lo, dtype=float) - mean) / sd
        b = (np.asarray(hi, dtype=float) - mean) / sd
    log_z, m, v = standard_interval_moments(a, b)
    return log_z, mean + sd * m, sd * sd * v


def cell_moments(lo, hi, mean, variance):
    """Moments of ``N(mean, variance)`` restricted to a union of intervals.

    ``lo`` and ``hi`` have shape ``(..., k)``; the last axis lists the
    intervals of one cell, padded with empty intervals (``nan`` bounds).
    ``mean`` and ``variance`` broadcast against ``(...)``.  Interval moments
    are merged with the laws of total mean and variance.

    Returns
    -------
    log_mass, cond_mean, cond_var : ndarray
        Shape ``(...)``.  Where the union has no mass at all, ``log_mass`` is
        ``-inf`` and the moments are ``nan``.
    """
    mean = np.asarray(mean, dtype=float)[..., None]
    variance = np.asarray(variance, dtype=float)[..., None]
    log_z, m, v = interval_moments(lo, hi, mean, variance)
    top = log_z.max(axis=-1)
    finite = np.isfinite(top)
    safe_top = np.where(finite, top, 0.0)
    w = np.exp(log_z - safe_top[..., None])
    total = w.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cm = (w * m).sum(axis=-1) / total
        dev = m - cm[..., None]
        cv = (w * (v + dev * dev)).sum(axis=-1) / total
        log_mass = np.where(finite, safe_top + np.log(total), -np.inf)
    cm = np.where(finite, cm, np.nan)
    cv = np.where(finite, cv, np.nan)
    return log_mass, cm, cv


def log_interval_mass(lo, hi, mean, variance):
    """Log of ``P(lo <= t < hi)`` for ``t ~ N(mean, variance)`` (no moments)."""
    sd = np.sqrt(np.asarray(variance, dtype=float))
    a = (np.asarray(lo, dtype=float) - mean) / sd
    b = (np.asarray(hi, dtype=float) - mean) / sd
    a, b = np.broadcast_arrays(a, b)
    flip = (a + b) < 0
    aa = np.where(flip, -b, a)
    bb = np.where(flip, -a, b)
    # P = Q(aa) - Q(bb) with aa <= bb and aa + bb >= 0
    la = log_ndtr(-aa)
    lb = log_ndtr(-bb)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = la + np.log1p(-np.exp(lb - la))
    return np.where(bb > aa, out, -np.inf)
