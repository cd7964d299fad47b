"""Reference estimators: linear MMSE and a brute-force grid posterior mean."""

from __future__ import annotations

import itertools
import math
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.special import ndtr

from ..channels import GaussBernoulliPrior, GaussianPrior, OutputChannel, Prior

JITTER = 1e-12


class OracleInfeasibleError(ValueError):
    """The observed labels have zero probability under the model."""


def _spd_solve(M, b):
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(M), b)
    except np.linalg.LinAlgError:
        M = M + JITTER * np.eye(M.shape[0])
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(M), b)


def lmmse_estimate(A, y_hat, noise_variance: float, prior: Prior) -> np.ndarray:
    """Linear MMSE estimate treating ``y_hat = A x + d`` with white ``d``.

    ``x_hat = mu + v A^T (v A A^T + s2 I)^-1 (y_hat - A mu)``, evaluated in
    the equivalent ``n x n`` form when ``m >= n`` so the noiseless
    overdetermined case reduces to the least-squares solution.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    mu = prior.x_init
    v = prior.tau_init
    r = np.asarray(y_hat, dtype=float) - A @ np.full(n, mu)
    if m >= n:
        M = v * (A.T @ A) + noise_variance * np.eye(n)
        return mu + _spd_solve(M, v * (A.T @ r))
    M = v * (A @ A.T) + noise_variance * np.eye(m)
    return mu + v * (A.T @ _spd_solve(M, r))


# -- grid posterior oracle ----------------------------------------------------


def _components(prior: Prior, n: int):
    """Support patterns ``(weight, active mask)`` and per-coordinate mean/var."""
    if isinstance(prior, GaussianPrior):
        return [(1.0, (True,) * n)], prior.mean, prior.variance
    if isinstance(prior, GaussBernoulliPrior):
        pats = []
        for mask in itertools.product((False, True), repeat=n):
            k = sum(mask)
            wt = prior.rho**k * (1 - prior.rho) ** (n - k)
            if wt > 0:
                pats.append((wt, mask))
        return pats, 0.0, prior.on_variance
    raise TypeError(f"unsupported prior {type(prior).__name__}")


def _allowed_last(lo, hi, c, a):
    """Set of ``t`` with ``c + a t`` in the cell ``[lo, hi)`` (padded rows).

    ``lo``, ``hi``: shape ``(k,)``; ``c``: shape ``(G,)``.  Returns padded
    bounds of shape ``(G, k)``.
    """
    if a == 0:
        inside = ((lo[None] <= c[:, None]) & (c[:, None] < hi[None])).any(axis=1)
        L = np.where(inside, -np.inf, np.nan)[:, None]
        H = np.where(inside, np.inf, np.nan)[:, None]
        return L, H
    t1 = (lo[None] - c[:, None]) / a
    t2 = (hi[None] - c[:, None]) / a
    return np.minimum(t1, t2), np.maximum(t1, t2)


def _intersect(L1, H1, L2, H2):
    lo = np.maximum(L1[:, :, None], L2[:, None, :]).reshape(len(L1), -1)
    hi = np.minimum(H1[:, :, None], H2[:, None, :]).reshape(len(L1), -1)
    with np.errstate(invalid="ignore"):
        empty = ~(hi > lo)
    lo[empty] = np.nan
    hi[empty] = np.nan
    keep = ~np.all(empty, axis=0)
    if not keep.any():
        keep[0] = True
    return lo[:, keep], hi[:, keep]


def _gauss_union(L, H, mean, var):
    """Mass, first and second moment of ``N(mean, var)`` over padded interval unions."""
    sd = math.sqrt(var)
    a = np.where(np.isnan(L), 0.0, (L - mean) / sd)
    b = np.where(np.isnan(H), 0.0, (H - mean) / sd)
    pa = np.exp(-0.5 * a * a) / math.sqrt(2 * math.pi)
    pb = np.exp(-0.5 * b * b) / math.sqrt(2 * math.pi)
    mass = (ndtr(b) - ndtr(a)).sum(axis=1)
    first = mean * mass + sd * (pa - pb).sum(axis=1)
    with np.errstate(invalid="ignore"):
        apa = np.where(np.isfinite(a), a * pa, 0.0)
        bpb = np.where(np.isfinite(b), b * pb, 0.0)
    second = 2 * mean * first - mean * mean * mass + var * (mass + (apa - bpb).sum(axis=1))
    return mass, first, second


class Posterior(NamedTuple):
    mean: np.ndarray
    second_moment: float  # E[||x||^2 | y]

    def risk(self, x_hat) -> float:
        """Posterior expected squared error ``E[||x - x_hat||^2 | y]``."""
        x_hat = np.asarray(x_hat, dtype=float)
        return float(self.second_moment - 2 * x_hat @ self.mean + x_hat @ x_hat)


def grid_posterior_oracle(
    A,
    y,
    prior: Prior,
    channel: OutputChannel,
    points: int = 2000,
    half_width: float = 6.0,
) -> np.ndarray:
    """Posterior mean of ``x`` (see :func:`grid_posterior`)."""
    return grid_posterior(A, y, prior, channel, points, half_width).mean


def grid_posterior(
    A,
    y,
    prior: Prior,
    channel: OutputChannel,
    points: int = 2000,
    half_width: float = 6.0,
) -> Posterior:
    """Posterior mean and second moment of ``x`` by direct numerical integration (``n <= 3``).

    The posterior ``p(x | y)`` is proportional to the product of the prior
    and the channel likelihoods.  All but one active coordinate are put on a
    midpoint grid of ``points`` cells over ``mean +/- half_width`` standard
    deviations.  For a noiseless channel the last coordinate is integrated
    exactly (its consistent set is a union of intervals); otherwise it is
    gridded too.  Sparse priors are handled by enumerating support patterns.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y)
    m, n = A.shape
    if n > 3:
        raise ValueError("grid oracle is limited to n <= 3")
    if points < 2:
        raise ValueError("points must be >= 2")
    if m == 0:
        mean0 = np.full(n, prior.x_init, dtype=float)
        return Posterior(mean0, float(n * prior.tau_init + mean0 @ mean0))

    patterns, mean, var = _components(prior, n)
    sd = math.sqrt(var)
    h = 2 * half_width * sd / points
    axis = mean - half_width * sd + h * (np.arange(points) + 0.5)
    dens = h * np.exp(-0.5 * ((axis - mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
    lo_tab, hi_tab = channel.table
    noiseless = channel.noise_variance == 0

    Z = 0.0
    M = np.zeros(n)
    S = 0.0
    for weight, mask in patterns:
        active = [j for j in range(n) if mask[j]]
        if not active:
            lik = np.prod(channel.likelihood(y, np.zeros(m)))
            Z += weight * lik
            continue
        outer = active[:-1] if noiseless else active
        if outer:
            idx = np.indices((points,) * len(outer)).reshape(len(outer), -1).T
            pts, pw = axis[idx], dens[idx].prod(axis=1)
            c = pts @ A[:, outer].T
        else:
            pts, pw, c = np.zeros((1, 0)), np.ones(1), np.zeros((1, m))
        if noiseless:
            last = active[-1]
            L = np.full((len(pts), 1), -np.inf)
            H = np.full((len(pts), 1), np.inf)
            for i in range(m):
                cl, ch = lo_tab[y[i] - 1], hi_tab[y[i] - 1]
                ok = ~np.isnan(cl)
                Li, Hi = _allowed_last(cl[ok], ch[ok], c[:, i], A[i, last])
                L, H = _intersect(L, H, Li, Hi)
            mass, first, second = _gauss_union(L, H, mean, var)
            mass = pw * mass
            Z += weight * mass.sum()
            for k, j in enumerate(outer):
                M[j] += weight * np.dot(mass, pts[:, k])
                S += weight * np.dot(mass, pts[:, k] ** 2)
            M[last] += weight * np.dot(pw, first)
            S += weight * np.dot(pw, second)
        else:
            lik = np.ones(len(pts))
            for i in range(m):
                lik = lik * channel.likelihood(np.full(len(pts), y[i]), c[:, i])
            mass = pw * lik
            Z += weight * mass.sum()
            for k, j in enumerate(outer):
                M[j] += weight * np.dot(mass, pts[:, k])
                S += weight * np.dot(mass, pts[:, k] ** 2)
    if not Z > 0:
        raise OracleInfeasibleError("observed labels have zero posterior mass")
    return Posterior(M / Z, S / Z)
