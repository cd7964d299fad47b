"""Scalar estimation functions used by GAMP and state evolution.

Input side: i.i.d. priors and their posterior mean/variance for the scalar
observation ``q = x + v`` with ``v ~ N(0, nu)``.

Output side: the quantizer channel ``y = Q(z + w)`` with ``w ~ N(0, sigma2)``
and the conditional moments of ``z ~ N(z_hat, nu)`` given the label ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .quantizer import CellSet, CellTable, GaussianSource, ScalarQuantizer
from .truncnorm import LOG_MASS_FLOOR, GaussianMoments, cell_moments, interval_moments

TAU_MIN = 1e-12


# -- priors -------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianPrior:
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("prior variance must be positive")

    @property
    def x_init(self) -> float:
        return self.mean

    @property
    def tau_init(self) -> float:
        return self.variance

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.mean + math.sqrt(self.variance) * rng.standard_normal(n)

    def denoise(self, q, nu):
        q = np.asarray(q, dtype=float)
        nu = np.asarray(nu, dtype=float)
        v = self.variance
        f = (v * q + nu * self.mean) / (v + nu)
        e = v * nu / (v + nu)
        return f, np.broadcast_to(e, f.shape).copy()

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class GaussBernoulliPrior:
    """``x = 0`` with probability ``1 - rho``, else ``x ~ N(0, on_variance)``."""

    rho: float
    on_variance: float

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if not self.on_variance > 0:
            raise ValueError("on_variance must be positive")

    @classmethod
    def unit_power(cls, rho: float) -> GaussBernoulliPrior:
        """Sparse prior with unit marginal variance (active variance ``1/rho``)."""
        return cls(rho, 1.0 / rho)

    @property
    def x_init(self) -> float:
        return 0.0

    @property
    def tau_init(self) -> float:
        return self.rho * self.on_variance

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        active = rng.random(n) < self.rho
        return np.where(active, math.sqrt(self.on_variance) * rng.standard_normal(n), 0.0)

    def active_probability(self, q, nu):
        q = np.asarray(q, dtype=float)
        nu = np.asarray(nu, dtype=float)
        v = self.on_variance
        # log N(q; 0, v + nu) - log N(q; 0, nu), kept in the log domain
        llr = 0.5 * (np.log(nu) - np.log(v + nu)) + 0.5 * q * q * v / (nu * (v + nu))
        with np.errstate(divide="ignore"):
            prior_lo = math.log(self.rho) - (math.log1p(-self.rho) if self.rho < 1 else -math.inf)
        return expit(llr + prior_lo)

    def denoise(self, q, nu):
        q = np.asarray(q, dtype=float)
        nu = np.asarray(nu, dtype=float)
        v = self.on_variance
        pi = self.active_probability(q, nu)
        m1 = v * q / (v + nu)
        v1 = v * nu / (v + nu)
        f = pi * m1
        e = pi * v1 + pi * (1.0 - pi) * m1 * m1
        return f, e

    def to_dict(self) -> dict:
        return {"kind": "gauss-bernoulli", "rho": self.rho, "on_variance": self.on_variance}


Prior = GaussianPrior | GaussBernoulliPrior


def prior_from_dict(data: dict) -> Prior:
    data = dict(data)
    kind = data.pop("kind", "gaussian")
    if kind == "gaussian":
        unknown = set(data) - {"mean", "variance"}
        cls = GaussianPrior
    elif kind == "gauss-bernoulli":
        if "on_variance" not in data and "rho" in data:
            data["on_variance"] = 1.0 / data["rho"]
        unknown = set(data) - {"rho", "on_variance"}
        cls = GaussBernoulliPrior
    else:
        raise ValueError(f"unknown prior kind {kind!r}")
    if unknown:
        raise ValueError(f"unknown prior keys: {sorted(unknown)}")
    return cls(**data)


def prior_denoise(p: Prior, q, nu):
    """Posterior mean and variance ``(F_in, E_in)`` of ``x`` given ``q = x + N(0, nu)``."""
    return p.denoise(q, nu)


# -- truncated Gaussian moments on a cell set ---------------------------------


def trunc_gauss_moments(cells: CellSet, mean: float, variance: float) -> GaussianMoments:
    """Mass and conditional moments of ``N(mean, variance)`` on ``cells``."""
    if not variance > 0:
        raise ValueError("variance must be positive")
    lo, hi = cells.bounds()
    log_mass, m, v = cell_moments(lo, hi, mean, variance)
    return GaussianMoments(float(np.exp(log_mass)), float(m), float(v))


# -- output channel -----------------------------------------------------------


class OutputMoments(NamedTuple):
    mean: np.ndarray
    variance: np.ndarray
    degenerate: np.ndarray


@dataclass(frozen=True)
class OutputChannel:
    """Quantized Gaussian-noise channel ``y = Q(z + w)``, ``w ~ N(0, noise_variance)``.

    ``context`` is the Gaussian window used to enumerate cells of a modulo
    quantizer; it is ignored for quantizers with finitely many cells.
    """

    quantizer: ScalarQuantizer
    noise_variance: float = 0.0
    context: GaussianSource | None = field(default=None)

    def __post_init__(self):
        if not self.noise_variance >= 0:
            raise ValueError("noise variance must be non-negative")

    @cached_property
    def table(self) -> CellTable:
        return self.quantizer.cell_table(self.context)

    def cells(self, y) -> tuple[np.ndarray, np.ndarray]:
        y = np.asarray(y)
        self.quantizer._check_labels(y)
        return self.table.lo[y - 1], self.table.hi[y - 1]

    def quantizer_input_moments(self, y, z_hat, nu_total, tau_min=TAU_MIN) -> OutputMoments:
        """Moments of ``s ~ N(z_hat, nu_total)`` conditioned on ``Q(s) = y``.

        Cells with mass below the underflow floor fall back to the cell
        endpoint nearest ``z_hat`` with variance ``tau_min * nu_total``.
        """
        lo, hi = self.cells(y)
        z_hat = np.asarray(z_hat, dtype=float)
        nu_total = np.asarray(nu_total, dtype=float)
        log_mass, m, v = cell_moments(lo, hi, z_hat, nu_total)
        bad = ~(log_mass >= LOG_MASS_FLOOR)
        if bad.any():
            edge = _nearest_endpoint(lo, hi, z_hat)
            m = np.where(bad, edge, m)
            v = np.where(bad, tau_min * nu_total, v)
        return OutputMoments(m, v, bad)

    def likelihood(self, y, z):
        """``p(y | z)``; an indicator of ``z`` in the cell when noise-free."""
        lo, hi = self.cells(y)
        z = np.asarray(z, dtype=float)[..., None]
        if self.noise_variance == 0:
            inside = (lo <= z) & (z < hi)
            return inside.any(axis=-1).astype(float)
        log_z, _, _ = interval_moments(lo, hi, z, self.noise_variance)
        return np.exp(log_z).sum(axis=-1)


def _nearest_endpoint(lo, hi, z_hat):
    ends = np.concatenate((lo, hi), axis=-1)
    with np.errstate(invalid="ignore"):
        dist = np.abs(ends - np.asarray(z_hat)[..., None])
    dist = np.where(np.isfinite(dist), dist, np.inf)
    idx = np.argmin(dist, axis=-1)
    return np.take_along_axis(ends, idx[..., None], axis=-1)[..., 0]


def output_moments(ch: OutputChannel, y, z_hat, nu) -> OutputMoments:
    """Conditional mean and variance ``(F_out, E_out)`` of ``z ~ N(z_hat, nu)`` given ``y``.

    With channel noise the quantizer sees ``s = z + w``; ``s`` is conditioned
    on its cell and the result is mapped back to ``z`` through the jointly
    Gaussian pair ``(z, s)``.
    """
    nu = np.asarray(nu, dtype=float)
    total = nu + ch.noise_variance
    ms, vs, bad = ch.quantizer_input_moments(y, z_hat, total)
    if ch.noise_variance == 0:
        return OutputMoments(ms, vs, bad)
    gain = nu / total
    z_hat = np.asarray(z_hat, dtype=float)
    mean = z_hat + gain * (ms - z_hat)
    var = nu * ch.noise_variance / total + gain * gain * vs
    return OutputMoments(mean, var, bad)


def d1_d2(ch: OutputChannel, y, z_hat, nu_total, tau_min: float = TAU_MIN, clamp: bool = True):
    """Output-side GAMP updates ``(u, tau)`` at total variance ``nu_total``.

    ``nu_total`` is the plug-in variance of ``z`` plus the channel noise
    variance, i.e. the variance of the quantizer input given ``z_hat``.
    ``tau`` is clamped to ``[tau_min, 1 / nu_total]`` unless ``clamp`` is off.

    Returns ``(u, tau, degenerate)``.
    """
    nu_total = np.asarray(nu_total, dtype=float)
    ms, vs, bad = ch.quantizer_input_moments(y, z_hat, nu_total, tau_min)
    u = (ms - np.asarray(z_hat, dtype=float)) / nu_total
    tau = (1.0 - vs / nu_total) / nu_total
    if clamp:
        tau = np.clip(tau, tau_min, 1.0 / nu_total)
    return u, tau, bad


def channel_likelihood(ch: OutputChannel, y, z):
    return ch.likelihood(y, z)
