"""State evolution: scalar recursion predicting the per-component MSE of GAMP.

    tau_{t+1} = Ein_bar(1 / D2_bar(beta * tau_t, sigma2)),   tau_0 = prior variance

``Ein_bar(nu)`` averages the posterior variance of the scalar Gaussian
channel ``q = x + N(0, nu)`` over ``x ~ prior``.  ``D2_bar(nu, sigma2)``
averages the output-side curvature ``D2(y, z_hat, nu + sigma2)`` over the
jointly Gaussian pair ``(z, z_hat)`` with

    var(z) = beta * tau_init,   cov(z, z_hat) = var(z_hat) = beta * tau_init - nu,

which factorises as ``z = z_hat + e`` with ``e ~ N(0, nu)`` independent of
``z_hat``.  The label only depends on ``z_hat`` through ``N(z_hat, nu +
sigma2)``, so the sum over labels is done exactly and a single outer
integral over ``z_hat`` remains.

Both outer integrals have integrands whose features (cell edges, the
active/inactive transition of a sparse prior) are much narrower than the
Gaussian weight, so they are evaluated with composite Gauss-Legendre rules
refined around those features rather than with a single Gauss-Hermite rule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import TAU_MIN, GaussBernoulliPrior, GaussianPrior, OutputChannel, Prior
from .quantizer import WINDOW_RADIUS, GaussianSource, ScalarQuantizer
from .truncnorm import cell_moments

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SeProblem:
    beta: float
    sigma2: float
    prior: Prior
    quantizer: ScalarQuantizer

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be non-negative")

    @property
    def z_variance(self) -> float:
        """Variance of each noiseless measurement ``z_i``."""
        return self.beta * self.prior.tau_init

    def channel(self) -> OutputChannel:
        context = GaussianSource(0.0, self.z_variance + self.sigma2)
        return OutputChannel(self.quantizer, self.sigma2, context)


@dataclass(frozen=True)
class SeConfig:
    """Numerical settings.

    ``quad_nodes`` is the Gauss-Legendre order used on each panel of the
    composite rules.
    """

    quad_nodes: int = 12
    max_iters: int = 200
    fp_tol: float = 1e-10
    nu_floor: float = 1e-12
    panel_width: float = 0.5

    def __post_init__(self):
        if self.quad_nodes < 3:
            raise ValueError("quad_nodes must be >= 3")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class SeTrajectory:
    taus: list[float]
    converged: bool
    clamped: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def fixed_point(self) -> float:
        return self.taus[-1]

    def mse_db(self) -> float:
        return 10.0 * math.log10(self.fixed_point)


# -- composite quadrature -----------------------------------------------------


def _breakpoints(half_range: float, base: float, features) -> np.ndarray:
    """Panel edges on ``[-half_range, half_range]``.

    ``features`` is a sequence of ``(centre, width)``; around each centre
    edges are placed at ``centre +/- width * 2**j`` until the spacing
    reaches ``base``.
    """
    n_base = max(1, math.ceil(2 * half_range / base))
    pts = [np.linspace(-half_range, half_range, n_base + 1)]
    for centre, width in features:
        if not (width > 0 and abs(centre) < half_range + base):
            continue
        j_max = max(0, math.ceil(math.log2(base / width))) if width < base else 0
        offs = width * 2.0 ** np.arange(j_max + 1)
        pts.append(np.concatenate(([centre], centre - offs, centre + offs)))
    edges = np.concatenate(pts)
    edges = np.unique(np.clip(edges, -half_range, half_range))
    return edges[np.diff(edges, prepend=-np.inf) > 1e-14 * max(half_range, 1.0)]


def _gauss_rule(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Gauss-Legendre on the given panels."""
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo) + half * x).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def _normal_rule(sd: float, features, cfg: SeConfig):
    """Rule for ``E[f(X)]``, ``X ~ N(0, sd^2)``; features given in ``X`` units."""
    scaled = [(c / sd, w / sd) for c, w in features]
    edges = _breakpoints(WINDOW_RADIUS, cfg.panel_width, scaled)
    xi, w = _gauss_rule(edges, cfg.quad_nodes)
    w = w * np.exp(-0.5 * xi * xi) / math.sqrt(2 * math.pi)
    return sd * xi, w / w.sum()


# -- input side ---------------------------------------------------------------


def _prior_branches(prior: Prior):
    """``(weight, mean, variance)`` of the Gaussian components of the prior."""
    if isinstance(prior, GaussianPrior):
        return [(1.0, prior.mean, prior.variance)]
    if isinstance(prior, GaussBernoulliPrior):
        out = [(prior.rho, 0.0, prior.on_variance)]
        if prior.rho < 1:
            out.append((1.0 - prior.rho, 0.0, 0.0))
        return out
    raise TypeError(f"unsupported prior {type(prior).__name__}")


def _input_features(prior: Prior, nu: float):
    if not isinstance(prior, GaussBernoulliPrior) or prior.rho >= 1:
        return []
    v = prior.on_variance
    log_odds = math.log((1 - prior.rho) / prior.rho) + 0.5 * math.log((v + nu) / nu)
    q_star = math.sqrt(max(2 * nu * (v + nu) / v * log_odds, 0.0))
    width = nu * (v + nu) / (v * max(q_star, math.sqrt(nu)))
    return [(q_star, width), (-q_star, width), (0.0, math.sqrt(nu))]


def ein_bar(nu: float, prior: Prior, cfg: SeConfig = SeConfig()) -> float:
    """Average posterior variance ``E[E_in(x + v, nu)]``, ``x ~ prior``, ``v ~ N(0, nu)``."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    if math.isinf(nu):
        return prior.tau_init
    total = 0.0
    feats = _input_features(prior, nu)
    for weight, mean, var in _prior_branches(prior):
        sd = math.sqrt(var + nu)
        q, w = _normal_rule(sd, [(c - mean, wd) for c, wd in feats], cfg)
        _, e = prior.denoise(mean + q, nu)
        total += weight * float(np.dot(w, e))
    return total


# -- output side --------------------------------------------------------------


_FAR = 39.0


def _label_curvature(ch: OutputChannel, z_hat: np.ndarray, nu_total: float) -> np.ndarray:
    """``sum_y P(y | z_hat) * D2(y, z_hat, nu_total)`` for each ``z_hat``."""
    lo, hi = ch.table
    # Intervals this far out have exp(log_mass) == 0; skipping them saves the bulk of the work.
    sd = math.sqrt(nu_total)
    zc = z_hat[:, None, None]
    with np.errstate(invalid="ignore"):
        far = ((lo[None] - zc) > _FAR * sd) | ((zc - hi[None]) > _FAR * sd)
    lo = np.where(far, np.nan, lo[None])
    hi = np.where(far, np.nan, hi[None])
    log_mass, _, v = cell_moments(lo, hi, z_hat[:, None], nu_total)
    mass = np.exp(log_mass)
    d2 = np.clip((1.0 - v / nu_total) / nu_total, TAU_MIN, 1.0 / nu_total)
    d2 = np.where(mass > 0, d2, 0.0)
    return (mass * d2).sum(axis=1)


def d2_bar(nu: float, prob: SeProblem, cfg: SeConfig = SeConfig(), *, channel=None) -> float:
    """Average output curvature ``E[D2(y, z_hat, nu + sigma2)]``.

    Arguments with ``nu > beta * tau_init`` make ``var(z_hat)`` negative;
    they are clamped to ``beta * tau_init - nu_floor`` and logged.
    """
    d2, _ = _d2_bar(nu, prob, cfg, channel)
    return d2


def _d2_bar(nu, prob, cfg, channel):
    if not nu > 0:
        raise ValueError("nu must be positive")
    ch = channel if channel is not None else prob.channel()
    vz = prob.z_variance
    clamped = False
    if nu > vz:
        clamped = True
        logger.info("d2_bar: nu=%g exceeds beta*tau_init=%g, clamping", nu, vz)
        nu = vz - cfg.nu_floor
    var_zhat = vz - nu
    nu_total = nu + prob.sigma2
    if var_zhat <= cfg.nu_floor:
        return float(_label_curvature(ch, np.zeros(1), nu_total)[0]), clamped
    edges = prob.quantizer.boundaries(ch.context)
    width = math.sqrt(nu_total)
    z, w = _normal_rule(math.sqrt(var_zhat), [(b, width) for b in edges], cfg)
    return float(np.dot(w, _label_curvature(ch, z, nu_total))), clamped


def se_run(prob: SeProblem, cfg: SeConfig = SeConfig()) -> SeTrajectory:
    """Iterate the state-evolution recursion from the prior variance."""
    ch = prob.channel()
    tau_init = prob.prior.tau_init
    taus = [tau_init]
    clamped = 0
    converged = False
    for _ in range(cfg.max_iters):
        d2, hit = _d2_bar(prob.beta * taus[-1], prob, cfg, ch)
        clamped += hit
        nxt = ein_bar(1.0 / d2, prob.prior, cfg) if d2 > 0 else tau_init
        taus.append(nxt)
        if abs(nxt - taus[-2]) < cfg.fp_tol * tau_init:
            converged = True
            break
    notes = []
    if any(b > a + cfg.fp_tol * tau_init for a, b in zip(taus, taus[1:])):
        notes.append("trajectory not monotone")
    return SeTrajectory(taus, converged, clamped, notes)
