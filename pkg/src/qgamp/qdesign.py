"""Quantizer design.

* :func:`lloyd` -- the classical Lloyd iteration for a Gaussian source,
  minimizing the MSE between quantizer input and output.
* :func:`optimize_family` -- picks the single free parameter of a uniform
  family (loading half-width of a regular quantizer, cell width of a modulo
  quantizer) to minimize the state-evolution fixed point, i.e. the predicted
  reconstruction MSE after GAMP.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import Prior
from .quantizer import GaussianSource, ScalarQuantizer, measurement_distortion
from .state_evolution import SeConfig, SeProblem, se_run
from .truncnorm import interval_moments

logger = logging.getLogger(__name__)

REGULAR_FAMILY = "regular"
MODULO_FAMILY = "modulo"
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DesignError(RuntimeError):
    pass


# -- Lloyd --------------------------------------------------------------------


@dataclass
class LloydResult:
    quantizer: ScalarQuantizer
    distortions: list[float]
    converged: bool
    iterations: int

    @property
    def distortion(self) -> float:
        return self.distortions[-1]


def lloyd(
    n_levels: int,
    src: GaussianSource = GaussianSource(),
    init=None,
    tol: float = 1e-10,
    max_iters: int = 10_000,
) -> LloydResult:
    """Lloyd's algorithm for a Gaussian source.

    Alternates nearest-neighbour thresholds (midpoints of adjacent levels)
    and centroid levels (conditional means of the cells) until no level
    moves by more than ``tol``.  Starts from ``n_levels`` evenly spaced
    levels over ``mean +/- 3 std`` unless ``init`` is given.
    """
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    if init is None:
        if n_levels == 1:
            levels = np.array([src.mean])
        else:
            levels = np.linspace(src.mean - 3 * src.std, src.mean + 3 * src.std, n_levels)
    else:
        levels = np.asarray(init, dtype=float)
        if levels.shape != (n_levels,) or np.any(np.diff(levels) <= 0):
            raise ValueError("init must hold n_levels strictly increasing values")

    distortions = []
    converged = False
    it = 0
    while it < max_iters:
        it += 1
        thresholds = 0.5 * (levels[1:] + levels[:-1])
        lo = np.concatenate(([-np.inf], thresholds))
        hi = np.concatenate((thresholds, [np.inf]))
        log_mass, centroid, _ = interval_moments(lo, hi, src.mean, src.variance)
        new = np.where(np.isfinite(log_mass), centroid, levels)
        distortions.append(measurement_distortion(ScalarQuantizer.regular(thresholds, new), src))
        moved = float(np.max(np.abs(new - levels)))
        levels = new
        if moved < tol:
            converged = True
            break
    if not converged:
        logger.warning("Lloyd stopped after %d iterations without converging", it)
    q = ScalarQuantizer.regular(0.5 * (levels[1:] + levels[:-1]), levels)
    return LloydResult(q, distortions, converged, it)


# -- SE-driven design ---------------------------------------------------------


@dataclass(frozen=True)
class DesignObjective:
    """Predicted reconstruction MSE of a quantizer, read off state evolution."""

    beta: float
    sigma2: float
    prior: Prior
    se_config: SeConfig = SeConfig()

    @property
    def z_std(self) -> float:
        return math.sqrt(self.beta * self.prior.tau_init + self.sigma2)

    def problem(self, q: ScalarQuantizer) -> SeProblem:
        return SeProblem(self.beta, self.sigma2, self.prior, q)

    def __call__(self, q: ScalarQuantizer) -> float:
        return se_run(self.problem(q), self.se_config).fixed_point


def family_member(family: str, levels: int, param: float) -> ScalarQuantizer:
    if family == REGULAR_FAMILY:
        return ScalarQuantizer.uniform(levels, param)
    if family == MODULO_FAMILY:
        return ScalarQuantizer.modulo(param, levels)
    raise ValueError(f"unknown family {family!r}")


def default_bracket(family: str, objective: DesignObjective) -> tuple[float, float]:
    s = objective.z_std
    if family == REGULAR_FAMILY:
        return 0.25 * s, 6.0 * s
    return 0.02 * s, 4.0 * s


@dataclass
class DesignResult:
    family: str
    levels: int
    param: float
    quantizer: ScalarQuantizer
    predicted_mse: float
    evaluations: list[tuple[float, float]] = field(default_factory=list)

    @property
    def predicted_mse_db(self) -> float:
        return 10.0 * math.log10(self.predicted_mse)


def optimize_family(
    family: str,
    levels: int,
    objective: DesignObjective,
    bracket: tuple[float, float] | None = None,
    grid_points: int = 25,
    rel_tol: float = 1e-4,
) -> DesignResult:
    """Minimize the SE fixed point over the family's scalar parameter.

    A log-spaced grid over ``bracket`` locates the best basin, then a
    golden-section search on the log parameter refines it between the
    neighbouring grid points to relative tolerance ``rel_tol``.
    """
    lo, hi = bracket if bracket is not None else default_bracket(family, objective)
    if not 0 < lo <= hi:
        raise ValueError("bracket must be positive and ordered")
    cache: dict[float, float] = {}

    def f(param: float) -> float:
        if param not in cache:
            try:
                val = objective(family_member(family, levels, param))
            except (ValueError, FloatingPointError) as exc:
                logger.warning("design objective failed at %g: %s", param, exc)
                val = math.inf
            cache[param] = val if math.isfinite(val) else math.inf
        return cache[param]

    grid = np.geomspace(lo, hi, grid_points) if hi > lo else np.array([lo])
    values = np.array([f(float(p)) for p in grid])
    if not np.isfinite(values).any():
        raise DesignError(f"objective non-finite on the whole {family} grid")
    i = int(np.argmin(values))
    if len(grid) > 1:
        a = math.log(grid[max(i - 1, 0)])
        b = math.log(grid[min(i + 1, len(grid) - 1)])
        _golden_section(lambda s: f(math.exp(s)), a, b, rel_tol)

    best = min(cache, key=lambda p: (cache[p], p))
    return DesignResult(
        family,
        levels,
        best,
        family_member(family, levels, best),
        cache[best],
        sorted(cache.items()),
    )


def _golden_section(g, a: float, b: float, tol: float) -> None:
    # Works on the log parameter, so an interval width of tol is a relative tolerance.
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc <= gd:
            b, d, gd = d, c, gc
            c = b - _GOLDEN * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _GOLDEN * (b - a)
            gd = g(d)
