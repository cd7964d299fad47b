"""SE-optimal designs checked against a short GAMP pilot at the actual size.

State evolution describes the large-system limit.  For modulo quantizers its
optimum sits right next to a collapse (for slightly smaller steps GAMP never
leaves the prior), and at ``n = 100`` that collapse sets in at noticeably
larger steps, where a sizeable fraction of instances fail.  The pilot runs a
few GAMP trials on instances that are never reused by the experiment, and walks
down the SE ranking until an upper quantile of the measured error agrees with
the prediction, so a candidate that fails on many instances is rejected.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..channels import OutputChannel, Prior
from ..gamp import GampConfig, GampDivergenceError, gamp_run
from ..qdesign import MODULO_FAMILY, DesignError, DesignObjective, default_bracket, family_member, optimize_family
from ..state_evolution import SeConfig
from .instances import generate_instance, measurement_source, trial_rng

logger = logging.getLogger(__name__)

# Pilot trials use indices far above any experiment trial index.
PILOT_OFFSET = 1 << 40
GRID_POINTS = 25
PILOT_QUANTILE = 0.8


@dataclass
class PilotDesign:
    family: str
    levels: int
    param: float
    predicted_mse_db: float
    pilot_quantile_db: float
    se_optimal_param: float
    rejected: list[tuple[float, float, float]]

    @property
    def quantizer(self):
        return family_member(self.family, self.levels, self.param)


def pilot_error_db(
    quantizer, n, m, prior, sigma2, gamp: GampConfig, seed: int, trials: int, q: float = PILOT_QUANTILE
) -> float:
    """``q``-quantile of the per-trial squared error over pilot instances, in dB."""
    src = measurement_source(n, m, prior, sigma2)
    ch = OutputChannel(quantizer, sigma2, src)
    errs = []
    for t in range(trials):
        inst = generate_instance(n, m, prior, quantizer, sigma2, trial_rng(seed, m, PILOT_OFFSET + t))
        try:
            x_hat = gamp_run(inst.A, inst.y, ch, prior, gamp).x_hat
            errs.append(float(np.mean((x_hat - inst.x) ** 2)))
        except GampDivergenceError:
            errs.append(math.inf)
    v = float(np.quantile(errs, q, method="higher"))
    return 10 * math.log10(v) if v > 0 else -math.inf


def pilot_design(
    family: str,
    levels: int,
    n: int,
    m: int,
    prior: Prior,
    sigma2: float,
    gamp: GampConfig,
    seed: int,
    se: SeConfig = SeConfig(),
    trials: int = 20,
    tol_db: float = 2.0,
    max_pilots: int = 25,
) -> PilotDesign:
    """SE-optimize ``family``, then keep the best candidate the pilot confirms.

    Candidates are the SE optimum and the points of the coarse search grid,
    ranked by predicted MSE.  A candidate passes when the pilot quantile is at most
    ``tol_db`` above its prediction.  For the modulo family a failure also
    rules out every smaller step.
    """
    objective = DesignObjective(n / m, sigma2, prior, se)
    d = optimize_family(family, levels, objective, grid_points=GRID_POINTS)
    values = dict(d.evaluations)
    lo, hi = default_bracket(family, objective)
    grid = [float(p) for p in np.geomspace(lo, hi, GRID_POINTS)]
    ranked = sorted({(values[p], p) for p in [d.param, *grid] if math.isfinite(values[p]) and values[p] > 0})
    rejected = []
    floor = 0.0
    for value, param in ranked:
        if len(rejected) >= max_pilots:
            break
        if family == MODULO_FAMILY and param <= floor:
            continue
        pred = 10 * math.log10(value)
        val = pilot_error_db(family_member(family, levels, param), n, m, prior, sigma2, gamp, seed, trials)
        if val <= pred + tol_db:
            return PilotDesign(family, levels, param, pred, val, d.param, rejected)
        logger.info("pilot rejects %s-%d at %g: predicted %.2f dB, measured %.2f dB", family, levels, param, pred, val)
        rejected.append((param, pred, val))
        if family == MODULO_FAMILY:
            floor = max(floor, param)
    raise DesignError(f"no {family}-{levels} candidate passed the pilot check")
