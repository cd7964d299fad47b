"""Canned desk-scale recipes for the four reconstruction experiments.

Each builder returns a list of :class:`ExperimentSpec`; :func:`run_specs`
concatenates their trial rows into one CSV (single header).  Estimator labels
carry the quantizer tag when several quantizers share a sweep, e.g.
``gamp/se-modulo-8``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ..channels import GaussBernoulliPrior, GaussianPrior, Prior
from ..qdesign import DesignObjective, optimize_family
from ..state_evolution import SeConfig
from .experiment import ExperimentResult, ExperimentSpec, run_experiment, trials_csv

FIG4_RATIOS = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
FIG5_LEVELS = (4, 8, 16)
FIG6_RATIOS = (0.4, 0.6, 0.8, 1.0)
FIG7_RATES = (1.0, 1.5, 2.0)
FIG7_LABELS = (2, 4, 8, 16)


def fig4(seed: int = 0, trials: int = 200) -> list[ExperimentSpec]:
    """Oversampled Gaussian source, 16-level uniform on +/-3 std; GAMP vs LMMSE."""
    return [
        ExperimentSpec(
            name="fig4",
            n=100,
            m_over_n=list(FIG4_RATIOS),
            quantizer={"family": "uniform", "levels": 16, "loading": 3.0},
            trials=trials,
            seed=seed,
            estimators=("gamp", "lmmse"),
        )
    ]


def fig5(seed: int = 0, trials: int = 100, levels=FIG5_LEVELS) -> list[ExperimentSpec]:
    """n=100, m=200: Lloyd vs SE-optimized regular vs SE-optimized modulo."""
    specs = []
    for k in levels:
        for fam, key in (("lloyd", "levels"), ("se-regular", "levels"), ("se-modulo", "labels")):
            specs.append(
                ExperimentSpec(
                    name="fig5",
                    n=100,
                    m_over_n=[2.0],
                    quantizer={"family": fam, key: k},
                    trials=trials,
                    seed=seed,
                    estimators=("gamp",),
                    tag=f"{fam}-{k}",
                )
            )
    return specs


def fig6(seed: int = 0, trials: int = 100) -> list[ExperimentSpec]:
    """Compressive regime: sparse source, adaptive 16-level uniform quantizer."""
    return [
        ExperimentSpec(
            name="fig6",
            n=1024,
            m_over_n=list(FIG6_RATIOS),
            prior=GaussBernoulliPrior.unit_power(1 / 32),
            quantizer={"family": "adaptive", "levels": 16},
            trials=trials,
            seed=seed,
            estimators=("gamp", "lmmse"),
        )
    ]


@dataclass(frozen=True)
class RatePoint:
    rate: float
    family: str
    labels: int
    m_over_n: float
    param: float
    predicted_mse_db: float


def best_ratio_for_rate(
    rate: float,
    family: str,
    prior: Prior,
    n: int,
    labels=FIG7_LABELS,
    sigma2: float = 0.0,
    se: SeConfig = SeConfig(),
) -> RatePoint:
    """Pick the label count (hence ``m/n = rate / log2 K``) with the best SE prediction."""
    best = None
    for k in labels:
        ratio = rate / math.log2(k)
        m = max(1, round(n * ratio))
        d = optimize_family(family, k, DesignObjective(n / m, sigma2, prior, se))
        cand = RatePoint(rate, family, k, m / n, d.param, d.predicted_mse_db)
        if best is None or cand.predicted_mse_db < best.predicted_mse_db:
            best = cand
    return best


def fig7(seed: int = 0, trials: int = 50, n: int = 256, rates=FIG7_RATES) -> list[ExperimentSpec]:
    """Sparse source; per rate, SE chooses the ratio for each quantizer family.

    The Lloyd curve reuses the label count chosen for the regular family.
    """
    prior = GaussBernoulliPrior.unit_power(0.1)
    specs = []
    for rate in rates:
        for fam, recipe_family, key in (("regular", "se-regular", "levels"), ("modulo", "se-modulo", "labels")):
            pt = best_ratio_for_rate(rate, fam, prior, n)
            specs.append(
                ExperimentSpec(
                    name="fig7",
                    n=n,
                    m_over_n=[pt.m_over_n],
                    prior=prior,
                    quantizer={"family": recipe_family, key: pt.labels},
                    trials=trials,
                    seed=seed,
                    estimators=("gamp",),
                    tag=f"{recipe_family}-{pt.labels}@R{rate:g}",
                )
            )
            if fam == "regular":
                specs.append(
                    replace(
                        specs[-1],
                        quantizer={"family": "lloyd", "levels": pt.labels},
                        tag=f"lloyd-{pt.labels}@R{rate:g}",
                    )
                )
    return specs


FIGURES = {"fig4": fig4, "fig5": fig5, "fig6": fig6, "fig7": fig7}


def run_specs(specs, threads: int = 1) -> tuple[str, list[ExperimentResult]]:
    results = [run_experiment(s, threads=threads) for s in specs]
    rows = [r for res in results for r in res.records]
    return trials_csv(rows), results
