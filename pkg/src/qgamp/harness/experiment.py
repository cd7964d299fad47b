"""Monte Carlo experiment runner.

An :class:`ExperimentSpec` describes a sweep over measurement ratios.  For
every ratio the quantizer recipe is resolved once (SE-based designs are
deterministic), then each trial draws an instance from its own counter-based
random stream and runs the selected estimators.  Results are reduced in
``(ratio, trial, estimator)`` order, so output is identical for any thread
count.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .. import __version__
from ..channels import GaussianPrior, OutputChannel, Prior, prior_from_dict
from ..gamp import GampConfig, GampDivergenceError, gamp_run
from ..qdesign import lloyd
from ..quantizer import REGULAR, ScalarQuantizer, measurement_distortion
from ..state_evolution import SeConfig
from .baselines import OracleInfeasibleError, grid_posterior_oracle, lmmse_estimate
from .instances import adaptive_uniform, generate_instance, measurement_source, trial_rng
from .pilot import pilot_design

logger = logging.getLogger(__name__)

ESTIMATORS = ("gamp", "lmmse", "oracle")
TRIAL_HEADER = ("m_over_n", "estimator", "trial", "sq_err", "sq_err_db", "iters", "flag")
SUMMARY_HEADER = ("m_over_n", "estimator", "trials", "median_sq_err_db")
FAMILIES = ("uniform", "adaptive", "modulo", "fixed", "lloyd", "se-regular", "se-modulo")
EXPERIMENT_GAMP = GampConfig(max_iters=200, stop_tol=1e-3)
MAX_ENTRIES = 50_000_000


class SpecError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    n: int
    m_over_n: list[float]
    prior: Prior = GaussianPrior()
    quantizer: dict[str, Any] = field(default_factory=lambda: {"family": "uniform", "levels": 16})
    sigma2: float = 0.0
    trials: int = 100
    seed: int = 0
    estimators: tuple[str, ...] = ("gamp", "lmmse")
    gamp: GampConfig = EXPERIMENT_GAMP
    se: SeConfig = SeConfig()
    tag: str = ""
    name: str = "experiment"

    def __post_init__(self):
        self.m_over_n = [float(r) for r in self.m_over_n]
        self.estimators = tuple(self.estimators)
        if self.n < 1 or self.trials < 1:
            raise SpecError("n and trials must be positive")
        if not self.m_over_n or min(self.m_over_n) <= 0:
            raise SpecError("m_over_n must hold positive ratios")
        if not 0 <= self.seed < 2**64:
            raise SpecError("seed must be an unsigned 64-bit integer")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise SpecError(f"unknown estimators {sorted(bad)}")
        if self.quantizer.get("family") not in FAMILIES:
            raise SpecError(f"unknown quantizer family {self.quantizer.get('family')!r}")
        if self.n * self.m(max(self.m_over_n)) > MAX_ENTRIES:
            raise SpecError("problem size exceeds the memory cap")
        if "oracle" in self.estimators and self.n > 3:
            raise SpecError("the grid oracle needs n <= 3")
        if self.sigma2 < 0:
            raise SpecError("sigma2 must be non-negative")

    def m(self, ratio: float) -> int:
        return max(1, int(round(self.n * ratio)))

    # -- structured text (TOML) -------------------------------------------

    _KEYS = {"n", "m_over_n", "prior", "quantizer", "sigma2", "trials", "seed",
             "estimators", "gamp", "se", "tag", "name"}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentSpec:
        unknown = set(data) - cls._KEYS
        if unknown:
            raise SpecError(f"unknown keys in experiment spec: {sorted(unknown)}")
        kw = dict(data)
        if "prior" in kw:
            kw["prior"] = prior_from_dict(kw["prior"])
        if "gamp" in kw:
            kw["gamp"] = _config(GampConfig, kw["gamp"], EXPERIMENT_GAMP)
        if "se" in kw:
            kw["se"] = _config(SeConfig, kw["se"], SeConfig())
        try:
            return cls(**kw)
        except TypeError as exc:
            raise SpecError(str(exc)) from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "tag": self.tag,
            "n": self.n,
            "m_over_n": list(self.m_over_n),
            "prior": self.prior.to_dict(),
            "quantizer": dict(self.quantizer),
            "sigma2": self.sigma2,
            "trials": self.trials,
            "seed": self.seed,
            "estimators": list(self.estimators),
            "gamp": asdict(self.gamp),
            "se": asdict(self.se),
        }


def _config(cls, data, default):
    if not isinstance(data, dict):
        raise SpecError(f"{cls.__name__} section must be a table")
    allowed = set(asdict(default))
    unknown = set(data) - allowed
    if unknown:
        raise SpecError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**{**asdict(default), **data})


@dataclass(frozen=True)
class TrialRecord:
    m_over_n: float
    m: int
    estimator: str
    trial: int
    sq_err: float
    iters: int
    flag: str = "ok"
    wall_time: float = 0.0

    @property
    def sq_err_db(self) -> float:
        return 10.0 * math.log10(self.sq_err) if self.sq_err > 0 else -math.inf


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    records: list[TrialRecord]
    metadata: dict[str, Any]

    def medians_db(self) -> dict[tuple[float, str], float]:
        groups: dict[tuple[float, str], list[float]] = {}
        for r in self.records:
            groups.setdefault((r.m_over_n, r.estimator), []).append(r.sq_err)
        return {k: 10.0 * math.log10(float(np.median(v))) for k, v in groups.items()}

    def iterations(self, estimator_prefix: str = "gamp") -> list[int]:
        return [r.iters for r in self.records if r.estimator.startswith(estimator_prefix)]

    def trials_csv(self) -> str:
        return trials_csv(self.records)

    def summary_csv(self) -> str:
        counts: dict[tuple[float, str], int] = {}
        for r in self.records:
            counts[(r.m_over_n, r.estimator)] = counts.get((r.m_over_n, r.estimator), 0) + 1
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for (ratio, est), med in self.medians_db().items():
            w.writerow((_fmt(ratio), est, counts[(ratio, est)], _fmt(med)))
        return buf.getvalue()


def _fmt(v) -> str:
    return repr(float(v))


def trials_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_HEADER)
    for r in records:
        w.writerow((_fmt(r.m_over_n), r.estimator, r.trial, _fmt(r.sq_err), _fmt(r.sq_err_db), r.iters, r.flag))
    return buf.getvalue()


# -- quantizer recipes --------------------------------------------------------


RECIPE_KEYS = {"family", "levels", "labels", "loading", "step", "quantizer", "pilot_trials", "pilot_tol_db"}


def resolve_quantizer(spec: ExperimentSpec, ratio: float):
    """Turn the spec's quantizer recipe into a quantizer (or per-instance builder) plus metadata.

    Step sizes and loading factors in recipes are in units of the standard
    deviation of one quantizer input.  The ``se-*`` families are SE-optimized
    and then confirmed by a short GAMP pilot at the experiment's size.
    """
    recipe = spec.quantizer
    fam = recipe["family"]
    m = spec.m(ratio)
    src = measurement_source(spec.n, m, spec.prior, spec.sigma2)
    extra = set(recipe) - RECIPE_KEYS
    if extra:
        raise SpecError(f"unknown quantizer recipe keys: {sorted(extra)}")
    if fam == "uniform":
        k, load = int(recipe.get("levels", 16)), float(recipe.get("loading", 3.0))
        return ScalarQuantizer.uniform(k, load * src.std), {"half_width": load * src.std}
    if fam == "adaptive":
        return adaptive_uniform(int(recipe.get("levels", 16))), {"half_width": "max|Ax|"}
    if fam == "modulo":
        step = float(recipe["step"]) * src.std
        return ScalarQuantizer.modulo(step, int(recipe["labels"])), {"step": step}
    if fam == "fixed":
        return ScalarQuantizer.from_dict(recipe["quantizer"]), {}
    if fam == "lloyd":
        res = lloyd(int(recipe["levels"]), src)
        return res.quantizer, {"lloyd_distortion": res.distortion, "lloyd_converged": res.converged}
    if fam in ("se-regular", "se-modulo"):
        family = fam[3:]
        k = int(recipe["levels"] if family == "regular" else recipe["labels"])
        d = pilot_design(
            family, k, spec.n, m, spec.prior, spec.sigma2, spec.gamp, spec.seed, spec.se,
            trials=int(recipe.get("pilot_trials", 20)),
            tol_db=float(recipe.get("pilot_tol_db", 2.0)),
        )
        return d.quantizer, {
            "param": d.param,
            "param_over_std": d.param / src.std,
            "predicted_mse_db": d.predicted_mse_db,
            "pilot_quantile_db": d.pilot_quantile_db,
            "se_optimal_param": d.se_optimal_param,
            "pilot_rejected": [list(r) for r in d.rejected],
        }
    raise SpecError(f"unknown quantizer family {fam!r}")


# -- trials -------------------------------------------------------------------


def _label(est: str, tag: str) -> str:
    return f"{est}/{tag}" if tag else est


def run_trial(spec: ExperimentSpec, ratio: float, trial: int, quantizer) -> list[TrialRecord]:
    m = spec.m(ratio)
    rng = trial_rng(spec.seed, m, trial)
    inst = generate_instance(spec.n, m, spec.prior, quantizer, spec.sigma2, rng)
    src = measurement_source(spec.n, m, spec.prior, spec.sigma2)
    ch = OutputChannel(inst.quantizer, spec.sigma2, src)
    out = []
    for est in spec.estimators:
        t0 = time.perf_counter()
        iters, flag = 0, "ok"
        try:
            if est == "gamp":
                res = gamp_run(inst.A, inst.y, ch, spec.prior, spec.gamp)
                x_hat, iters = res.x_hat, res.iterations
                flag = "ok" if res.converged else "maxiter"
            elif est == "lmmse":
                y_hat = inst.quantizer.decode(inst.y)
                noise = measurement_distortion(inst.quantizer, src) + spec.sigma2
                x_hat = lmmse_estimate(inst.A, y_hat, noise, spec.prior)
            else:
                x_hat = grid_posterior_oracle(inst.A, inst.y, spec.prior, ch)
            err = float(np.mean((x_hat - inst.x) ** 2))
            if not math.isfinite(err):
                err, flag = math.inf, "diverged"
        except GampDivergenceError:
            err, flag = math.inf, "diverged"
        except OracleInfeasibleError:
            err, flag = math.inf, "infeasible"
        out.append(TrialRecord(ratio, m, _label(est, spec.tag), trial, err, iters, flag,
                               time.perf_counter() - t0))
    return out


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentResult:
    """Run every ``(ratio, trial)`` of the spec; see module docstring."""
    if "lmmse" in spec.estimators and spec.quantizer["family"] in ("modulo", "se-modulo"):
        raise SpecError("linear MMSE needs a regular quantizer with decoder levels")
    designs = {}
    quantizers = {}
    for ratio in spec.m_over_n:
        q, meta = resolve_quantizer(spec, ratio)
        if isinstance(q, ScalarQuantizer):
            if "lmmse" in spec.estimators and (q.kind != REGULAR or q.levels is None):
                raise SpecError("linear MMSE needs a regular quantizer with decoder levels")
            meta = {**meta, "quantizer": q.to_dict()}
        quantizers[ratio] = q
        designs[_fmt(ratio)] = meta

    tasks = [(ratio, t) for ratio in spec.m_over_n for t in range(spec.trials)]

    def work(task):
        ratio, t = task
        return run_trial(spec, ratio, t, quantizers[ratio])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, tasks))
    else:
        chunks = [work(task) for task in tasks]
    records = [r for chunk in chunks for r in chunk]
    metadata = {
        "version": __version__,
        "spec": spec.to_dict(),
        "quantizers": designs,
        "gamp_damping": spec.gamp.damping,
        "gamp_stop_rule": {"stop_tol": spec.gamp.stop_tol, "max_iters": spec.gamp.max_iters},
        "lmmse_decoder_levels": "midpoints of the granular cells",
        "db_convention": "10*log10(mean squared error per component)",
    }
    return ExperimentResult(spec, records, metadata)
