"""Random problem instances and quantizer recipes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..channels import Prior
from ..quantizer import GaussianSource, ScalarQuantizer


def trial_rng(seed: int, m: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one trial, independent of execution order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, m, trial])))


@dataclass
class Instance:
    x: np.ndarray
    A: np.ndarray
    w: np.ndarray
    z: np.ndarray
    y: np.ndarray
    quantizer: ScalarQuantizer

    @property
    def s(self) -> np.ndarray:
        return self.z + self.w


def measurement_source(n: int, m: int, prior: Prior, sigma2: float = 0.0) -> GaussianSource:
    """Marginal law of one quantizer input ``s_i = z_i + w_i``.

    With ``A_ij ~ N(0, 1/m)`` each ``z_i`` has variance ``(n/m) * var(x_j)``
    (plus ``(n/m) * mean^2`` for a non-centred prior).
    """
    second = prior.tau_init + prior.x_init**2
    return GaussianSource(0.0, n / m * second + sigma2)


def generate_instance(
    n: int,
    m: int,
    prior: Prior,
    quantizer,
    sigma2: float,
    rng: np.random.Generator,
) -> Instance:
    """Draw ``x ~ prior``, ``A_ij ~ N(0, 1/m)``, ``w ~ N(0, sigma2)`` and quantize.

    ``quantizer`` is either a fixed :class:`ScalarQuantizer` or a callable
    receiving ``z = A x`` and returning one (realization-dependent scaling).
    """
    x = prior.sample(rng, n)
    A = rng.standard_normal((m, n)) / math.sqrt(m)
    w = math.sqrt(sigma2) * rng.standard_normal(m) if sigma2 > 0 else np.zeros(m)
    z = A @ x
    q = quantizer if isinstance(quantizer, ScalarQuantizer) else quantizer(z)
    y = q.encode(z + w)
    return Instance(x, A, w, z, np.atleast_1d(y), q)


def adaptive_uniform(n_levels: int):
    """Uniform quantizer whose granular region is ``[-max|z|, max|z|]``."""

    def build(z: np.ndarray) -> ScalarQuantizer:
        half = float(np.max(np.abs(z)))
        return ScalarQuantizer.uniform(n_levels, half if half > 0 else 1.0)

    return build


def rate_bits(m_over_n: float, labels: int) -> float:
    """Bits per component of ``x``: ``(m/n) log2(labels)``."""
    return m_over_n * math.log2(labels)


def describe(recipe: dict[str, Any]) -> str:
    fam = recipe.get("family", "?")
    k = recipe.get("levels", recipe.get("labels", ""))
    return f"{fam}-{k}" if k != "" else fam
