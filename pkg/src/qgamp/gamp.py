"""Generalized approximate message passing for quantized linear measurements.

Each iteration makes one measurement-side sweep followed by one
variable-side sweep::

    nu_p  = A2 @ tau_hat
    z_hat = A @ x_hat - u_prev * nu_p
    u, tau = d1_d2(y, z_hat, nu_p + sigma2)
    r_prec = A2.T @ tau
    q = x_hat + (A.T @ u) / r_prec,   nu = 1 / r_prec
    x_hat, tau_hat = prior.denoise(q, nu)

where ``A2`` is the elementwise square of ``A``.  The iteration starts from
the prior mean and variance with ``u_prev = 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channels import TAU_MIN, OutputChannel, Prior, d1_d2

logger = logging.getLogger(__name__)


class GampDivergenceError(FloatingPointError):
    def __init__(self, iteration: int, what: str):
        super().__init__(f"GAMP diverged at iteration {iteration}: non-finite {what}")
        self.iteration = iteration


@dataclass(frozen=True)
class GampConfig:
    max_iters: int = 25
    stop_tol: float = 1e-8
    damping: float = 1.0
    tau_min: float = TAU_MIN
    keep_snapshots: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not self.tau_min > 0:
            raise ValueError("tau_min must be positive")


class MixingMatrix:
    """Dense mixing matrix with its cached elementwise square.

    ``products`` counts matrix-vector products, which dominate the cost of
    an iteration (four per step).
    """

    def __init__(self, A):
        self.A = np.ascontiguousarray(A, dtype=float)
        if self.A.ndim != 2:
            raise ValueError("mixing matrix must be 2-D")
        self.A2 = self.A * self.A
        self.products = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def forward(self, x):
        self.products += 1
        return self.A @ x

    def adjoint(self, u):
        self.products += 1
        return self.A.T @ u

    def forward_sq(self, v):
        self.products += 1
        return self.A2 @ v

    def adjoint_sq(self, t):
        self.products += 1
        return self.A2.T @ t


def as_mixing(A) -> MixingMatrix:
    return A if isinstance(A, MixingMatrix) else MixingMatrix(A)


@dataclass
class GampState:
    x_hat: np.ndarray
    tau_hat: np.ndarray
    u: np.ndarray
    tau: np.ndarray
    iter: int = 0
    degenerate: int = 0


def gamp_init(prior: Prior, n: int, m: int) -> GampState:
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    return GampState(
        x_hat=np.full(n, float(prior.x_init)),
        tau_hat=np.full(n, float(prior.tau_init)),
        u=np.zeros(m),
        tau=np.zeros(m),
    )


def _check(t, **arrays):
    for name, arr in arrays.items():
        if not np.all(np.isfinite(arr)):
            raise GampDivergenceError(t, name)


def gamp_step(
    state: GampState,
    A,
    y,
    ch: OutputChannel,
    prior: Prior,
    cfg: GampConfig = GampConfig(),
) -> GampState:
    """One GAMP iteration; returns a new state with ``iter`` incremented."""
    mix = as_mixing(A)
    t = state.iter
    floor = cfg.tau_min

    nu_p = mix.forward_sq(state.tau_hat)
    z_hat = mix.forward(state.x_hat) - state.u * nu_p
    nu_total = np.maximum(nu_p + ch.noise_variance, floor)
    u, tau, bad = d1_d2(ch, y, z_hat, nu_total, tau_min=floor)
    _check(t, z_hat=z_hat, u=u, tau=tau)

    d = cfg.damping
    if d < 1 and t > 0:
        u = d * u + (1 - d) * state.u
        tau = d * tau + (1 - d) * state.tau

    r_prec = np.maximum(mix.adjoint_sq(tau), floor)
    q = state.x_hat + mix.adjoint(u) / r_prec
    nu = 1.0 / r_prec
    x_hat, tau_hat = prior.denoise(q, nu)
    tau_hat = np.maximum(tau_hat, floor * floor)
    _check(t, q=q, x_hat=x_hat, tau_hat=tau_hat)

    if d < 1:
        x_hat = d * x_hat + (1 - d) * state.x_hat
        tau_hat = d * tau_hat + (1 - d) * state.tau_hat

    return GampState(x_hat, tau_hat, u, tau, t + 1, state.degenerate + int(np.count_nonzero(bad)))


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    tau_mean: float
    rel_change: float
    mse: float | None = None


@dataclass
class GampResult:
    x_hat: np.ndarray
    state: GampState
    iterations: int
    converged: bool
    history: list[IterationRecord] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)

    @property
    def degenerate_events(self) -> int:
        return self.state.degenerate


def gamp_run(
    A,
    y,
    ch: OutputChannel,
    prior: Prior,
    cfg: GampConfig = GampConfig(),
    x_true=None,
) -> GampResult:
    """Iterate :func:`gamp_step` until the relative change of ``x_hat`` is
    below ``cfg.stop_tol`` or ``cfg.max_iters`` steps have run.

    When ``x_true`` is given the per-iteration empirical MSE is recorded.
    """
    mix = as_mixing(A)
    m, n = mix.shape
    y = np.asarray(y)
    if y.shape != (m,):
        raise ValueError(f"expected {m} labels, got shape {y.shape}")
    state = gamp_init(prior, n, m)
    history = []
    snapshots = []
    converged = False
    for _ in range(cfg.max_iters):
        new = gamp_step(state, mix, y, ch, prior, cfg)
        scale = max(np.linalg.norm(new.x_hat), np.linalg.norm(state.x_hat), 1e-300)
        rel = float(np.linalg.norm(new.x_hat - state.x_hat) / scale)
        mse = None if x_true is None else float(np.mean((new.x_hat - x_true) ** 2))
        history.append(IterationRecord(new.iter, float(new.tau_hat.mean()), rel, mse))
        if cfg.keep_snapshots:
            snapshots.append(new.x_hat.copy())
        state = new
        if rel < cfg.stop_tol:
            converged = True
            break
    if state.degenerate:
        logger.debug("GAMP hit %d degenerate cell evaluations", state.degenerate)
    return GampResult(state.x_hat, state, state.iter, converged, history, snapshots)


