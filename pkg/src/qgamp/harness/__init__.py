"""Monte Carlo harness: instances, baselines, experiment runner."""

from .baselines import OracleInfeasibleError, grid_posterior_oracle, lmmse_estimate
from .experiment import (
    ExperimentResult,
    ExperimentSpec,
    SpecError,
    TrialRecord,
    run_experiment,
)
from .instances import Instance, adaptive_uniform, generate_instance, measurement_source, trial_rng

__all__ = [
    "ExperimentResult",
    "ExperimentSpec",
    "Instance",
    "OracleInfeasibleError",
    "SpecError",
    "TrialRecord",
    "adaptive_uniform",
    "generate_instance",
    "grid_posterior_oracle",
    "lmmse_estimate",
    "measurement_source",
    "run_experiment",
    "trial_rng",
]
