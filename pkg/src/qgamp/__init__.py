"""Reconstruction from quantized linear measurements with GAMP."""

__version__ = "0.1.0"

from .channels import (
    GaussBernoulliPrior,
    GaussianPrior,
    OutputChannel,
    d1_d2,
    output_moments,
    prior_from_dict,
    trunc_gauss_moments,
)
from .gamp import GampConfig, GampDivergenceError, GampResult, MixingMatrix, gamp_init, gamp_run, gamp_step
from .qdesign import DesignObjective, DesignResult, lloyd, optimize_family
from .quantizer import CellSet, GaussianSource, Interval, ScalarQuantizer, measurement_distortion
from .state_evolution import SeConfig, SeProblem, SeTrajectory, d2_bar, ein_bar, se_run
from .truncnorm import GaussianMoments

__all__ = [
    "CellSet",
    "DesignObjective",
    "DesignResult",
    "GampConfig",
    "GampDivergenceError",
    "GampResult",
    "GaussBernoulliPrior",
    "GaussianMoments",
    "GaussianPrior",
    "GaussianSource",
    "Interval",
    "MixingMatrix",
    "OutputChannel",
    "ScalarQuantizer",
    "SeConfig",
    "SeProblem",
    "SeTrajectory",
    "__version__",
    "d1_d2",
    "d2_bar",
    "ein_bar",
    "gamp_init",
    "gamp_run",
    "gamp_step",
    "lloyd",
    "measurement_distortion",
    "optimize_family",
    "output_moments",
    "prior_from_dict",
    "se_run",
    "trunc_gauss_moments",
]
