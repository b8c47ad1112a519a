"""Bayesian nonparametric non-homogeneous hidden Markov models.

Exact slice/backward-forward MCMC for HMMs whose transition laws are
covariate-dependent probit stick-breaking processes, plus multi-step
predictive densities and a simulation harness.
"""

from .distributions import NIGParams, TruncSide, normal_cdf, nig_posterior, sample_inverse_gamma, sample_trunc_normal
from .model import (
    ChainState,
    Dataset,
    Hyperpriors,
    ModelSpec,
    NormalEmission,
    RegressionEmission,
    RegressionPrior,
    SliceSequence,
    TransitionParams,
    default_hyperpriors,
    extend_representation,
    kernel_h,
    stick_weight,
    stick_weights_truncated,
)
from .prediction import DensityGrid, mise, posterior_mean_series, predictive_densities, predictive_density
from .sampler import McmcConfig, NumericalDegeneracyError, PosteriorSample, SamplerError, run_mcmc

__version__ = "0.1.0"

__all__ = [
    "ChainState",
    "Dataset",
    "DensityGrid",
    "Hyperpriors",
    "McmcConfig",
    "ModelSpec",
    "NIGParams",
    "NormalEmission",
    "NumericalDegeneracyError",
    "PosteriorSample",
    "RegressionEmission",
    "RegressionPrior",
    "SamplerError",
    "SliceSequence",
    "TransitionParams",
    "TruncSide",
    "default_hyperpriors",
    "extend_representation",
    "kernel_h",
    "mise",
    "nig_posterior",
    "normal_cdf",
    "posterior_mean_series",
    "predictive_densities",
    "predictive_density",
    "run_mcmc",
    "sample_inverse_gamma",
    "sample_trunc_normal",
    "stick_weight",
    "stick_weights_truncated",
]
