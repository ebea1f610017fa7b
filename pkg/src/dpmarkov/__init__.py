"""Bayesian nonparametric Markovian models for nonstationary time series.

The transition density f(z_t | z_{t-1}) is modeled as a truncated Dirichlet
process mixture of bivariate normals for (z_{t-1}, z_t), conditioned on
z_{t-1}: a mixture of linear Gaussian autoregressions whose weights depend
on the previous value.
"""
from .datasets import load_faithful
from .draws import PosteriorDraws, load_draws
from .estimators import StationaryTransitionMixture, ThresholdAR, TransitionMixture
from .inference import (DensityGrid, ExpectationCurve, PPOResult, expectation_curve,
                        forecast_density, multi_step_forecast, ppo, transition_grid)
from .model import (ComponentParams, Hyperparams, MixtureState, choose_truncation,
                    conditional_expectation, stick_break, transition_density,
                    transition_weights)
from .priors import DataProxy, HyperpriorConfig, default_priors
from .sampler import ChainState, SamplerSettings, run
from .simulate import simulate_brownian, simulate_from_model, simulate_skew_normal_series

__version__ = "0.1.0"

__all__ = [
    "load_faithful", "PosteriorDraws", "load_draws", "TransitionMixture",
    "StationaryTransitionMixture", "ThresholdAR", "DensityGrid", "ExpectationCurve",
    "PPOResult", "expectation_curve", "forecast_density", "multi_step_forecast", "ppo",
    "transition_grid", "ComponentParams", "Hyperparams", "MixtureState", "choose_truncation",
    "conditional_expectation", "stick_break", "transition_density", "transition_weights",
    "DataProxy", "HyperpriorConfig", "default_priors", "ChainState", "SamplerSettings", "run",
    "simulate_brownian", "simulate_from_model", "simulate_skew_normal_series",
]
