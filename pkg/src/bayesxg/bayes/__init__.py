"""Bayesian hierarchical xG models and the NUTS sampler."""

from .diagnostics import InsufficientDraws, ess, mcse, rhat
from .fit import PosteriorSamples, Prediction, SamplerConfig, posterior_predict, run_hmc
from .hmc import NonFiniteGradient, Sampler
from .model import (
    EPL_PLAYERS,
    PRIOR_SETS,
    DimensionMismatch,
    ModelSpec,
    Posterior,
    grad_log_posterior,
    log_posterior,
    prior_for,
    resolve_players,
)

__all__ = [
    "EPL_PLAYERS",
    "PRIOR_SETS",
    "DimensionMismatch",
    "InsufficientDraws",
    "ModelSpec",
    "NonFiniteGradient",
    "Posterior",
    "PosteriorSamples",
    "Prediction",
    "Sampler",
    "SamplerConfig",
    "ess",
    "grad_log_posterior",
    "log_posterior",
    "mcse",
    "posterior_predict",
    "prior_for",
    "resolve_players",
    "rhat",
    "run_hmc",
]
