"""Bayesian GARMA models for count time series."""

from .core import (
    BINOMIAL,
    MEAN_SUBTRACTED,
    NEGBIN,
    LITERAL,
    POISSON,
    CountSeries,
    Covariate,
    Family,
    ModelSpec,
    ParamVector,
    clamp_counts,
    design_matrix,
    inverse_link,
    link,
    linear_predictor_pass,
    log_density,
    log_partial_likelihood,
)

__version__ = "0.1.0"
