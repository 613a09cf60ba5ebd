"""Conditional conformal prediction with piecewise-linear solution paths.

The heavy lifting lives in the compiled extension; this package re-exports
the user-facing operations.
"""

from ._core import (
    EmbeddingModel,
    InvalidInputError,
    MeanPredictor,
    Model,
    NumericalError,
    PathStallError,
    calibrate,
    fit_mean,
    fit_pca,
    fit_plsi,
    load_model,
    localized_cutoff,
    simulate,
    split_cutoff,
)

__all__ = [
    "EmbeddingModel",
    "InvalidInputError",
    "MeanPredictor",
    "Model",
    "NumericalError",
    "PathStallError",
    "calibrate",
    "fit_mean",
    "fit_pca",
    "fit_plsi",
    "load_model",
    "localized_cutoff",
    "simulate",
    "split_cutoff",
]
