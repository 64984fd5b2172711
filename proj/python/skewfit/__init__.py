"""Skew-symmetric posterior approximations for Bayesian GLMs."""

from ._core import (
    GlmModel,
    SkewfitError,
    SkewSymmetricApproximation,
    SymmetricApproximation,
    __version__,
    build_snp,
    divergence,
    factor_from_log_ratio,
    fit_gep,
    fit_gvb,
    fit_laplace,
    make_skew,
    rate_experiment,
    run_verify,
)

__all__ = [
    "GlmModel",
    "SkewfitError",
    "SkewSymmetricApproximation",
    "SymmetricApproximation",
    "__version__",
    "build_snp",
    "divergence",
    "factor_from_log_ratio",
    "fit_gep",
    "fit_gvb",
    "fit_laplace",
    "make_skew",
    "rate_experiment",
    "run_verify",
]
