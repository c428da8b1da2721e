"""Conditional kernel ridge regression with unpenalized feature subspaces."""

from ckrr.cpd_solver import ConditionalKrrModel, fit, fit_direct_oracle, predict
from ckrr.errors import (
    CkrrError,
    ConfigError,
    FactorizationError,
    NoRoot,
    NonPositiveRidge,
    NumericalError,
    NystromRankError,
    OverfittingDivergence,
    RankDeficientFeatures,
)
from ckrr.kernels import KernelSpec, cross_gram, eval_kernel, gram
from ckrr.rfrr import RfrrModel, fit_rfrr, predict_rfrr

__version__ = "0.1.0"

__all__ = [
    "CkrrError",
    "ConditionalKrrModel",
    "ConfigError",
    "FactorizationError",
    "KernelSpec",
    "NoRoot",
    "NonPositiveRidge",
    "NumericalError",
    "NystromRankError",
    "OverfittingDivergence",
    "RankDeficientFeatures",
    "RfrrModel",
    "cross_gram",
    "eval_kernel",
    "fit",
    "fit_direct_oracle",
    "fit_rfrr",
    "gram",
    "predict",
    "predict_rfrr",
]
