"""Penalized two-stage least squares for many instruments and covariates.

Stage-2 estimators: OLS, lasso, adaptive lasso and bridge (``|b|**gamma``
with ``0 < gamma < 1``). Penalty levels are cross-validated, selected
coefficients get standard errors, and a Monte Carlo harness scores the
estimators on simulated data.
"""
from __future__ import annotations

from .dgp import Dataset, GroundTruth, SimConfig, load_csv, simulate, standardize, write_csv
from .errors import HdivError
from .metrics import aggregate, coefficient_rmse, score_replication
from .solvers import (
    FitResult,
    PenaltyKind,
    PenaltySpec,
    adaptive_lasso_fit,
    bridge_fit,
    lambda_to_tau,
    lasso_cd,
    ols_fit,
)
from .tuning import CvSpec, cv_select
from .two_stage import Method, TwoStageFit, run_two_stage

__version__ = "0.1.0"

__all__ = [
    "Dataset", "GroundTruth", "SimConfig", "load_csv", "simulate", "standardize", "write_csv",
    "HdivError", "aggregate", "coefficient_rmse", "score_replication", "FitResult",
    "PenaltyKind", "PenaltySpec", "adaptive_lasso_fit", "bridge_fit", "lambda_to_tau",
    "lasso_cd", "ols_fit", "CvSpec", "cv_select", "Method", "TwoStageFit", "run_two_stage",
]
