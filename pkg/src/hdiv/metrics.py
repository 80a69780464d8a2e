"""Scoring of fitted coefficients against the simulated truth."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ReplicationScore", "Summary", "coefficient_rmse", "score_replication", "aggregate"]


@dataclass(frozen=True)
class ReplicationScore:
    rmse: float
    n_selected: int
    contains_truth: bool
    equals_truth: bool


@dataclass(frozen=True)
class Summary:
    mean_rmse: float
    median_rmse: float
    mean_selected: float
    p_contains: float
    p_equals: float
    n: int


def coefficient_rmse(beta_hat, beta0) -> float:
    """``sqrt(mean((beta_hat - beta0)**2))`` over all coordinates."""
    a = np.asarray(beta_hat, dtype=float)
    b = np.asarray(beta0, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def score_replication(fit, truth) -> ReplicationScore:
    """Score a :class:`~hdiv.two_stage.TwoStageFit` against a ground truth.

    The estimated support is ``fit.support_beta``; OLS reports every index.
    """
    sel = set(np.asarray(fit.support_beta, dtype=int).tolist())
    true = set(np.asarray(truth.support_beta, dtype=int).tolist())
    return ReplicationScore(
        rmse=coefficient_rmse(fit.beta_hat, truth.beta0),
        n_selected=len(sel),
        contains_truth=true <= sel,
        equals_truth=true == sel,
    )


def aggregate(scores) -> Summary:
    """Means, lower median and selection frequencies of a list of scores."""
    scores = list(scores)
    m = len(scores)
    if m == 0:
        raise ValueError("empty score list")
    rmse = sorted(s.rmse for s in scores)
    return Summary(
        mean_rmse=math.fsum(rmse) / m,
        median_rmse=rmse[math.ceil(m / 2) - 1],
        mean_selected=sum(s.n_selected for s in scores) / m,
        p_contains=sum(s.contains_truth for s in scores) / m,
        p_equals=sum(s.equals_truth for s in scores) / m,
        n=m,
    )
