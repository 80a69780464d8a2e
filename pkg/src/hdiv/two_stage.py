"""Penalized two-stage least squares.

Stage 1 regresses every covariate on the instruments, stage 2 regresses
the outcome on the fitted conditional means ``D_hat = Z @ alpha_hat``.
Standard errors for the selected coefficients use the inverse Gram matrix
of the selected columns of ``D_hat`` and the stage-2 residual variance.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dgp import Dataset
from .errors import ConfigError, DegreesOfFreedomError, HdivError, SingularGramError
from .solvers import (
    FitResult,
    PenaltyKind,
    adaptive_weights,
    bridge_fit,
    lasso_cd,
    ols_fit,
    solve_gram,
)
from .tuning import CvResult, CvSpec, FoldCache, cv_select

__all__ = [
    "Method",
    "FirstStageFit",
    "TwoStageFit",
    "fit_first_stage",
    "predict_conditional_means",
    "fit_second_stage",
    "estimate_sigma_eps",
    "standard_errors",
    "run_two_stage",
    "write_fit_report",
]

GRAM_COND_LIMIT = 1e12

_DEFAULT_STAGE1 = {
    PenaltyKind.OLS: PenaltyKind.OLS,
    PenaltyKind.LASSO: PenaltyKind.LASSO,
    PenaltyKind.BRIDGE: PenaltyKind.BRIDGE,
    PenaltyKind.ADALASSO: PenaltyKind.LASSO,
}


@dataclass(frozen=True)
class Method:
    """Estimator for both stages.

    ``stage1`` defaults to the same family as stage 2 (lasso for the
    adaptive lasso); a bridge first stage uses exponent ``gamma1``.
    """

    kind: PenaltyKind
    gamma: float | None = None
    stage1: PenaltyKind | None = None
    gamma1: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind(self.kind))
        stage1 = _DEFAULT_STAGE1[self.kind] if self.stage1 is None else PenaltyKind(self.stage1)
        if stage1 is PenaltyKind.ADALASSO:
            raise ConfigError("the adaptive lasso is not available as a first stage")
        object.__setattr__(self, "stage1", stage1)
        if self.kind is PenaltyKind.BRIDGE and (self.gamma is None or not 0 < self.gamma < 1):
            raise ConfigError(f"bridge needs 0 < gamma < 1, got {self.gamma}")
        if stage1 is PenaltyKind.BRIDGE and not 0 < self.gamma1 < 1:
            raise ConfigError(f"stage-1 gamma must lie in (0, 1), got {self.gamma1}")

    @classmethod
    def parse(cls, text: str, stage1=None, gamma1: float = 0.1, default_gamma=None) -> "Method":
        """Parse ``ols``, ``lasso``, ``adalasso``, ``bridge`` or ``bridge(0.2)``/``bridge:0.2``."""
        m = re.fullmatch(r"\s*([a-zA-Z_]+)\s*(?:[(:]\s*([0-9.eE+-]+)\s*\)?)?\s*", text)
        if not m:
            raise ConfigError(f"cannot parse method {text!r}")
        name = m.group(1).lower().replace("_", "")
        aliases = {"adaptivelasso": "adalasso", "alasso": "adalasso"}
        name = aliases.get(name, name)
        try:
            kind = PenaltyKind(name)
        except ValueError:
            raise ConfigError(f"unknown method {m.group(1)!r}") from None
        gamma = float(m.group(2)) if m.group(2) else None
        if kind is PenaltyKind.BRIDGE and gamma is None:
            gamma = default_gamma
        elif kind is not PenaltyKind.BRIDGE and gamma is not None:
            raise ConfigError(f"{kind.value} takes no exponent")
        return cls(kind=kind, gamma=gamma, stage1=stage1, gamma1=gamma1)

    @property
    def label(self) -> str:
        if self.kind is PenaltyKind.BRIDGE:
            return f"BRIDGE({self.gamma:g})"
        return {"ols": "OLS", "lasso": "LASSO", "adalasso": "ADALASSO"}[self.kind.value]


@dataclass
class FirstStageFit:
    alpha_hat: np.ndarray
    lambdas: np.ndarray
    converged: np.ndarray


@dataclass
class TwoStageFit:
    alpha_hat: np.ndarray
    d_hat: np.ndarray
    beta_hat: np.ndarray
    support_beta: np.ndarray
    sigma_eps_hat: float | None
    std_errors: np.ndarray | None
    lambda_stage1: np.ndarray
    lambda_stage2: float
    method: Method
    converged: bool = True
    initial_beta: np.ndarray | None = None
    report: dict = field(default_factory=dict)

    @property
    def z_stats(self) -> np.ndarray | None:
        if self.std_errors is None:
            return None
        return self.beta_hat[self.support_beta] / self.std_errors


def _lstsq(A, B):
    sol, *_ = np.linalg.lstsq(A, B, rcond=None)
    return sol


def fit_first_stage(Z, X, kind=PenaltyKind.BRIDGE, gamma1=0.1, cv: CvSpec = CvSpec(),
                    lambdas=None) -> FirstStageFit:
    """Regress each column of ``X`` on ``Z`` separately.

    Parameters
    ----------
    Z : ndarray, shape (n, p_z)
        Standardized instruments.
    X : ndarray, shape (n, p_x)
    kind : PenaltyKind
        ``ols`` (minimum norm), ``lasso`` or ``bridge``.
    gamma1 : float
        Bridge exponent.
    cv : CvSpec
        Each equation gets its own cross-validated penalty.
    lambdas : float or array, optional
        Fixed penalty levels, skipping cross-validation.
    """
    kind = PenaltyKind(kind)
    Z = np.asarray(Z, dtype=float)
    X = np.asarray(X, dtype=float)
    p_z, p_x = Z.shape[1], X.shape[1]
    if kind is PenaltyKind.ADALASSO:
        raise ConfigError("the adaptive lasso is not available as a first stage")
    if kind is PenaltyKind.OLS:
        return FirstStageFit(_lstsq(Z, X), np.zeros(p_x), np.ones(p_x, dtype=bool))

    G = Z.T @ Z
    C = Z.T @ X
    yy = np.einsum("ij,ij->j", X, X)
    if lambdas is not None:
        lam = np.broadcast_to(np.asarray(lambdas, dtype=float), (p_x,)).copy()
        cache = cross = None
    else:
        lam = np.empty(p_x)
        cache = FoldCache(Z, cv)
        cross = cache.cross(X)

    alpha = np.zeros((p_z, p_x))
    converged = np.ones(p_x, dtype=bool)
    zero_lam = []
    for j in range(p_x):
        if cache is not None:
            res = cv_select(Z, X[:, j], kind, cv, gamma=gamma1, cache=cache,
                            cross=cross[:, :, j])
            lam[j] = res.lam
        if lam[j] == 0:
            zero_lam.append(j)
            continue
        alpha[:, j], converged[j] = solve_gram(G, C[:, j], yy[j], kind, lam[j], gamma=gamma1)
    if zero_lam:
        alpha[:, zero_lam] = _lstsq(Z, X[:, zero_lam])
    return FirstStageFit(alpha, lam, converged)


def predict_conditional_means(Z, alpha_hat) -> np.ndarray:
    return np.asarray(Z, dtype=float) @ np.asarray(alpha_hat, dtype=float)


def _fit_at(D, Y, kind, lam, gamma=None, weights=None) -> FitResult:
    if kind is PenaltyKind.OLS or lam == 0:
        return ols_fit(D, Y)
    if kind is PenaltyKind.BRIDGE:
        return bridge_fit(D, Y, lam, gamma)
    return lasso_cd(D, Y, lam, weights=weights)


def fit_second_stage(d_hat, Y, method: Method, cv: CvSpec = CvSpec(), lam=None,
                     initial_beta=None):
    """Penalized regression of ``Y`` on ``d_hat``.

    Returns ``(fit, lam, cv_result, initial_beta)``. For the adaptive lasso
    the initial estimator defaults to the cross-validated lasso on the same
    data; ``cv_result`` is ``None`` when ``lam`` is given.
    """
    d_hat = np.asarray(d_hat, dtype=float)
    Y = np.asarray(Y, dtype=float)
    kind = method.kind
    if kind is PenaltyKind.OLS:
        return ols_fit(d_hat, Y), 0.0, None, None

    cache = FoldCache(d_hat, cv)
    cross = cache.cross(Y)
    weights = None
    if kind is PenaltyKind.ADALASSO:
        if initial_beta is None:
            init = cv_select(d_hat, Y, PenaltyKind.LASSO, cv, cache=cache, cross=cross)
            initial_beta = _fit_at(d_hat, Y, PenaltyKind.LASSO, init.lam).beta
        weights = adaptive_weights(initial_beta)

    result = None
    if lam is None:
        result = cv_select(d_hat, Y, kind, cv, gamma=method.gamma, weights=weights,
                           cache=cache, cross=cross)
        lam = result.lam
    fit = _fit_at(d_hat, Y, kind, lam, gamma=method.gamma, weights=weights)
    return fit, float(lam), result, initial_beta


def estimate_sigma_eps(Y, d_hat, beta_hat, support_size) -> float:
    """Residual standard deviation with ``n - support_size`` degrees of freedom."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    df = n - support_size
    if df <= 0:
        raise DegreesOfFreedomError(
            f"degenerate degrees of freedom: n={n}, support size={support_size}"
        )
    resid = Y - np.asarray(d_hat) @ np.asarray(beta_hat)
    return float(np.sqrt(resid @ resid / df))


def standard_errors(d_sel, sigma_eps, n=None) -> np.ndarray:
    """``sigma_eps * sqrt(diag(inv(S)) / n)`` with ``S = d_sel'd_sel / n``."""
    d_sel = np.asarray(d_sel, dtype=float)
    if n is None:
        n = d_sel.shape[0]
    if d_sel.shape[1] == 0:
        return np.empty(0)
    gram = d_sel.T @ d_sel / n
    if not np.isfinite(cond := np.linalg.cond(gram)) or cond > GRAM_COND_LIMIT:
        raise SingularGramError(f"singular selected Gram matrix (condition {cond:.3g})")
    inv = np.linalg.inv(gram)
    return sigma_eps * np.sqrt(np.diag(inv) / n)


def run_two_stage(data: Dataset, method: Method, cv: CvSpec = CvSpec(),
                  stage1_lambdas=None, stage2_lambda=None,
                  first_stage: FirstStageFit | None = None) -> TwoStageFit:
    """Both stages, residual variance and standard errors.

    Errors in the variance or standard-error step do not abort the fit;
    they are recorded in ``report`` and the affected fields are ``None``.
    """
    if not data.standardized:
        raise ConfigError("run_two_stage expects a standardized dataset")
    report: dict[str, list[str]] = {"stage1": [], "stage2": [], "inference": []}
    if first_stage is None:
        first_stage = fit_first_stage(data.Z, data.X, method.stage1, method.gamma1, cv,
                                      lambdas=stage1_lambdas)
    if not first_stage.converged.all():
        bad = np.flatnonzero(~first_stage.converged) + 1
        report["stage1"].append(f"not converged for equations {bad.tolist()}")

    d_hat = predict_conditional_means(data.Z, first_stage.alpha_hat)
    fit, lam2, _, init = fit_second_stage(d_hat, data.Y, method, cv, lam=stage2_lambda)
    if not fit.converged:
        report["stage2"].append("not converged")

    support = np.flatnonzero(fit.beta) if method.kind is not PenaltyKind.OLS else fit.support
    sigma = se = None
    try:
        sigma = estimate_sigma_eps(data.Y, d_hat, fit.beta, support.size)
        se = standard_errors(d_hat[:, support], sigma, data.n)
    except HdivError as exc:
        report["inference"].append(str(exc))

    return TwoStageFit(
        alpha_hat=first_stage.alpha_hat,
        d_hat=d_hat,
        beta_hat=fit.beta,
        support_beta=support,
        sigma_eps_hat=sigma,
        std_errors=se,
        lambda_stage1=first_stage.lambdas,
        lambda_stage2=lam2,
        method=method,
        converged=bool(first_stage.converged.all() and fit.converged),
        initial_beta=init,
        report=report,
    )


def write_fit_report(fit: TwoStageFit, path) -> None:
    """CSV ``index,estimate,std_error,z_stat,selected`` with 1-based indices."""
    se = np.full(fit.beta_hat.shape, np.nan)
    if fit.std_errors is not None:
        se[fit.support_beta] = fit.std_errors
    selected = np.zeros(fit.beta_hat.shape, dtype=bool)
    selected[fit.support_beta] = True
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "estimate", "std_error", "z_stat", "selected"])
        for j, (b, s, sel) in enumerate(zip(fit.beta_hat, se, selected), start=1):
            if np.isnan(s):
                w.writerow([j, repr(float(b)), "", "", int(sel)])
            else:
                w.writerow([j, repr(float(b)), repr(float(s)), repr(float(b / s)), int(sel)])
