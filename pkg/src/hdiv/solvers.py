"""Single-equation penalized least-squares solvers.

Every penalized objective uses the convention ``0.5 * RSS + penalty``:

* lasso (optionally weighted): ``lam * sum_j w_j |b_j|``
* bridge: ``lam * sum_j |b_j|**gamma`` with ``0 < gamma < 1``
* adaptive lasso: weighted lasso with ``w_j = 1 / max(|b~_j|, floor)``

Penalized solvers write literal zeros, so the reported support is exactly
the set of nonzero coefficients.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError

__all__ = [
    "PenaltyKind",
    "PenaltySpec",
    "FitResult",
    "BridgeState",
    "soft_threshold",
    "ols_fit",
    "lasso_cd",
    "lambda_to_tau",
    "tau_to_lambda",
    "bridge_state",
    "bridge_fit",
    "adaptive_lasso_fit",
    "lasso_objective",
    "bridge_objective",
    "fit_penalized",
]

TOL = 1e-6
MAX_SWEEPS = 10_000
MAX_OUTER = 200
WEIGHT_FLOOR = 1e-6


class PenaltyKind(str, enum.Enum):
    OLS = "ols"
    LASSO = "lasso"
    BRIDGE = "bridge"
    ADALASSO = "adalasso"


@dataclass(frozen=True)
class PenaltySpec:
    kind: PenaltyKind
    lam: float = 0.0
    gamma: float | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind(self.kind))
        if not self.lam >= 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.kind is PenaltyKind.BRIDGE:
            if self.gamma is None or not 0 < self.gamma < 1:
                raise ConfigError(f"bridge needs 0 < gamma < 1, got {self.gamma}")
        if self.kind is PenaltyKind.ADALASSO and self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if not (np.all(np.isfinite(w)) and np.all(w >= 0)):
                raise ConfigError("adaptive lasso weights must be finite and >= 0")


@dataclass
class FitResult:
    beta: np.ndarray
    support: np.ndarray
    objective: float
    outer_iterations: int
    converged: bool
    history: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class BridgeState:
    """Auxiliary variables of the bridge surrogate at a given coefficient vector."""

    theta: np.ndarray
    tau: float
    gamma: float
    frozen: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """Per-coordinate l1 weights ``theta**(1 - 1/gamma)``; inf where frozen."""
        with np.errstate(divide="ignore"):
            return np.where(self.theta > 0, self.theta ** (1 - 1 / self.gamma), np.inf)


def soft_threshold(z, t):
    """``sign(z) * max(|z| - t, 0)``."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _support(beta):
    return np.flatnonzero(beta)


def ols_fit(X, y) -> FitResult:
    """Least squares; minimum-norm solution when ``X`` is rank deficient."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return FitResult(
        beta=beta,
        support=np.arange(X.shape[1]),
        objective=0.5 * float(resid @ resid),
        outer_iterations=1,
        converged=True,
    )


def lasso_objective(X, y, beta, lam, weights=None) -> float:
    resid = y - X @ beta
    w = np.ones_like(beta) if weights is None else weights
    pen = np.where(beta != 0, w * np.abs(beta), 0.0).sum()
    return 0.5 * float(resid @ resid) + lam * float(pen)


def bridge_objective(X, y, beta, lam, gamma) -> float:
    resid = y - X @ beta
    return 0.5 * float(resid @ resid) + lam * float(np.sum(np.abs(beta) ** gamma))


def _thresholds(lam, weights, p):
    if weights is None:
        return np.full(p, float(lam))
    w = np.asarray(weights, dtype=float)
    if w.shape != (p,):
        raise ValueError(f"weights must have shape ({p},), got {w.shape}")
    if lam == 0:
        return np.zeros(p)
    return lam * w


def _gram(X, y):
    return X.T @ X, X.T @ y, float(y @ y)


def _lasso_gram(G, c, t, tol, max_iter, beta_init=None):
    beta = np.zeros(c.shape[0]) if beta_init is None else np.array(beta_init, dtype=float)
    sweeps, converged = _kernels.weighted_lasso_cd(G, c, t, beta, tol, max_iter)
    return beta, sweeps, converged


def lasso_cd(X, y, lam, weights=None, tol=TOL, max_iter=MAX_SWEEPS, beta_init=None) -> FitResult:
    """Cyclic coordinate descent for the (weighted) lasso.

    Parameters
    ----------
    X : ndarray, shape (n, p)
    y : ndarray, shape (n,)
    lam : float
        Penalty level, ``>= 0``.
    weights : ndarray, optional
        Nonnegative per-coordinate weights; defaults to ones.
    tol : float
        Stop once a full sweep moves no coefficient by ``tol`` or more.
    max_iter : int
        Maximum number of sweeps. Reaching it sets ``converged=False``.
    beta_init : ndarray, optional
        Warm start.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    G, c, _ = _gram(X, y)
    t = _thresholds(lam, weights, X.shape[1])
    beta, sweeps, converged = _lasso_gram(G, c, t, tol, max_iter, beta_init)
    return FitResult(
        beta=beta,
        support=_support(beta),
        objective=lasso_objective(X, y, beta, lam, weights),
        outer_iterations=sweeps,
        converged=converged,
    )


def lambda_to_tau(lam, gamma) -> float:
    """Penalty level of the bridge surrogate that matches ``lam``.

    Inverse of ``lam = tau**(1 - gamma) * gamma**(-gamma) * (1 - gamma)**(gamma - 1)``,
    the relation under which minimizing the surrogate over ``theta`` gives
    back ``lam * |b|**gamma`` exactly.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return float(_kernels.tau_from_lambda(float(lam), float(gamma)))


def tau_to_lambda(tau, gamma) -> float:
    return tau ** (1 - gamma) * gamma ** (-gamma) * (1 - gamma) ** (gamma - 1)


def bridge_state(beta, lam, gamma) -> BridgeState:
    """Minimizing ``theta`` of the surrogate for fixed ``beta``."""
    tau = lambda_to_tau(lam, gamma)
    theta = ((1 - gamma) / (tau * gamma)) ** gamma * np.abs(beta) ** gamma
    return BridgeState(theta=theta, tau=tau, gamma=gamma, frozen=np.flatnonzero(theta == 0))


def _bridge_gram(G, c, yy, lam, gamma, tol, max_iter, inner_max_iter, beta_init):
    beta = np.array(beta_init, dtype=float)
    if not beta.any():
        return beta, 0, True, np.empty(0)
    history = np.empty(max_iter)
    n_outer, converged, inner_ok = _kernels.bridge_reweight(
        G, c, yy, float(lam), float(gamma), lambda_to_tau(lam, gamma), beta,
        tol, max_iter, inner_max_iter, history,
    )
    return beta, n_outer, converged and inner_ok, history[:n_outer].copy()


def bridge_fit(X, y, lam, gamma, tol=TOL, max_iter=MAX_OUTER, inner_max_iter=MAX_SWEEPS,
               beta_init=None) -> FitResult:
    """Bridge regression by iterative reweighting from the lasso estimate.

    Each outer step recomputes the auxiliary ``theta`` from the previous
    coefficients and solves the resulting weighted lasso. A coordinate that
    reaches zero stays at zero. ``history`` holds the surrogate objective
    after every outer step; it is non-increasing.

    With ``lam == 0`` the problem is plain least squares and
    :func:`ols_fit` is returned.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam == 0:
        return ols_fit(X, y)
    G, c, yy = _gram(X, y)
    if beta_init is None:
        t = np.full(X.shape[1], float(lam))
        beta_init, _, _ = _lasso_gram(G, c, t, tol, inner_max_iter)
    beta, n_outer, converged, history = _bridge_gram(
        G, c, yy, lam, gamma, tol, max_iter, inner_max_iter, beta_init
    )
    return FitResult(
        beta=beta,
        support=_support(beta),
        objective=bridge_objective(X, y, beta, lam, gamma),
        outer_iterations=n_outer,
        converged=converged,
        history=history,
    )


def adaptive_weights(initial_beta, weight_floor=WEIGHT_FLOOR) -> np.ndarray:
    return 1.0 / np.maximum(np.abs(np.asarray(initial_beta, dtype=float)), weight_floor)


def adaptive_lasso_fit(X, y, lam, initial_beta, weight_floor=WEIGHT_FLOOR, tol=TOL,
                       max_iter=MAX_SWEEPS) -> FitResult:
    """Weighted lasso with weights ``1 / max(|initial_beta_j|, weight_floor)``."""
    X = np.asarray(X, dtype=float)
    initial_beta = np.asarray(initial_beta, dtype=float)
    if initial_beta.shape != (X.shape[1],):
        raise ValueError("initial_beta must have one entry per column of X")
    w = adaptive_weights(initial_beta, weight_floor)
    return lasso_cd(X, y, lam, weights=w, tol=tol, max_iter=max_iter)


def fit_penalized(X, y, penalty: PenaltySpec, tol=TOL) -> FitResult:
    """Dispatch on ``penalty.kind``."""
    kind = penalty.kind
    if kind is PenaltyKind.OLS:
        return ols_fit(X, y)
    if kind is PenaltyKind.LASSO:
        return lasso_cd(X, y, penalty.lam, tol=tol)
    if kind is PenaltyKind.BRIDGE:
        return bridge_fit(X, y, penalty.lam, penalty.gamma, tol=tol)
    if penalty.weights is None:
        raise ConfigError("adaptive lasso needs weights")
    return lasso_cd(X, y, penalty.lam, weights=penalty.weights, tol=tol)


def solve_gram(G, c, yy, kind, lam, gamma=None, weights=None, tol=TOL):
    """Fit from the Gram form ``(X'X, X'y, y'y)``; returns ``(beta, converged)``.

    Used when many responses share one design. ``ols`` is not supported
    here because the minimum-norm solution needs the design itself.
    """
    kind = PenaltyKind(kind)
    p = c.shape[0]
    if kind is PenaltyKind.OLS:
        raise ValueError("solve_gram does not handle ols")
    t = _thresholds(lam, weights if kind is PenaltyKind.ADALASSO else None, p)
    beta, _, converged = _lasso_gram(G, c, t, tol, MAX_SWEEPS)
    if kind is PenaltyKind.BRIDGE and lam > 0:
        beta, _, bconv, _ = _bridge_gram(G, c, yy, lam, gamma, tol, MAX_OUTER, MAX_SWEEPS, beta)
        converged = converged and bconv
    return beta, converged
