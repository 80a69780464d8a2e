"""Penalty-level selection by k-fold cross-validation."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import ConfigError, TooFewObservationsError
from .solvers import MAX_OUTER, MAX_SWEEPS, TOL, PenaltyKind

__all__ = ["CvSpec", "CvResult", "FoldCache", "kfold_split", "lambda_grid", "cv_select",
           "write_cv_curve"]


@dataclass(frozen=True)
class CvSpec:
    n_folds: int = 5
    grid_size: int = 50
    grid_min_ratio: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.n_folds < 2:
            raise ConfigError(f"n_folds must be >= 2, got {self.n_folds}")
        if self.grid_size < 1:
            raise ConfigError(f"grid_size must be >= 1, got {self.grid_size}")
        if not 0 < self.grid_min_ratio < 1:
            raise ConfigError(f"grid_min_ratio must lie in (0, 1), got {self.grid_min_ratio}")


@dataclass
class CvResult:
    lam: float
    lambdas: np.ndarray
    cv_mse: np.ndarray
    n_folds_used: np.ndarray

    @property
    def index(self) -> int:
        return int(np.flatnonzero(self.lambdas == self.lam)[0])


def _fold_labels(n, spec: CvSpec):
    if n < spec.n_folds:
        raise TooFewObservationsError(
            f"too few observations: n={n} < n_folds={spec.n_folds}"
        )
    perm = np.random.default_rng(spec.seed).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    labels[perm] = np.arange(n) % spec.n_folds
    return labels


def kfold_split(n: int, spec: CvSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded partition of ``range(n)`` into ``n_folds`` test sets.

    Test-set sizes differ by at most one.
    """
    labels = _fold_labels(n, spec)
    return [(np.flatnonzero(labels != f), np.flatnonzero(labels == f))
            for f in range(spec.n_folds)]


def lambda_max(X, y, weights=None) -> float:
    """Smallest penalty at which the zero vector solves the (weighted) lasso."""
    score = np.abs(np.asarray(X).T @ np.asarray(y))
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        keep = w > 0
        if np.any(score[~keep] > 0):
            return np.inf
        score = score[keep] / w[keep]
    return float(score.max()) if score.size else 0.0


def lambda_grid(X, y, spec: CvSpec, weights=None) -> np.ndarray:
    """Descending geometric grid from ``lambda_max`` to ``grid_min_ratio * lambda_max``."""
    top = lambda_max(X, y, weights)
    if top == 0:
        return np.zeros(1)
    if spec.grid_size == 1:
        return np.array([top])
    return top * np.geomspace(1.0, spec.grid_min_ratio, spec.grid_size)


class FoldCache:
    """Training-fold Gram matrices of one design, shared across responses."""

    def __init__(self, X, spec: CvSpec):
        self.X = np.ascontiguousarray(X, dtype=float)
        self.spec = spec
        n, p = self.X.shape
        self.labels = _fold_labels(n, spec)
        K = spec.n_folds
        self.grams = np.empty((K, p, p))
        self.train_scale = np.empty(K)
        self._train = []
        for f in range(K):
            tr = self.labels != f
            Xt = self.X[tr]
            self.grams[f] = Xt.T @ Xt
            self.train_scale[f] = tr.sum() / n
            self._train.append(tr)

    def cross(self, Y):
        """Per-fold ``X_train' Y_train``; shape ``(K, p)`` or ``(K, p, m)``."""
        Y = np.asarray(Y, dtype=float)
        return np.stack([self.X[tr].T @ Y[tr] for tr in self._train])

    def sq_norms(self, y):
        return np.array([float(y[tr] @ y[tr]) for tr in self._train])


def cv_select(X, y, kind, spec: CvSpec = CvSpec(), gamma=None, weights=None, grid=None,
              cache: FoldCache | None = None, cross=None, tol=TOL) -> CvResult:
    """Pick the penalty level with the smallest mean held-out MSE.

    Parameters
    ----------
    kind : PenaltyKind or str
        ``lasso``, ``bridge`` or ``adalasso`` (the latter needs ``weights``).
        ``ols`` has nothing to tune and returns ``lam = 0``.
    gamma : float, optional
        Bridge exponent.
    weights : ndarray, optional
        Per-coordinate lasso weights.
    grid : ndarray, optional
        Penalty levels to try, in descending order. Defaults to
        :func:`lambda_grid`.
    cache, cross : optional
        Precomputed :class:`FoldCache` for ``X`` and its ``cross(y)``.

    Notes
    -----
    Fold ``f`` is fitted with penalty ``lam * n_train / n`` so the penalty
    per observation matches a fit on the full sample. Fits that fail to
    converge are dropped from their fold's average; a penalty level
    losing more than half of its folds is not eligible. Ties go to the
    larger penalty.
    """
    kind = PenaltyKind(kind)
    X = np.asarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if kind is PenaltyKind.OLS:
        return CvResult(0.0, np.zeros(1), np.full(1, np.nan), np.zeros(1, dtype=int))
    if kind is PenaltyKind.ADALASSO and weights is None:
        raise ConfigError("adaptive lasso needs weights")
    if cache is None:
        cache = FoldCache(X, spec)
    if cross is None:
        cross = cache.cross(y)
    if grid is None:
        grid = lambda_grid(X, y, spec, weights=weights)
    grid = np.asarray(grid, dtype=float)

    t_base = np.ones(X.shape[1]) if weights is None else np.asarray(weights, dtype=float)
    code = _kernels.BRIDGE if kind is PenaltyKind.BRIDGE else _kernels.LASSO
    mse, ok = _kernels.cv_path(
        cache.grams, np.ascontiguousarray(cross), cache.sq_norms(y), cache.X, y,
        cache.labels, grid, cache.train_scale, code, float(gamma or 0.5), t_base,
        tol, MAX_SWEEPS, MAX_OUTER,
    )
    used = ok.sum(axis=1)
    with np.errstate(invalid="ignore"):
        curve = np.where(ok, mse, 0.0).sum(axis=1) / used
    eligible = used * 2 >= spec.n_folds
    if not eligible.any():
        eligible = used > 0
    score = np.where(eligible, curve, np.inf)
    best = int(np.argmin(score))
    return CvResult(float(grid[best]), grid, curve, used)


def write_cv_curve(result: CvResult, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "cv_mse", "n_folds_used"])
        for lam, err, k in zip(result.lambdas, result.cv_mse, result.n_folds_used):
            w.writerow([repr(float(lam)), repr(float(err)), int(k)])
