"""Simulated two-stage data and the normalization applied to every dataset.

The simulated design follows the sparse instrumental-variables setup::

    X = Z alpha + V          (first stage, one equation per covariate)
    Y = X beta0 + u          (second stage)

with Toeplitz-correlated relevant instruments and jointly normal ``(u, v)``
errors. Two instrument designs are available:

``diagonal`` (default)
    Covariate ``j`` is instrumented by instrument ``j`` alone, for every
    covariate that has a matching instrument.
``block``
    The ``k_x`` relevant covariates share the ``k_x`` relevant instruments
    through a dense ``k_x x k_x`` block of ``alpha``; the other covariates
    are pure noise.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DegenerateInstrumentError,
    InsufficientInstrumentsError,
    NotPositiveDefiniteError,
    SchemaError,
)

__all__ = [
    "SimConfig",
    "GroundTruth",
    "Dataset",
    "build_ground_truth",
    "build_instrument_covariance",
    "build_error_covariance",
    "sample_dataset",
    "simulate",
    "standardize",
    "load_csv",
    "write_csv",
]

DESIGNS = ("diagonal", "block")


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulation scenario.

    Parameters
    ----------
    n : int
        Sample size.
    p_x, p_z : int
        Number of second-stage covariates and of instruments.
    k_x : int
        Number of relevant second-stage covariates.
    rho : float
        Toeplitz correlation among the relevant instruments.
    sigma_u, sigma_v : float
        Standard deviations of the second- and first-stage errors.
    sigma_uv_high, sigma_uv_low : float
        Correlations between ``u`` and the first-stage errors of the
        relevant covariates (first half get the high value, the rest the
        low value, irrelevant covariates are exogenous).
    gamma1, gamma2 : float
        Default BRIDGE exponents for stage 1 and stage 2.
    coef_low, coef_high : float
        Range of nonzero coefficient magnitudes.
    alpha_noise_sd : float
        Standard deviation of the jitter added to the nonzero first-stage
        coefficients.
    instrument_design : {"diagonal", "block"}
        Layout of the nonzero first-stage coefficients.
    n_sims : int
        Number of Monte Carlo replications.
    base_seed : int
        Replication ``r`` uses seed ``base_seed + r``.
    """

    n: int = 120
    p_x: int = 30
    p_z: int = 30
    k_x: int = 6
    rho: float = 0.7
    sigma_u: float = math.sqrt(0.5)
    sigma_v: float = math.sqrt(0.5)
    sigma_uv_high: float = 0.4
    sigma_uv_low: float = 0.15
    gamma1: float = 0.1
    gamma2: float = 0.5
    coef_low: float = 0.5
    coef_high: float = 5.0
    alpha_noise_sd: float = 0.01
    instrument_design: str = "diagonal"
    n_sims: int = 200
    base_seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.p_x < 1 or self.p_z < 1:
            raise ConfigError("p_x and p_z must be positive")
        if self.k_x < 1 or self.k_x > self.p_x:
            raise ConfigError(f"k_x must lie in [1, p_x], got {self.k_x}")
        if not abs(self.rho) < 1:
            raise ConfigError(f"|rho| must be < 1, got {self.rho}")
        for name in ("gamma1", "gamma2"):
            g = getattr(self, name)
            if not 0 < g < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {g}")
        if not 0 < self.coef_low <= self.coef_high:
            raise ConfigError("need 0 < coef_low <= coef_high")
        if self.sigma_u <= 0 or self.sigma_v <= 0:
            raise ConfigError("sigma_u and sigma_v must be positive")
        if self.alpha_noise_sd < 0:
            raise ConfigError("alpha_noise_sd must be nonnegative")
        if self.n_sims < 1:
            raise ConfigError("n_sims must be >= 1")
        if self.instrument_design not in DESIGNS:
            raise ConfigError(
                f"instrument_design must be one of {DESIGNS}, got {self.instrument_design!r}"
            )

    def replication_seed(self, r: int) -> int:
        return self.base_seed + r


@dataclass(frozen=True)
class GroundTruth:
    alpha: np.ndarray
    beta0: np.ndarray
    support_beta: np.ndarray
    support_alpha: list = field(default_factory=list)


@dataclass(frozen=True)
class Dataset:
    Z: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    truth: GroundTruth | None = None
    standardized: bool = False

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def p_x(self) -> int:
        return self.X.shape[1]

    @property
    def p_z(self) -> int:
        return self.Z.shape[1]


def _signed_uniform(rng, size, low, high):
    mag = rng.uniform(low, high, size=size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return sign * mag


def build_ground_truth(cfg: SimConfig, rng: np.random.Generator) -> GroundTruth:
    """Draw first- and second-stage coefficients.

    The first ``k_x`` covariates are the relevant ones. With the diagonal
    design, covariates past ``p_z`` have no relevant instrument and a zero
    first-stage column. With the block design, ``alpha[:k_x, :k_x]`` is dense
    and every other entry is zero.
    """
    if cfg.k_x > cfg.p_z:
        raise InsufficientInstrumentsError(
            f"insufficient instruments: k_x={cfg.k_x} relevant covariates but p_z={cfg.p_z}"
        )
    alpha = np.zeros((cfg.p_z, cfg.p_x))
    if cfg.instrument_design == "block":
        k = cfg.k_x
        block = _signed_uniform(rng, (k, k), cfg.coef_low, cfg.coef_high)
        alpha[:k, :k] = block + cfg.alpha_noise_sd * rng.standard_normal((k, k))
    else:
        m = min(cfg.p_x, cfg.p_z)
        diag = _signed_uniform(rng, m, cfg.coef_low, cfg.coef_high)
        diag = diag + cfg.alpha_noise_sd * rng.standard_normal(m)
        alpha[np.arange(m), np.arange(m)] = diag

    beta0 = np.zeros(cfg.p_x)
    beta0[: cfg.k_x] = _signed_uniform(rng, cfg.k_x, cfg.coef_low, cfg.coef_high)

    support_alpha = [np.flatnonzero(alpha[:, j]) for j in range(cfg.p_x)]
    return GroundTruth(
        alpha=alpha,
        beta0=beta0,
        support_beta=np.flatnonzero(beta0),
        support_alpha=support_alpha,
    )


def build_instrument_covariance(cfg: SimConfig) -> np.ndarray:
    """Toeplitz block ``rho**|j-k|`` on the relevant instruments, identity elsewhere."""
    sigma = np.eye(cfg.p_z)
    k = min(cfg.k_x, cfg.p_z)
    idx = np.arange(k)
    sigma[:k, :k] = cfg.rho ** np.abs(idx[:, None] - idx[None, :])
    return sigma


def error_cross_covariance(cfg: SimConfig) -> np.ndarray:
    """Covariances ``Cov(u, v_j)`` for ``j = 1..p_x``."""
    n_high = math.ceil(cfg.k_x / 2)
    corr = np.zeros(cfg.p_x)
    corr[:n_high] = cfg.sigma_uv_high
    corr[n_high : cfg.k_x] = cfg.sigma_uv_low
    return corr * cfg.sigma_u * cfg.sigma_v


def build_error_covariance(cfg: SimConfig, truth: GroundTruth | None = None) -> np.ndarray:
    """Joint covariance of ``(u, v_1, ..., v_px)``.

    Raises
    ------
    NotPositiveDefiniteError
        If the Cholesky factorization fails.
    """
    s_uv = error_cross_covariance(cfg)
    sigma = np.zeros((1 + cfg.p_x, 1 + cfg.p_x))
    sigma[0, 0] = cfg.sigma_u**2
    sigma[0, 1:] = s_uv
    sigma[1:, 0] = s_uv
    sigma[1:, 1:] = cfg.sigma_v**2 * np.eye(cfg.p_x)
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            "error covariance is not positive definite; "
            f"check sigma_u={cfg.sigma_u}, sigma_v={cfg.sigma_v}, "
            f"sigma_uv=({cfg.sigma_uv_high}, {cfg.sigma_uv_low})"
        ) from exc
    return sigma


def sample_dataset(cfg: SimConfig, truth: GroundTruth, rng: np.random.Generator) -> Dataset:
    sigma_z = build_instrument_covariance(cfg)
    sigma_uv = build_error_covariance(cfg, truth)
    lz = np.linalg.cholesky(sigma_z)
    luv = np.linalg.cholesky(sigma_uv)

    Z = rng.standard_normal((cfg.n, cfg.p_z)) @ lz.T
    errors = rng.standard_normal((cfg.n, 1 + cfg.p_x)) @ luv.T
    u = errors[:, 0]
    V = errors[:, 1:]
    X = Z @ truth.alpha + V
    Y = X @ truth.beta0 + u
    return standardize(Dataset(Z=Z, X=X, Y=Y, truth=truth))


def simulate(cfg: SimConfig, seed: int) -> Dataset:
    """Ground truth and one sample drawn from a single seeded generator."""
    rng = np.random.default_rng(seed)
    truth = build_ground_truth(cfg, rng)
    return sample_dataset(cfg, truth, rng)


def standardize(data: Dataset) -> Dataset:
    """Center ``Y`` and scale every instrument to mean 0, mean square 1.

    ``X`` is left as is. A dataset already flagged as standardized is
    returned unchanged.
    """
    if data.standardized:
        return data
    Z = np.asarray(data.Z, dtype=float)
    n = Z.shape[0]
    if n < 2:
        raise DegenerateInstrumentError("need at least two observations")
    Zc = Z - Z.mean(axis=0)
    scale = np.sqrt((Zc**2).sum(axis=0) / n)
    bad = np.flatnonzero(~(scale > 0))
    if bad.size:
        raise DegenerateInstrumentError(
            f"degenerate instrument: column z{bad[0] + 1} has zero variance"
        )
    Zs = Zc / scale
    Y = np.asarray(data.Y, dtype=float)
    return replace(data, Z=Zs, Y=Y - Y.mean(), X=np.asarray(data.X, dtype=float), standardized=True)


def _expected_header(p_x, p_z):
    return ["y"] + [f"x{j}" for j in range(1, p_x + 1)] + [f"z{h}" for h in range(1, p_z + 1)]


def load_csv(path) -> Dataset:
    """Read a dataset with header ``y,x1..x{p_x},z1..z{p_z}``.

    The result carries no ground truth and is standardized on load.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [row for row in reader if row]

    if not header or header[0] != "y":
        raise SchemaError(f"{path}: first column must be 'y', got {header[0]!r}")
    p_x = sum(1 for h in header if h.startswith("x"))
    p_z = len(header) - 1 - p_x
    if p_x < 1 or p_z < 1:
        raise SchemaError(f"{path}: need at least one x and one z column")
    for got, want in zip(header, _expected_header(p_x, p_z)):
        if got != want:
            raise SchemaError(f"{path}: unexpected column {got!r} (expected {want!r})")

    values = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path}: line {i} has {len(row)} fields, expected {len(header)}")
        for k, cell in enumerate(row):
            try:
                values[i - 2, k] = float(cell)
            except ValueError:
                raise SchemaError(
                    f"{path}: line {i}, column {header[k]!r}: non-numeric value {cell!r}"
                ) from None
    if not np.all(np.isfinite(values)):
        raise SchemaError(f"{path}: non-finite values")

    data = Dataset(Z=values[:, 1 + p_x :], X=values[:, 1 : 1 + p_x], Y=values[:, 0])
    return standardize(data)


def write_csv(data: Dataset, path) -> None:
    """Write ``data`` in the ingestion schema with round-trip float precision."""
    header = _expected_header(data.p_x, data.p_z)
    table = np.column_stack([data.Y, data.X, data.Z])
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in table:
            writer.writerow([repr(float(v)) for v in row])
