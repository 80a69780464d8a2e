"""Advisory checks of the sparsity and design conditions on realized data.

Nothing here is enforced. The conditions are asymptotic, so the numbers
are reported for inspection only. When they are computed from estimated
conditional means ``D_hat`` rather than the true ``D`` the report carries a
``plug_in`` flag.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import TruthUnavailableError

__all__ = [
    "DiagnosticsReport",
    "check_partial_orthogonality",
    "check_zero_consistency",
    "gram_eigen_bounds",
    "diagnose",
    "FULL_GRAM_CAP",
]

FULL_GRAM_CAP = 2000


@dataclass
class DiagnosticsReport:
    """Flat record of diagnostic values; ``None`` marks a skipped quantity."""

    c0_hat: float | None = None
    xi_min: float | None = None
    max_irrelevant_init: float | None = None
    min_relevant_init: float | None = None
    zero_consistent: bool | None = None
    eig_min_full: float | None = None
    eig_max_full: float | None = None
    eig_min_sel: float | None = None
    eig_max_sel: float | None = None
    full_gram_skipped: bool = False
    plug_in: bool = True

    def to_text(self) -> str:
        """``key=value`` lines; skipped values print as ``NA``."""
        lines = []
        for key, val in asdict(self).items():
            if val is None:
                txt = "NA"
            elif isinstance(val, bool):
                txt = str(val).lower()
            else:
                txt = repr(float(val))
            lines.append(f"{key}={txt}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DiagnosticsReport":
        kwargs = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, val = line.partition("=")
            if val == "NA":
                kwargs[key] = None
            elif val in ("true", "false"):
                kwargs[key] = val == "true"
            else:
                kwargs[key] = float(val)
        return cls(**kwargs)


def check_partial_orthogonality(D, beta0, support) -> tuple[float, float]:
    """Cross-correlation between irrelevant and relevant columns.

    Returns
    -------
    c0_hat : float
        ``max_{j not in S, k in S} |n**-0.5 * sum_i D_ij D_ik|``; 0 when
        every column is relevant.
    xi_min : float
        ``min_{k in S} |n**-1 * sum_i (D_1i' beta_10) D_ik|``.
    """
    D = np.asarray(D, dtype=float)
    n, p = D.shape
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise ValueError("support must be nonempty")
    rest = np.setdiff1d(np.arange(p), support)
    D1 = D[:, support]
    if rest.size:
        c0 = float(np.abs(D[:, rest].T @ D1).max() / np.sqrt(n))
    else:
        c0 = 0.0
    signal = D1 @ np.asarray(beta0, dtype=float)[support]
    xi = np.abs(signal @ D1) / n
    return c0, float(xi.min())


def check_zero_consistency(initial_beta, truth_support, b1, xi_b=0.1):
    """Size of the initial estimate off and on the true support.

    Returns ``(max_irrelevant_init, min_relevant_init, ok)`` where ``ok`` is
    ``min_relevant_init >= xi_b * b1``.

    Raises
    ------
    TruthUnavailableError
        If ``truth_support`` is ``None`` (ingested data).
    """
    if truth_support is None:
        raise TruthUnavailableError("truth unavailable: zero-consistency needs the true support")
    b = np.abs(np.asarray(initial_beta, dtype=float))
    s = np.asarray(truth_support, dtype=int)
    rest = np.setdiff1d(np.arange(b.size), s)
    max_irr = float(b[rest].max()) if rest.size else 0.0
    min_rel = float(b[s].min()) if s.size else np.inf
    return max_irr, min_rel, bool(min_rel >= xi_b * b1)


def _extremes(gram):
    if gram.shape[0] == 0:
        return None, None
    ev = np.linalg.eigvalsh(gram)
    return float(ev[0]), float(ev[-1])


def gram_eigen_bounds(D_hat, support, cap=FULL_GRAM_CAP):
    """Extreme eigenvalues of ``D_hat'D_hat / n`` and of its selected block.

    Returns ``(eig_min_full, eig_max_full, eig_min_sel, eig_max_sel)``. The
    full pair is ``(None, None)`` when ``p > cap``, and the selected pair is
    ``(None, None)`` for an empty support.
    """
    D = np.asarray(D_hat, dtype=float)
    n, p = D.shape
    support = np.asarray(support, dtype=int)
    Ds = D[:, support]
    sel = _extremes(Ds.T @ Ds / n)
    full = (None, None) if p > cap else _extremes(D.T @ D / n)
    return full + sel


def diagnose(d_hat, support_hat, beta0=None, truth_support=None, initial_beta=None,
             xi_b=0.1, plug_in=True) -> DiagnosticsReport:
    """Collect every diagnostic that the available inputs allow."""
    rep = DiagnosticsReport(plug_in=plug_in)
    e = gram_eigen_bounds(d_hat, support_hat)
    rep.eig_min_full, rep.eig_max_full, rep.eig_min_sel, rep.eig_max_sel = e
    rep.full_gram_skipped = np.asarray(d_hat).shape[1] > FULL_GRAM_CAP
    if beta0 is not None and truth_support is not None and len(truth_support):
        rep.c0_hat, rep.xi_min = check_partial_orthogonality(d_hat, beta0, truth_support)
        if initial_beta is not None:
            b1 = float(np.abs(np.asarray(beta0)[truth_support]).min())
            rep.max_irrelevant_init, rep.min_relevant_init, rep.zero_consistent = (
                check_zero_consistency(initial_beta, truth_support, b1, xi_b)
            )
    return rep
