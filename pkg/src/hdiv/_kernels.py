"""Compiled coordinate-descent kernels.

All kernels work on the Gram form of the least-squares loss::

    Q(b) = 0.5 * y'y - c'b + 0.5 * b'Gb,   G = X'X,  c = X'y

and keep the residual correlation ``r = c - G b`` up to date, so one
coordinate update costs O(p) only when the coordinate actually moves.
``G`` must be symmetric; column updates read its rows for contiguity.
"""
from __future__ import annotations

import numpy as np
from numba import njit

LASSO = 0
BRIDGE = 1


@njit(cache=True)
def soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _sweep(G, r, t, beta, active_only):
    p = beta.shape[0]
    max_delta = 0.0
    for j in range(p):
        bj = beta[j]
        if active_only and bj == 0.0:
            continue
        gjj = G[j, j]
        if gjj <= 0.0 or np.isinf(t[j]):
            if bj != 0.0:
                for k in range(p):
                    r[k] += G[j, k] * bj
                beta[j] = 0.0
                if abs(bj) > max_delta:
                    max_delta = abs(bj)
            continue
        new = soft(r[j] + gjj * bj, t[j]) / gjj
        delta = new - bj
        if delta != 0.0:
            for k in range(p):
                r[k] -= G[j, k] * delta
            beta[j] = new
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


@njit(cache=True)
def _cd(G, r, t, beta, tol, max_sweeps):
    sweeps = 0
    while sweeps < max_sweeps:
        delta = _sweep(G, r, t, beta, False)
        sweeps += 1
        if delta < tol:
            return sweeps, True
        while sweeps < max_sweeps:
            delta = _sweep(G, r, t, beta, True)
            sweeps += 1
            if delta < tol:
                break
    return sweeps, False


@njit(cache=True)
def weighted_lasso_cd(G, c, t, beta, tol, max_sweeps):
    """Minimize ``Q(b) + sum_j t_j |b_j|`` in place, starting from ``beta``.

    Coordinates with ``t_j = inf`` are held at zero. Returns
    ``(n_sweeps, converged)``; converged means a full cyclic sweep moved no
    coordinate by ``tol`` or more.
    """
    r = c - G @ beta
    return _cd(G, r, t, beta, tol, max_sweeps)


@njit(cache=True)
def bridge_reweight(G, c, yy, lam, gamma, tau, beta, tol, max_outer, max_sweeps, history):
    """Iterative reweighting for ``Q(b) + lam * sum |b_j|**gamma`` from ``beta``.

    ``history[s]`` receives the surrogate objective after outer step ``s``.
    Returns ``(n_outer, converged, inner_ok)``.
    """
    p = beta.shape[0]
    scale = ((1.0 - gamma) / (tau * gamma)) ** gamma
    expo = 1.0 - 1.0 / gamma
    theta = np.empty(p)
    t = np.empty(p)
    inner_ok = True
    r = c - G @ beta
    for s in range(max_outer):
        for j in range(p):
            theta[j] = scale * abs(beta[j]) ** gamma
            t[j] = theta[j] ** expo if theta[j] > 0.0 else np.inf
        prev = beta.copy()
        _, ok = _cd(G, r, t, beta, tol, max_sweeps)
        inner_ok = inner_ok and ok
        # b'Gb = b'(c - r), so the loss needs no matrix product
        surrogate = 0.5 * yy
        for j in range(p):
            surrogate -= 0.5 * (c[j] + r[j]) * beta[j]
        change = 0.0
        for j in range(p):
            if theta[j] > 0.0:
                surrogate += tau * theta[j]
                if beta[j] != 0.0:
                    surrogate += t[j] * abs(beta[j])
            d = abs(beta[j] - prev[j])
            if d > change:
                change = d
        history[s] = surrogate
        if change < tol:
            return s + 1, True, inner_ok
    return max_outer, False, inner_ok


@njit(cache=True)
def tau_from_lambda(lam, gamma):
    return (lam * gamma**gamma * (1.0 - gamma) ** (1.0 - gamma)) ** (1.0 / (1.0 - gamma))


@njit(cache=True)
def cv_path(Gs, cs, yys, X, y, fold_of, lams, train_scale, kind, gamma, t_base,
            tol, max_sweeps, max_outer):
    """Held-out MSE over a descending lambda grid for every fold.

    ``Gs[f], cs[f]`` hold the training Gram form of fold ``f``; test rows
    are those with ``fold_of == f``. The penalty used on fold ``f`` is
    ``lams[l] * train_scale[f]``. ``t_base`` holds per-coordinate weights for
    the weighted lasso (ones for the plain lasso).

    Returns ``(mse[L, K], ok[L, K])``.
    """
    K = Gs.shape[0]
    L = lams.shape[0]
    p = Gs.shape[1]
    mse = np.zeros((L, K))
    ok = np.zeros((L, K), dtype=np.bool_)
    history = np.empty(max_outer)
    t = np.empty(p)
    for f in range(K):
        G = Gs[f]
        c = cs[f]
        rows = np.flatnonzero(fold_of == f)
        beta = np.zeros(p)
        for l in range(L):
            lam = lams[l] * train_scale[f]
            for j in range(p):
                t[j] = 0.0 if lam == 0.0 or t_base[j] == 0.0 else lam * t_base[j]
            _, conv = weighted_lasso_cd(G, c, t, beta, tol, max_sweeps)
            fit = beta
            if kind == BRIDGE and lam > 0.0:
                fit = beta.copy()
                _, bconv, iok = bridge_reweight(
                    G, c, yys[f], lam, gamma, tau_from_lambda(lam, gamma), fit, tol,
                    max_outer, max_sweeps, history,
                )
                conv = conv and bconv and iok
            nz = np.flatnonzero(fit)
            sse = 0.0
            for i in rows:
                pred = 0.0
                for k in nz:
                    pred += X[i, k] * fit[k]
                e = y[i] - pred
                sse += e * e
            mse[l, f] = sse / rows.shape[0]
            ok[l, f] = conv
    return mse, ok
