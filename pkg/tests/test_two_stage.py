from __future__ import annotations

import csv

import numpy as np
import pytest

from hdiv.dgp import Dataset, SimConfig, build_ground_truth, sample_dataset, simulate, standardize
from hdiv.errors import ConfigError, DegreesOfFreedomError, SingularGramError
from hdiv.solvers import PenaltyKind, ols_fit
from hdiv.two_stage import (
    Method,
    estimate_sigma_eps,
    fit_first_stage,
    fit_second_stage,
    predict_conditional_means,
    run_two_stage,
    standard_errors,
    write_fit_report,
)


def noiseless(seed=0, n=80):
    cfg = SimConfig(n=n, p_x=10, p_z=12, k_x=3, sigma_u=1e-8, sigma_v=1e-8)
    rng = np.random.default_rng(seed)
    truth = build_ground_truth(cfg, rng)
    return sample_dataset(cfg, truth, rng)


class TestMethod:
    @pytest.mark.parametrize("text,kind,gamma", [
        ("ols", "ols", None), ("LASSO", "lasso", None), ("bridge(0.2)", "bridge", 0.2),
        ("bridge:0.8", "bridge", 0.8), ("adaptive_lasso", "adalasso", None),
    ])
    def test_parse(self, text, kind, gamma):
        m = Method.parse(text)
        assert m.kind is PenaltyKind(kind) and m.gamma == gamma

    def test_default_stage1(self):
        assert Method.parse("adalasso").stage1 is PenaltyKind.LASSO
        assert Method.parse("bridge(0.5)").stage1 is PenaltyKind.BRIDGE
        assert Method.parse("ols").stage1 is PenaltyKind.OLS

    @pytest.mark.parametrize("text", ["bridge", "bridge(1.5)", "lasso(0.3)", "ridge", "b((("])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            Method.parse(text)

    def test_labels(self):
        assert Method.parse("bridge(0.25)").label == "BRIDGE(0.25)"
        assert Method.parse("adalasso").label == "ADALASSO"


class TestFirstStage:
    def test_noiseless_unpenalized(self):
        d = noiseless()
        fs = fit_first_stage(d.Z, d.X - d.X.mean(axis=0), "lasso", lambdas=0.0)
        # standardizing Z rescales the coefficients by the instrument scales
        oracle, *_ = np.linalg.lstsq(d.Z, d.X - d.X.mean(axis=0), rcond=None)
        np.testing.assert_allclose(fs.alpha_hat, oracle, atol=1e-6)

    def test_zero_column(self):
        d = simulate(SimConfig(), 1)
        X = d.X.copy()
        X[:, 4] = 0
        fs = fit_first_stage(d.Z, X, "bridge", 0.1)
        assert not fs.alpha_hat[:, 4].any()

    def test_ols_first_stage_min_norm(self):
        rng = np.random.default_rng(0)
        Z = rng.standard_normal((10, 15))
        X = rng.standard_normal((10, 3))
        fs = fit_first_stage(Z, X, "ols")
        np.testing.assert_allclose(Z @ fs.alpha_hat, X, atol=1e-10)

    def test_adalasso_not_a_first_stage(self):
        with pytest.raises(ConfigError):
            fit_first_stage(np.eye(3), np.eye(3), "adalasso")


def test_conditional_means():
    rng = np.random.default_rng(2)
    Z = rng.standard_normal((7, 4))
    A = rng.standard_normal((4, 3))
    naive = np.zeros((7, 3))
    for i in range(7):
        for j in range(3):
            for h in range(4):
                naive[i, j] += Z[i, h] * A[h, j]
    np.testing.assert_allclose(predict_conditional_means(Z, A), naive, atol=1e-10)
    assert not predict_conditional_means(Z, np.zeros((4, 3))).any()
    np.testing.assert_array_equal(predict_conditional_means(Z, np.eye(4)[:, :2]), Z[:, :2])


class TestSecondStage:
    def test_noiseless_limit(self):
        d = noiseless(1)
        Xc = d.X - d.X.mean(axis=0)
        fs = fit_first_stage(d.Z, Xc, "lasso", lambdas=0.0)
        D = predict_conditional_means(d.Z, fs.alpha_hat)
        fit, lam, _, _ = fit_second_stage(D, d.Y, Method.parse("bridge(0.5)"), lam=0.0)
        np.testing.assert_allclose(fit.beta, d.truth.beta0, atol=1e-4)

    def test_adalasso_uses_cv_lasso_start(self):
        d = simulate(SimConfig(), 2)
        fs = fit_first_stage(d.Z, d.X, "lasso")
        D = predict_conditional_means(d.Z, fs.alpha_hat)
        _, _, res, init = fit_second_stage(D, d.Y, Method.parse("adalasso"))
        assert init is not None and res is not None
        _, _, _, again = fit_second_stage(D, d.Y, Method.parse("adalasso"))
        np.testing.assert_array_equal(init, again)


class TestSigmaAndErrors:
    def test_zero_residuals(self):
        D = np.eye(3)
        assert estimate_sigma_eps(np.ones(3), D, np.ones(3), 1) == 0.0

    def test_hand_value(self):
        assert estimate_sigma_eps(np.array([1.0, -1.0]), np.zeros((2, 1)), np.zeros(1), 0) == 1.0

    def test_df(self):
        with pytest.raises(DegreesOfFreedomError, match="degrees of freedom"):
            estimate_sigma_eps(np.ones(3), np.eye(3), np.zeros(3), 3)

    def test_identity_gram(self):
        rng = np.random.default_rng(0)
        Q, _ = np.linalg.qr(rng.standard_normal((100, 4)))
        np.testing.assert_allclose(standard_errors(Q * 10, 1.0, 100), 0.1)

    def test_scalar(self):
        d = np.random.default_rng(1).standard_normal((50, 1))
        se = standard_errors(d, 2.0, 50)
        assert se[0] == pytest.approx(2.0 / np.sqrt(d[:, 0] @ d[:, 0]))

    def test_singular(self):
        d = np.random.default_rng(1).standard_normal((50, 1))
        with pytest.raises(SingularGramError, match="singular"):
            standard_errors(np.hstack([d, d]), 1.0, 50)

    @pytest.mark.slow
    def test_sigma_eps_population_value(self):
        cfg = SimConfig(n=5000)
        d = simulate(cfg, 7)
        fit = run_two_stage(d, Method.parse("ols"))
        from hdiv.dgp import build_error_covariance

        s = build_error_covariance(cfg)
        b = d.truth.beta0
        pop = s[0, 0] + b @ s[1:, 1:] @ b + 2 * b @ s[0, 1:]
        assert fit.sigma_eps_hat**2 == pytest.approx(pop, rel=0.10)


class TestPipeline:
    def test_noiseless_recovery(self):
        d = noiseless(3, n=100)
        fit = run_two_stage(d, Method.parse("lasso"), stage1_lambdas=0.0, stage2_lambda=0.0)
        np.testing.assert_allclose(fit.beta_hat, d.truth.beta0, atol=1e-4)
        np.testing.assert_array_equal(fit.d_hat, d.Z @ fit.alpha_hat)

    def test_exact_support_and_se(self):
        d = simulate(SimConfig(), 4)
        fit = run_two_stage(d, Method.parse("bridge(0.5)"))
        np.testing.assert_array_equal(fit.support_beta, np.flatnonzero(fit.beta_hat))
        assert fit.std_errors.shape == fit.support_beta.shape
        assert np.all(fit.std_errors > 0)
        assert fit.lambda_stage1.shape == (30,)

    def test_ols_selects_everything(self):
        d = simulate(SimConfig(), 4)
        fit = run_two_stage(d, Method.parse("ols"))
        np.testing.assert_array_equal(fit.support_beta, np.arange(30))

    def test_requires_standardized(self):
        d = simulate(SimConfig(n=30), 0)
        raw = Dataset(Z=d.Z, X=d.X, Y=d.Y)
        with pytest.raises(ConfigError):
            run_two_stage(raw, Method.parse("lasso"))
        run_two_stage(standardize(raw), Method.parse("lasso"))

    def test_oracle_equivalence(self):
        # perfect first stage plus unpenalized stage 2 on the true support
        # equals textbook 2SLS with the relevant instruments
        d = simulate(SimConfig(n=200), 5)
        S = d.truth.support_beta
        A = np.unique(np.concatenate([d.truth.support_alpha[j] for j in S]))
        ZA, XS = d.Z[:, A], d.X[:, S]
        fs = fit_first_stage(ZA, XS, "lasso", lambdas=0.0)
        D = predict_conditional_means(ZA, fs.alpha_hat)
        beta = ols_fit(D, d.Y).beta
        P = ZA @ np.linalg.solve(ZA.T @ ZA, ZA.T)
        tsls = np.linalg.solve(XS.T @ P @ XS, XS.T @ P @ d.Y)
        np.testing.assert_allclose(beta, tsls, atol=1e-8)

    def test_report_csv(self, tmp_path):
        d = simulate(SimConfig(), 6)
        fit = run_two_stage(d, Method.parse("lasso"))
        path = tmp_path / "r.csv"
        write_fit_report(fit, path)
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["index", "estimate", "std_error", "z_stat", "selected"]
        assert len(rows) == 31
        sel = [int(r[0]) - 1 for r in rows[1:] if r[4] == "1"]
        np.testing.assert_array_equal(sel, fit.support_beta)
        for r in rows[1:]:
            if r[4] == "1":
                assert float(r[3]) == pytest.approx(float(r[1]) / float(r[2]))
            else:
                assert r[2] == "" and float(r[1]) == 0.0
