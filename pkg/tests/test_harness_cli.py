from __future__ import annotations

import csv

import numpy as np
import pytest

from hdiv import cli
from hdiv.dgp import SimConfig, simulate, write_csv
from hdiv.errors import ConfigError
from hdiv.harness import (
    TABLE_HEADER,
    ResultRow,
    ResultTable,
    emit_table,
    parse_scenario,
    preset_scenarios,
    read_table_csv,
    resolve_parallelism,
    run_scenario,
)
from hdiv.two_stage import Method, run_two_stage

SMOKE = """
# tiny scenario
scenario = smoke
n = 60
p_x = 8
p_z = 8
k_x = 2
n_sims = 3
methods = ols, lasso, bridge(0.5)
"""


class TestConfig:
    def test_parse(self):
        cfg = parse_scenario(SMOKE + "cv_folds = 4\nparallelism = 2\nstage1 = lasso\n")
        assert cfg.name == "smoke" and cfg.sim.n == 60 and cfg.sim.k_x == 2
        assert [m.label for m in cfg.methods] == ["OLS", "LASSO", "BRIDGE(0.5)"]
        assert cfg.cv.n_folds == 4 and cfg.parallelism == 2
        assert cfg.methods[2].stage1.value == "lasso"

    def test_default_gamma_from_sim(self):
        cfg = parse_scenario("methods = bridge\ngamma2 = 0.3\n")
        assert cfg.methods[0].gamma == 0.3

    @pytest.mark.parametrize("text", [
        "methods = lasso\nfoo = 1\n", "n = 60\n", "methods = lasso\nn = abc\n",
        "methods = \n", "methods = lasso\njust text\n", "methods = lasso\nk_x = 99\n",
        "methods = lasso\nstage1 = ridge\n",
    ])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_scenario(text)

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("HDIV_THREADS", "3")
        assert resolve_parallelism(1) == 3
        monkeypatch.setenv("HDIV_THREADS", "zero")
        with pytest.raises(ConfigError):
            resolve_parallelism(1)
        monkeypatch.delenv("HDIV_THREADS")
        assert resolve_parallelism(2) == 2


class TestRun:
    def test_noiseless_smoke(self):
        cfg = parse_scenario(
            "n = 60\np_x = 5\np_z = 5\nk_x = 2\nn_sims = 1\nsigma_u = 1e-8\nsigma_v = 1e-8\n"
            "methods = lasso\nstage1_lambda = 0\nstage2_lambda = 0\n"
        )
        row = run_scenario(cfg).rows[0]
        assert row.mean_rmse < 1e-4
        assert row.n_completed == 1
        # an unpenalized fit keeps every coordinate, so exact selection needs zeros
        assert row.p_contains == 1.0

    def test_rows_and_invariants(self):
        table = run_scenario(parse_scenario(SMOKE))
        assert [r.method for r in table.rows] == ["OLS", "LASSO", "BRIDGE(0.5)"]
        for r in table.rows:
            assert 0 <= r.p_equals <= r.p_contains <= 1
            assert r.n_completed == 3
        assert table.rows[0].mean_selected == 8 and table.rows[0].p_equals == 0

    def test_matches_direct_pipeline(self):
        cfg = parse_scenario(SMOKE.replace("n_sims = 3", "n_sims = 1"))
        table = run_scenario(cfg)
        d = simulate(cfg.sim, cfg.sim.replication_seed(1))
        fit = run_two_stage(d, Method.parse("bridge(0.5)"))
        rmse = np.sqrt(np.mean((fit.beta_hat - d.truth.beta0) ** 2))
        assert table.rows[2].mean_rmse == pytest.approx(rmse, abs=1e-15)

    def test_failures_are_excluded(self):
        # n = 3 cannot be split into five folds, so every penalized fit fails
        cfg = parse_scenario("n = 3\np_x = 2\np_z = 2\nk_x = 1\nn_sims = 2\nmethods = ols, lasso\n")
        table = run_scenario(cfg)
        assert [r.method for r in table.rows] == ["OLS"]
        assert table.failures[("scenario", "LASSO")] == 2

    def test_parallel_matches_serial(self):
        cfg = parse_scenario(SMOKE)
        a = emit_table(run_scenario(cfg, 1))
        b = emit_table(run_scenario(cfg, 2))
        assert a == b


class TestTables:
    def rows(self):
        return ResultTable([
            ResultRow("s", "OLS", None, 1.23456, 1.0, 30.0, 1.0, 0.0, 10),
            ResultRow("s", "BRIDGE(0.2)", 0.2, 0.012345, 0.01, 6.0, 1.0, 0.9, 10),
        ])

    def test_empty(self, tmp_path):
        p = tmp_path / "t.csv"
        emit_table(ResultTable(), "csv", p)
        assert p.read_text() == ",".join(TABLE_HEADER) + "\n"

    def test_one_row(self, tmp_path):
        p = tmp_path / "t.csv"
        t = ResultTable(self.rows().rows[:1])
        emit_table(t, "csv", p)
        lines = p.read_text().splitlines()
        assert len(lines) == 2
        assert lines[1] == "s,OLS,,1.2346,1.0000,30.0000,1.0000,0.0000,10"

    def test_round_trip(self, tmp_path):
        p = tmp_path / "t.csv"
        t = self.rows()
        emit_table(t, "csv", p)
        back = read_table_csv(p)
        for a, b in zip(t.rows, back.rows):
            assert (a.scenario, a.method, a.n_completed) == (b.scenario, b.method, b.n_completed)
            for name in ("mean_rmse", "median_rmse", "mean_selected", "p_contains", "p_equals"):
                assert round(getattr(a, name), 4) == getattr(b, name)
        assert emit_table(back) == emit_table(t)

    def test_markdown(self):
        md = emit_table(self.rows(), "markdown", layout="selection")
        assert "P(S = True)" in md and "| s | BRIDGE(0.2) | 1.00 | 0.90 | 10 |" in md

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError, match="cannot write table"):
            emit_table(self.rows(), "csv", tmp_path / "missing" / "t.csv")

    def test_presets(self):
        sc, layout = preset_scenarios("table2", n_sims=5)
        assert layout == "selection"
        assert [s.sim.n for s in sc] == [30, 60, 120]
        assert all(len(s.methods) == 5 for s in sc)
        sc, _ = preset_scenarios("table3")
        assert len(sc[0].methods) == 13 and sc[0].sim.n_sims == 100
        sc, _ = preset_scenarios("table5", n_sims=2)
        assert [s.sim.p_x for s in sc] == [100, 500, 1000]
        assert all(s.sim.p_z == 100 and s.sim.n == 1000 for s in sc)
        with pytest.raises(ConfigError):
            preset_scenarios("table9")


class TestCli:
    def write_data(self, tmp_path, n=60, seed=0):
        path = tmp_path / "data.csv"
        write_csv(simulate(SimConfig(n=n, p_x=6, p_z=6, k_x=2), seed), path)
        return path

    def test_fit_matches_in_process(self, tmp_path, capsys):
        data = self.write_data(tmp_path)
        out = tmp_path / "rep.csv"
        rc = cli.main(["fit", "--data", str(data), "--method", "bridge", "--gamma", "0.5",
                       "--out", str(out), "--cv-out", str(tmp_path / "cv.csv")])
        assert rc == 0
        from hdiv.dgp import load_csv

        fit = run_two_stage(load_csv(data), Method.parse("bridge(0.5)"))
        with out.open() as fh:
            rows = list(csv.reader(fh))[1:]
        assert [float(r[1]) for r in rows] == fit.beta_hat.tolist()
        diag = (tmp_path / "rep.diagnostics.txt").read_text()
        assert "plug_in=true" in diag
        assert (tmp_path / "cv.csv").read_text().startswith("lambda,cv_mse,n_folds_used")

    def test_fit_bad_header(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("y,x1,w1\n1,2,3\n")
        assert cli.main(["fit", "--data", str(p), "--method", "lasso"]) == 3
        err = capsys.readouterr().err
        assert err.startswith("error[schema]") and "'w1'" in err

    def test_fit_too_few(self, tmp_path, capsys):
        data = self.write_data(tmp_path, n=4)
        assert cli.main(["fit", "--data", str(data), "--method", "ols"]) == 3
        assert "too few observations" in capsys.readouterr().err

    def test_bad_method(self, tmp_path, capsys):
        data = self.write_data(tmp_path)
        assert cli.main(["fit", "--data", str(data), "--method", "ridge"]) == 2
        assert capsys.readouterr().err.startswith("error[config]")

    def test_missing_config(self, tmp_path, capsys):
        assert cli.main(["simulate", "--config", str(tmp_path / "none.txt")]) == 2

    def test_simulate_deterministic(self, tmp_path, monkeypatch):
        cfg = tmp_path / "s.txt"
        cfg.write_text(SMOKE)
        outs = []
        for threads in ("1", "3"):
            monkeypatch.setenv("HDIV_THREADS", threads)
            out = tmp_path / f"o{threads}.csv"
            assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_tables(self, tmp_path):
        out = tmp_path / "t3.md"
        rc = cli.main(["tables", "--preset", "table3", "--n-sims", "1", "--out", str(out)])
        assert rc == 0
        assert out.read_text().count("BRIDGE(") == 13
