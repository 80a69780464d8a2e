"""Monte Carlo runner, scenario files and result tables.

A scenario file is flat ``key = value`` text with ``#`` comments::

    scenario = t2_n120
    n = 120
    methods = ols, lasso, bridge(0.2), bridge(0.8)
    n_sims = 200
    parallelism = 4

Keys named like :class:`~hdiv.dgp.SimConfig` fields set the data-generating
process. The others are listed in :data:`RUN_KEYS`.
"""
from __future__ import annotations

import csv
import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dgp import SimConfig, simulate
from .errors import ConfigError, HdivError
from .metrics import aggregate, score_replication
from .solvers import PenaltyKind
from .tuning import CvSpec
from .two_stage import Method, fit_first_stage, run_two_stage

__all__ = [
    "ScenarioConfig",
    "ResultRow",
    "ResultTable",
    "parse_scenario",
    "load_scenario",
    "run_replication",
    "run_scenario",
    "emit_table",
    "read_table_csv",
    "resolve_parallelism",
    "PRESETS",
    "preset_scenarios",
    "TABLE_HEADER",
    "run_preset",
    "parse_method",
]

log = logging.getLogger(__name__)

TABLE_HEADER = ["scenario", "method", "gamma", "mean_rmse", "median_rmse", "mean_selected",
                "p_contains", "p_equals", "n_completed"]

RUN_KEYS = {
    "scenario": "row label in the output table",
    "methods": "comma-separated list, e.g. ols, lasso, bridge(0.2), adalasso",
    "stage1": "auto | ols | lasso | bridge; auto follows the stage-2 family",
    "cv_folds": "number of folds",
    "cv_grid_size": "penalty levels per grid",
    "cv_grid_min_ratio": "smallest over largest penalty",
    "cv_seed": "fold assignment seed",
    "stage1_lambda": "fixed stage-1 penalty (skips cross-validation)",
    "stage2_lambda": "fixed stage-2 penalty (skips cross-validation)",
    "output_path": "CSV destination",
    "parallelism": "worker processes; HDIV_THREADS overrides",
}


@dataclass
class ScenarioConfig:
    sim: SimConfig
    methods: list
    cv: CvSpec = field(default_factory=CvSpec)
    output_path: str | None = None
    parallelism: int = 1
    name: str = "scenario"
    stage1_lambda: float | None = None
    stage2_lambda: float | None = None

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    method: str
    gamma: float | None
    mean_rmse: float
    median_rmse: float
    mean_selected: float
    p_contains: float
    p_equals: float
    n_completed: int


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def extend(self, other: "ResultTable"):
        self.rows.extend(other.rows)
        for k, v in other.failures.items():
            self.failures[k] = self.failures.get(k, 0) + v


_SIM_FIELDS = {f.name: f.type for f in dataclasses.fields(SimConfig)}


def _convert(key, raw, kind):
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_scenario(text: str) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from ``key = value`` text."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in _SIM_FIELDS and key not in RUN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = val

    sim_kwargs = {k: _convert(k, v, _SIM_FIELDS[k]) for k, v in values.items()
                  if k in _SIM_FIELDS}
    sim = SimConfig(**sim_kwargs)
    stage1 = values.get("stage1", "auto").lower()
    if stage1 not in ("auto", "ols", "lasso", "bridge"):
        raise ConfigError(f"stage1 must be auto, ols, lasso or bridge, got {stage1!r}")
    if "methods" not in values:
        raise ConfigError("missing key 'methods'")
    methods = [parse_method(m, stage1, sim) for m in _split_methods(values["methods"])]
    cv = CvSpec(
        n_folds=_convert("cv_folds", values.get("cv_folds", 5), int),
        grid_size=_convert("cv_grid_size", values.get("cv_grid_size", 50), int),
        grid_min_ratio=_convert("cv_grid_min_ratio", values.get("cv_grid_min_ratio", 1e-3), float),
        seed=_convert("cv_seed", values.get("cv_seed", 0), int),
    )
    fixed = {k: _convert(k, values[k], float) for k in ("stage1_lambda", "stage2_lambda")
             if k in values}
    return ScenarioConfig(
        sim=sim,
        methods=methods,
        cv=cv,
        output_path=values.get("output_path"),
        parallelism=_convert("parallelism", values.get("parallelism", 1), int),
        name=values.get("scenario", "scenario"),
        **fixed,
    )


def _split_methods(text):
    out, depth, cur = [], 0, ""
    for ch in text:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [m.strip() for m in out if m.strip()]


def parse_method(text, stage1="auto", sim: SimConfig | None = None) -> Method:
    """Method descriptor with the scenario's stage-1 choice and exponents."""
    gamma1 = sim.gamma1 if sim else 0.1
    gamma2 = sim.gamma2 if sim else None
    s1 = None if stage1 == "auto" else stage1
    m = Method.parse(text, gamma1=gamma1, default_gamma=gamma2)
    if m.kind is PenaltyKind.OLS or s1 is None:
        return m
    return Method(kind=m.kind, gamma=m.gamma, stage1=s1, gamma1=gamma1)


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_scenario(text)


def resolve_parallelism(requested: int) -> int:
    env = os.environ.get("HDIV_THREADS")
    if env:
        try:
            val = int(env)
        except ValueError:
            raise ConfigError(f"HDIV_THREADS must be an integer, got {env!r}") from None
        if val < 1:
            raise ConfigError("HDIV_THREADS must be >= 1")
        return val
    return requested


def run_replication(cfg: ScenarioConfig, r: int):
    """Fit every method on replication ``r``.

    Returns ``(r, [(method_index, score or error string), ...])``. Methods
    that share a stage-1 estimator reuse a single first-stage fit.
    """
    out = []
    try:
        data = simulate(cfg.sim, cfg.sim.replication_seed(r))
    except HdivError as exc:
        return r, [(i, f"{type(exc).__name__}: {exc}") for i in range(len(cfg.methods))]
    first = {}
    for i, method in enumerate(cfg.methods):
        try:
            key = (method.stage1, method.gamma1)
            if key not in first:
                first[key] = fit_first_stage(data.Z, data.X, method.stage1, method.gamma1,
                                             cfg.cv, lambdas=cfg.stage1_lambda)
            fit = run_two_stage(data, method, cfg.cv, stage2_lambda=cfg.stage2_lambda,
                                first_stage=first[key])
            out.append((i, score_replication(fit, data.truth)))
        except (HdivError, np.linalg.LinAlgError, FloatingPointError) as exc:
            out.append((i, f"{type(exc).__name__}: {exc}"))
    return r, out


def _run_chunk(args):
    cfg, reps = args
    return [run_replication(cfg, r) for r in reps]


def run_scenario(cfg: ScenarioConfig, parallelism: int | None = None) -> ResultTable:
    """Run replications ``1..n_sims`` and aggregate per method.

    Results are reduced in replication order, so the table does not depend
    on the number of workers. Failed replications are logged and left out
    of the aggregates.
    """
    workers = resolve_parallelism(cfg.parallelism if parallelism is None else parallelism)
    reps = list(range(1, cfg.sim.n_sims + 1))
    if workers <= 1 or len(reps) == 1:
        results = [run_replication(cfg, r) for r in reps]
    else:
        chunks = [(cfg, reps[i::workers]) for i in range(workers) if reps[i::workers]]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            results = [res for part in pool.map(_run_chunk, chunks) for res in part]
    results.sort(key=lambda item: item[0])

    scores = [[] for _ in cfg.methods]
    table = ResultTable()
    for r, items in results:
        for i, val in items:
            if isinstance(val, str):
                label = cfg.methods[i].label
                log.warning("%s: replication %d, %s failed: %s", cfg.name, r, label, val)
                table.failures[(cfg.name, label)] = table.failures.get((cfg.name, label), 0) + 1
            else:
                scores[i].append(val)
    for method, sc in zip(cfg.methods, scores):
        if not sc:
            log.warning("%s: %s completed no replications", cfg.name, method.label)
            continue
        s = aggregate(sc)
        table.rows.append(ResultRow(
            scenario=cfg.name,
            method=method.label,
            gamma=method.gamma if method.kind is PenaltyKind.BRIDGE else None,
            mean_rmse=s.mean_rmse,
            median_rmse=s.median_rmse,
            mean_selected=s.mean_selected,
            p_contains=s.p_contains,
            p_equals=s.p_equals,
            n_completed=s.n,
        ))
    return table


def _fmt(x):
    return "" if x is None else f"{x:.4f}"


def _csv_cells(row: ResultRow):
    return [row.scenario, row.method, _fmt(row.gamma), _fmt(row.mean_rmse),
            _fmt(row.median_rmse), _fmt(row.mean_selected), _fmt(row.p_contains),
            _fmt(row.p_equals), str(row.n_completed)]


def _markdown(table: ResultTable, layout: str) -> str:
    if layout == "selection":
        head = ["Scenario", "Method", "P(True in S)", "P(S = True)", "Completed"]
        body = [[r.scenario, r.method, f"{r.p_contains:.2f}", f"{r.p_equals:.2f}",
                 str(r.n_completed)] for r in table.rows]
    else:
        head = ["Scenario", "Method", "Mean RMSE", "Median RMSE", "# Variables", "Completed"]
        body = [[r.scenario, r.method, f"{r.mean_rmse:.4f}", f"{r.median_rmse:.4f}",
                 f"{r.mean_selected:.2f}", str(r.n_completed)] for r in table.rows]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    lines += ["| " + " | ".join(b) + " |" for b in body]
    return "\n".join(lines) + "\n"


def emit_table(table: ResultTable, fmt: str = "csv", path=None, layout: str = "rmse") -> str:
    """Render ``table`` as CSV or markdown, writing to ``path`` when given.

    ``layout`` picks the markdown columns: ``rmse`` or ``selection``.
    """
    if fmt == "csv":
        lines = [",".join(TABLE_HEADER)] + [",".join(_csv_cells(r)) for r in table.rows]
        text = "\n".join(lines) + "\n"
    elif fmt == "markdown":
        text = _markdown(table, layout)
    else:
        raise ConfigError(f"unknown table format {fmt!r}")
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write table to {path}: {exc.strerror}") from exc
    return text


def read_table_csv(path) -> ResultTable:
    def opt(x):
        return None if x == "" else float(x)

    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TABLE_HEADER:
            raise ConfigError(f"{path}: unexpected table header")
        rows = [ResultRow(c[0], c[1], opt(c[2]), *map(float, c[3:8]), int(c[8]))
                for c in reader if c]
    return ResultTable(rows)


def _methods(names, sim):
    return [parse_method(m, "auto", sim) for m in names]


def _small_tables(n_sims, design):
    names = ["ols", "lasso", "bridge(0.2)", "bridge(0.5)", "bridge(0.8)"]
    out = []
    for n in (30, 60, 120):
        sim = SimConfig(n=n, n_sims=n_sims, instrument_design=design)
        out.append(ScenarioConfig(sim=sim, methods=_methods(names, sim), name=f"n{n}"))
    return out


def _gamma_table(n_sims, design):
    gammas = [0.01, 0.1, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 0.99]
    sim = SimConfig(n=60, n_sims=n_sims, instrument_design=design)
    return [ScenarioConfig(sim=sim, methods=_methods([f"bridge({g})" for g in gammas], sim),
                           name="n60")]


def _large_tables(n_sims, design):
    out = []
    for p_x in (100, 500, 1000):
        sim = SimConfig(n=1000, p_x=p_x, p_z=100, n_sims=n_sims, instrument_design=design)
        out.append(ScenarioConfig(sim=sim, methods=_methods(["ols", "lasso", "bridge(0.5)"], sim),
                                  name=f"px{p_x}"))
    return out


PRESETS = {
    "table1": (_small_tables, 200, "rmse"),
    "table2": (_small_tables, 200, "selection"),
    "table3": (_gamma_table, 100, "rmse"),
    "table4": (_large_tables, 200, "rmse"),
    "table5": (_large_tables, 200, "selection"),
}


def preset_scenarios(name: str, n_sims: int | None = None, design: str = "diagonal"):
    """Scenarios and markdown layout of a named preset."""
    try:
        build, default_sims, layout = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    sims = default_sims if n_sims is None else n_sims
    if sims < 1:
        raise ConfigError("n_sims must be >= 1")
    return build(sims, design), layout


def run_preset(name: str, n_sims: int | None = None, design: str = "diagonal",
               parallelism: int = 1) -> tuple[ResultTable, str]:
    scenarios, layout = preset_scenarios(name, n_sims, design)
    table = ResultTable()
    for sc in scenarios:
        table.extend(run_scenario(sc, parallelism))
    return table, layout
