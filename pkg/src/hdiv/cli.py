"""Command line entry point ``hdiv``.

Subcommands::

    hdiv simulate --config scenario.txt [--out table.csv] [--format csv|markdown]
    hdiv fit --data data.csv --method bridge [--gamma 0.5] [--out report.csv]
    hdiv tables --preset table2 [--n-sims 50] [--out table2.csv]

Failures print one ``error[<category>]: <message>`` line on stderr and exit
with a nonzero code that depends on the category.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .dgp import DESIGNS, load_csv
from .diagnostics import diagnose
from .errors import ConfigError, HdivError, TooFewObservationsError
from .tuning import CvSpec, write_cv_curve
from .two_stage import Method, fit_second_stage, run_two_stage, write_fit_report

EXIT_CODES = {"config": 2, "schema": 3, "data": 3, "numeric": 4, "io": 5, "error": 1}


def _build_parser():
    p = argparse.ArgumentParser(prog="hdiv", description="Penalized two-stage least squares.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one Monte Carlo scenario")
    s.add_argument("--config", required=True, help="key = value scenario file")
    s.add_argument("--out", help="output table (default: output_path in config, else stdout)")
    s.add_argument("--format", choices=["csv", "markdown"], default="csv")
    s.add_argument("--parallelism", type=int, help="worker processes")

    f = sub.add_parser("fit", help="fit one ingested dataset")
    f.add_argument("--data", required=True, help="CSV with header y,x1..,z1..")
    f.add_argument("--method", required=True, help="ols, lasso, adalasso, bridge or bridge(g)")
    f.add_argument("--gamma", type=float, help="stage-2 bridge exponent")
    f.add_argument("--stage1", choices=["auto", "ols", "lasso", "bridge"], default="auto")
    f.add_argument("--gamma1", type=float, default=0.1, help="stage-1 bridge exponent")
    f.add_argument("--folds", type=int, default=5)
    f.add_argument("--cv-seed", type=int, default=0)
    f.add_argument("--out", help="report CSV (default: <data>_fit.csv)")
    f.add_argument("--cv-out", help="also write the stage-2 CV curve here")

    t = sub.add_parser("tables", help="reproduce a preset table")
    t.add_argument("--preset", required=True, choices=sorted(harness.PRESETS))
    t.add_argument("--n-sims", type=int, help="replications per scenario")
    t.add_argument("--design", choices=DESIGNS, default="diagonal")
    t.add_argument("--out", help="output file (default: stdout)")
    t.add_argument("--format", choices=["csv", "markdown"], default="markdown")
    t.add_argument("--parallelism", type=int, default=1)
    return p


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args):
    cfg = harness.load_scenario(args.config)
    table = harness.run_scenario(cfg, args.parallelism)
    _emit(harness.emit_table(table, args.format), args.out or cfg.output_path)
    return 0


def _cmd_fit(args):
    data = load_csv(args.data)
    text = args.method
    if args.gamma is not None:
        if "(" in text or ":" in text:
            raise ConfigError("give the exponent either in --method or --gamma")
        text = f"{text}({args.gamma})"
    method = harness.parse_method(text, args.stage1)
    if method.gamma1 != args.gamma1:
        method = Method(kind=method.kind, gamma=method.gamma, stage1=method.stage1,
                        gamma1=args.gamma1)
    cv = CvSpec(n_folds=args.folds, seed=args.cv_seed)
    if data.n < cv.n_folds:
        raise TooFewObservationsError(
            f"too few observations: n={data.n} < n_folds={cv.n_folds}"
        )
    fit = run_two_stage(data, method, cv)
    out = Path(args.out) if args.out else Path(args.data).with_name(Path(args.data).stem + "_fit.csv")
    write_fit_report(fit, out)
    diag = diagnose(fit.d_hat, fit.support_beta, plug_in=True)
    diag_path = out.with_suffix(".diagnostics.txt")
    lines = [f"# diagnostics for {args.data}, method {method.label}",
             "# plug-in values computed from estimated conditional means"]
    for stage, msgs in fit.report.items():
        lines += [f"# {stage}: {m}" for m in msgs]
    diag_path.write_text("\n".join(lines) + "\n" + diag.to_text())
    if args.cv_out:
        _, _, cv_res, _ = fit_second_stage(fit.d_hat, data.Y, method, cv)
        if cv_res is not None:
            write_cv_curve(cv_res, args.cv_out)
    sel = ", ".join(str(j + 1) for j in fit.support_beta)
    print(f"{method.label}: selected [{sel}]; report {out}; diagnostics {diag_path}")
    return 0


def _cmd_tables(args):
    table, layout = harness.run_preset(args.preset, args.n_sims, args.design, args.parallelism)
    _emit(harness.emit_table(table, args.format, layout=layout), args.out)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"simulate": _cmd_simulate, "fit": _cmd_fit, "tables": _cmd_tables}[args.command]
    try:
        with np.errstate(all="ignore"):
            return handler(args)
    except HdivError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
