"""Small-sample versions of the selection tables under both instrument designs.

``diagonal`` gives each covariate its own instrument. ``block`` lets every
relevant covariate load on every relevant instrument. Full-size tables come
from ``hdiv tables --preset table2``; this script keeps the replication count
low so it finishes in a few minutes.

Run with ``python demos/04_monte_carlo_tables.py [n_sims]``.
"""
from __future__ import annotations

import sys

from hdiv.harness import emit_table, run_preset

n_sims = int(sys.argv[1]) if len(sys.argv) > 1 else 20

for design in ("diagonal", "block"):
    table, layout = run_preset("table2", n_sims=n_sims, design=design)
    print(f"\n## design = {design}, {n_sims} replications\n")
    print(emit_table(table, "markdown", layout=layout))
