"""PD-versus-horizon curves for the three variance gamma firms.

Writes ``<out>/<name>_pd.csv`` and ``<out>/<name>_oracle.csv`` for each preset
and prints the largest relative gap between the two.

    python demos/pd_curves.py [out_dir]
"""
import sys

import numpy as np

from regime_pd.config import load_preset
from regime_pd.experiments import oracle_table, pd_table, run_oracle, run_solve, solve_config

out = sys.argv[1] if len(sys.argv) > 1 else "out/pd_curves"
for name in ("socgen_vg", "axa_vg", "stm_vg"):
    cfg = load_preset(name)
    cfg = cfg.replace(output=type(cfg.output)(out, ("csv", "dat"), False, 1, 0.0))
    run_solve(cfg)
    run_oracle(cfg)
    pd = pd_table(solve_config(cfg), cfg.time.horizons)
    ref = oracle_table(cfg)
    print(f"{name:10s} max rel.err over T = 1..10: {np.max(np.abs(pd / ref - 1)):.2e}")
