"""PD surfaces (tau, x) for the CGMY and KoBoL presets, as gnuplot data.

    python demos/surfaces.py [out_dir]
    gnuplot -e "splot 'out/surfaces/kobol3_surface_r3.dat' using 1:4:5 with lines"
"""
import dataclasses
import sys

from regime_pd.config import load_preset
from regime_pd.experiments import run_solve

out = sys.argv[1] if len(sys.argv) > 1 else "out/surfaces"
for name in ("cgmy5", "kobol3"):
    cfg = load_preset(name)
    cfg = cfg.replace(output=dataclasses.replace(cfg.output, directory=out, surface=True))
    for p in run_solve(cfg):
        print(p)
