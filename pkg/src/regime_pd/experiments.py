"""Experiment drivers: collocation solves, oracle tables and convergence sweeps.

Every driver takes an :class:`ExperimentConfig` and writes its tables to
``cfg.output.directory`` (or an explicit directory) as CSV with 12
significant digits and, optionally, gnuplot-ready whitespace-separated
``.dat`` files.  The written paths are returned.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .fourier_oracle import default_probability
from .pide_operator import assemble_blocks
from .rbf_basis import BasisKind, CollocationGrid, uniform_grid
from .time_stepper import SolutionSurface, SolverConfig, solve

LRE_FLOOR = -16.0
NA = "NA"


class ZeroReference(ArithmeticError):
    """The reference PD is too small for a relative error to mean anything."""


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if not np.isfinite(v):
        return NA
    return f"{float(v):.12g}"


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def _write_dat(path: Path, header: Sequence[str], rows: Iterable[Sequence],
               block_key: Optional[int] = None) -> Path:
    """Whitespace-separated columns; a blank line whenever column ``block_key`` changes (splot)."""
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        last = None
        for r in rows:
            if block_key is not None and last is not None and r[block_key] != last:
                fh.write("\n")
            last = r[block_key] if block_key is not None else None
            fh.write(" ".join(fmt(v) for v in r) + "\n")
    return path


def _emit(cfg: ExperimentConfig, out: Path, stem: str, header, rows, block_key=None) -> list[Path]:
    rows = list(rows)
    paths = []
    if "csv" in cfg.output.formats:
        paths.append(_write_csv(out / f"{stem}.csv", header, rows))
    if "dat" in cfg.output.formats:
        paths.append(_write_dat(out / f"{stem}.dat", header, rows, block_key))
    return paths


def _out_dir(cfg: ExperimentConfig, out_dir) -> Path:
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# building blocks

def build_grid(cfg: ExperimentConfig, n_x: Optional[int] = None) -> tuple[BasisKind, CollocationGrid]:
    """Uniform grid (shifted so the barrier sits half way between two nodes) and basis."""
    gs = cfg.grid
    n = n_x or gs.n_x
    g = uniform_grid(gs.x_min, gs.x_max, n)
    h = g.nodes[1] - g.nodes[0]
    k = cfg.barrier.k
    if gs.align_barrier:
        j = int(np.searchsorted(g.nodes, k))
        shift = k - 0.5 * (g.nodes[j - 1] + g.nodes[j])
        g = CollocationGrid(g.nodes + shift, gs.x_min + shift, gs.x_max + shift)
    if gs.basis == "cubic":
        return BasisKind("cubic"), g
    shape = gs.shape if gs.shape is not None else gs.shape_ratio / h
    return BasisKind(gs.basis, shape), g


def solve_config(cfg: ExperimentConfig, n_x: Optional[int] = None,
                 n_steps: Optional[int] = None) -> SolutionSurface:
    model = cfg.build_model()
    basis, grid = build_grid(cfg, n_x)
    sc = SolverConfig(n_steps or cfg.time.n_steps, cfg.horizon, cfg.barrier.k,
                      cfg.time.theta, cfg.time.rannacher)
    blocks = assemble_blocks(model, basis, grid, cfg.quadrature, lift=cfg.grid.boundary_lift)
    return solve(model, basis, grid, sc, cfg.quadrature, blocks=blocks)


def pd_table(sol: SolutionSurface, horizons: Sequence[float], x: float = 0.0) -> np.ndarray:
    """PD per (horizon, regime) at log-asset x."""
    return np.array([sol.at_time(T, x)[:, 0] for T in horizons])


def oracle_table(cfg: ExperimentConfig, x: Optional[float] = None) -> np.ndarray:
    """Fourier reference PD per (horizon, regime) for a start at log-asset x."""
    model = cfg.build_model()
    x = cfg.output.x_eval if x is None else x
    return np.array([default_probability(model, T, None, cfg.barrier.k - x)
                     for T in cfg.time.horizons])


def log_relative_error(pd: float, ref: float) -> float:
    """log10 |(pd - ref) / ref|, floored at -16."""
    if not abs(ref) >= 1e-12:
        raise ZeroReference(f"reference PD {ref:.3g} is below 1e-12")
    err = abs((pd - ref) / ref)
    return LRE_FLOOR if err == 0 else max(LRE_FLOOR, math.log10(err))


# ---------------------------------------------------------------------------
# drivers

def run_solve(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    """PD-vs-horizon table and (optionally) the full surface."""
    out = _out_dir(cfg, out_dir)
    sol = solve_config(cfg)
    H = sol.values.shape[1]
    x = cfg.output.x_eval
    tab = pd_table(sol, cfg.time.horizons, x)
    head = ["T"] + [f"regime_{j + 1}" for j in range(H)]
    paths = _emit(cfg, out, f"{cfg.name}_pd", head,
                  [[T, *row] for T, row in zip(cfg.time.horizons, tab)])
    if cfg.output.surface:
        v0 = cfg.barrier.asset_value or 1.0
        every = cfg.output.surface_every
        rows = [[sol.taus[n], j + 1, xi, v0 * math.exp(xi), sol.values[n, j, i]]
                for j in range(H) for n in range(0, sol.taus.size, every)
                for i, xi in enumerate(sol.grid.nodes)]
        if "csv" in cfg.output.formats:
            paths.append(_write_csv(out / f"{cfg.name}_surface.csv", ["tau", "regime", "x", "pd"],
                                    [[r[0], r[1], r[2], r[4]] for r in rows]))
        if "dat" in cfg.output.formats:
            for j in range(H):
                paths.append(_write_dat(out / f"{cfg.name}_surface_r{j + 1}.dat",
                                        ["tau", "regime", "x", "S", "pd"],
                                        [r for r in rows if r[1] == j + 1], block_key=0))
    return paths


def run_oracle(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    """Fourier reference PDs as (T, regime, k, pd) rows."""
    out = _out_dir(cfg, out_dir)
    tab = oracle_table(cfg)
    k = cfg.barrier.k - cfg.output.x_eval
    rows = [[T, j + 1, k, tab[t, j]] for t, T in enumerate(cfg.time.horizons)
            for j in range(tab.shape[1])]
    return _emit(cfg, out, f"{cfg.name}_oracle", ["T", "regime", "k", "pd"], rows)


@dataclasses.dataclass
class ConvergenceRow:
    n_x: int
    n_steps: int
    T: float
    regime: int
    pd: float
    ref: float
    rel_error: float
    lre: object                 # float or "NA"
    order_x: object = NA
    order_t: object = NA


def convergence_rows(cfg: ExperimentConfig, ns_list: Sequence[int],
                     nsteps_list: Sequence[int]) -> list[ConvergenceRow]:
    ref = oracle_table(cfg)
    x = cfg.output.x_eval
    rows: list[ConvergenceRow] = []
    for n_x in ns_list:
        for n_steps in nsteps_list:
            tab = pd_table(solve_config(cfg, n_x, n_steps), cfg.time.horizons, x)
            for t, T in enumerate(cfg.time.horizons):
                for j in range(tab.shape[1]):
                    r = ref[t, j]
                    try:
                        lre = log_relative_error(tab[t, j], r)
                        rel = abs(tab[t, j] / r - 1)
                    except ZeroReference:
                        lre, rel = NA, float("nan")
                    rows.append(ConvergenceRow(n_x, n_steps, T, j + 1, tab[t, j], r, rel, lre))
    # observed orders from successive refinement in each direction
    index = {(r.n_x, r.n_steps, r.T, r.regime): r for r in rows}
    for r in rows:
        for attr, seq, key in (("order_x", ns_list, 0), ("order_t", nsteps_list, 1)):
            pos = list(seq).index(r.n_x if key == 0 else r.n_steps)
            if pos == 0:
                continue
            prev_n = seq[pos - 1]
            pk = (prev_n, r.n_steps, r.T, r.regime) if key == 0 else (r.n_x, prev_n, r.T, r.regime)
            p = index[pk]
            cur_n = r.n_x if key == 0 else r.n_steps
            if r.rel_error > 0 and p.rel_error > 0 and np.isfinite(r.rel_error * p.rel_error):
                setattr(r, attr, math.log(p.rel_error / r.rel_error) / math.log(cur_n / prev_n))
    return rows


def run_convergence(cfg: ExperimentConfig, ns_list: Sequence[int], nsteps_list: Sequence[int],
                    out_dir=None) -> list[Path]:
    """Log relative error against the oracle for every (N_x, N) pair."""
    out = _out_dir(cfg, out_dir)
    rows = convergence_rows(cfg, ns_list, nsteps_list)
    head = [f.name for f in dataclasses.fields(ConvergenceRow)]
    return _emit(cfg, out, f"{cfg.name}_convergence", head,
                 [[getattr(r, h) for h in head] for r in rows])
