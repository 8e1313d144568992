"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines appear in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
Tolerances and runtime limits are fixed by the acceptance contract and are
never loosened here.
"""
import dataclasses
import functools
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import norm

sys.path.insert(0, str(Path(__file__).parent))
from conftest import barrier_grid  # noqa: E402
from oracles import levy_khintchine  # noqa: E402
from regime_pd.config import load_preset  # noqa: E402
from regime_pd.experiments import build_grid, oracle_table, pd_table, solve_config  # noqa: E402
from regime_pd.fourier_oracle import default_probability  # noqa: E402
from regime_pd.levy_measures import (RegimeModel, jump_exponent, side_moment,  # noqa: E402
                                     symmetrized_measure)
from regime_pd.model import SwitchingModel  # noqa: E402
from regime_pd.pide_operator import (QuadratureConfig, assemble_blocks, singular_integral,  # noqa: E402
                                     singular_integral_pieces)
from regime_pd.rbf_basis import BasisKind, derivative_bounds  # noqa: E402
from regime_pd.regime_chain import transition_matrix, validate_generator  # noqa: E402
from regime_pd.time_stepper import SolverConfig, solve  # noqa: E402

RESULTS: dict[int, str] = {}
SEED = 20240611


def report(n: int, ok: bool, detail: str, elapsed: float, limit: float) -> bool:
    ok = ok and elapsed <= limit
    RESULTS[n] = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s / {limit:.0f}s]"
    return ok


def _sci(a) -> str:
    return "[" + " ".join(f"{v:.2e}" for v in np.ravel(a)) + "]"


def _with_horizons(cfg, horizons):
    return cfg.replace(time=dataclasses.replace(cfg.time, horizons=tuple(horizons)))


@functools.lru_cache(maxsize=None)
def _socgen_error(n_x: int) -> np.ndarray:
    cfg = _with_horizons(load_preset("socgen_vg"), [5.0])
    tab = pd_table(solve_config(cfg, n_x=n_x, n_steps=400), [5.0], 0.0)[0]
    return np.abs(tab / _socgen_ref() - 1)


@functools.lru_cache(maxsize=None)
def _socgen_ref() -> np.ndarray:
    return oracle_table(_with_horizons(load_preset("socgen_vg"), [5.0]), 0.0)[0]


def criterion_1() -> bool:
    t0 = time.perf_counter()
    _socgen_ref()
    err = _socgen_error(512)
    return report(1, bool(np.all(err <= 5e-3)),
                  f"socgen_vg T=5 N_x=512 N=400 rel.err {_sci(err)} <= 5e-3",
                  time.perf_counter() - t0, 60)


def criterion_2() -> bool:
    t0 = time.perf_counter()
    errs = {n: _socgen_error(n) for n in (64, 128, 256, 512)}
    gain = errs[64] / errs[512]
    ok = bool(np.all(gain >= 50) and np.all(errs[512] <= 5e-3))
    detail = ", ".join(f"{n}: {_sci(e)}" for n, e in errs.items())
    return report(2, ok, f"rel.err by N_x {detail}; gain 64->512 {_sci(gain)} >= 50",
                  time.perf_counter() - t0, 300)


def criterion_3() -> bool:
    t0 = time.perf_counter()
    cfg = _with_horizons(load_preset("cgmy5"), [1.0, 5.0, 10.0])
    ref = oracle_table(cfg, 0.0)
    tab = pd_table(solve_config(cfg, n_x=256), cfg.time.horizons, 0.0)
    err = np.abs(tab / ref - 1)
    worst = err.max(axis=1)
    detail = ", ".join(f"T={T:g}: {w:.2e}" for T, w in zip(cfg.time.horizons, worst))
    return report(3, bool(np.all(err <= 1e-2)), f"cgmy5 N_x=256 max rel.err {detail} <= 1e-2",
                  time.perf_counter() - t0, 600)


def criterion_4() -> bool:
    t0 = time.perf_counter()
    cfg = load_preset("kobol3")
    model = cfg.build_model()
    b, g = build_grid(cfg)
    blocks = assemble_blocks(model, b, g, cfg.quadrature, lift=cfg.grid.boundary_lift)
    sc = SolverConfig(cfg.time.n_steps, cfg.horizon, cfg.barrier.k, cfg.time.theta, cfg.time.rannacher)
    try:
        s = solve(model, b, g, sc, cfg.quadrature, blocks=blocks, check_residual=True)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return report(4, False, f"solver failure: {exc}", time.perf_counter() - t0, 600)
    v = s.values
    lo, hi = v.min(), v.max()
    rise = np.diff(v[:, :, 1:-1], axis=2).max()
    ok = lo >= -5e-3 and hi <= 1 + 5e-3 and rise <= 1e-3 and np.all(np.isfinite(v))
    return report(4, bool(ok), f"kobol3 range [{lo:.2e}, {hi:.6f}], max rise in x {rise:.2e} <= 1e-3, "
                  f"max residual {max(s.residuals):.1e}", time.perf_counter() - t0, 600)


def criterion_5() -> bool:
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    q = QuadratureConfig()
    q2 = dataclasses.replace(q, panels_inner=2 * q.panels_inner)
    worst_change, worst_ratio = 0.0, 0.0
    for name in ("socgen_vg", "cgmy5", "kobol3"):
        cfg = load_preset(name)
        b, g = build_grid(cfg)
        eps = b.shape
        mom = derivative_bounds(b, 3)
        d = rng.uniform(-3 / eps, 3 / eps, 50)
        for p in (r.gts for r in cfg.build_model().regimes):
            change = np.abs(singular_integral(b, 0.0, d, p, q) - singular_integral(b, 0.0, d, p, q2))
            worst_change = max(worst_change, change.max())
            c, beta, alpha = symmetrized_measure(p).side(1)
            z2 = 2 * side_moment(c, beta, alpha, 2, 0.0, 1.0)
            pieces = singular_integral_pieces(b, 0.0, d, p, q)
            lhs = np.abs(pieces[..., 1] + pieces[..., 2])
            worst_ratio = max(worst_ratio, (lhs / (0.25 * max(mom[2], mom[3]) * z2)).max())
    ok = worst_change < 1e-7 and worst_ratio <= 1
    return report(5, ok, f"panel doubling max change {worst_change:.1e} < 1e-7; "
                  f"inner bound max ratio {worst_ratio:.3f} <= 1 (VG, CGMY, KoBoL at production shapes)",
                  time.perf_counter() - t0, 60)


def criterion_6() -> bool:
    t0 = time.perf_counter()
    mu, sig, k, T = 0.05, 0.3, -0.1, 1.0
    m = SwitchingModel.single(RegimeModel(mu=mu, sigma=sig))
    g = barrier_grid(-2.0, 2.0, 256, k)
    h = g.nodes[1] - g.nodes[0]
    s = solve(m, BasisKind("gaussian", 0.5 / h), g, SolverConfig(200, T, k, 0.5))
    exact = norm.cdf((k - g.nodes - mu * T) / (sig * np.sqrt(T)))
    inner = np.abs(g.nodes) < 1.5
    pde_err = np.max(np.abs(s.values[-1, 0] - exact)[inner])
    ks = np.linspace(-0.8, 0.6, 8)
    four_err = max(abs(default_probability(m, T, 0, kk) - norm.cdf((kk - mu * T) / (sig * np.sqrt(T))))
                   for kk in ks)
    ok = pde_err <= 5e-3 and four_err <= 1e-8
    return report(6, ok, f"PIDE max interior error {pde_err:.1e} <= 5e-3 at T=1; "
                  f"Fourier error {four_err:.1e} <= 1e-8", time.perf_counter() - t0, 10)


def criterion_7() -> bool:
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = {}
    for family, name, j in (("VG", "socgen_vg", 0), ("CGMY", "cgmy5", 4), ("KoBoL", "kobol3", 2)):
        p = load_preset(name).build_model().regimes[j].gts
        w = rng.uniform(-30, 30, 20)
        worst[family] = np.max(np.abs(jump_exponent(p, w) - levy_khintchine(p, w)))
    ok = max(worst.values()) <= 1e-8
    detail = ", ".join(f"{f} {e:.1e}" for f, e in worst.items())
    return report(7, ok, f"max |Psi - quadrature| {detail} <= 1e-8", time.perf_counter() - t0, 30)


def criterion_8() -> bool:
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    fails, worst = 0, 0.0
    for _ in range(1000):
        H = int(rng.integers(1, 7))
        q = rng.uniform(0, 2, (H, H))
        np.fill_diagonal(q, 0)
        np.fill_diagonal(q, -q.sum(axis=1))
        g = validate_generator(q)
        a, b = rng.uniform(0, 5, 2)
        pa, pb, pab = (transition_matrix(g, t).p for t in (a, b, a + b))
        err = max(np.abs(pab - pa @ pb).max(), np.abs(pab.sum(axis=1) - 1).max(), -pab.min())
        worst = max(worst, err)
        fails += not (err <= 1e-9 and pab.max() <= 1 + 1e-10)
    return report(8, fails == 0, f"{1000 - fails}/1000 trials, worst deviation {worst:.1e}",
                  time.perf_counter() - t0, 5)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4,
            criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.slow
@pytest.mark.parametrize("check", CRITERIA, ids=lambda f: f.__name__)
def test_criterion(check):
    ok = check()
    n = int(check.__name__.split("_")[1])
    assert ok, RESULTS[n]


if __name__ == "__main__":
    ok = True
    for check in CRITERIA:
        ok &= check()
        print(RESULTS[int(check.__name__.split("_")[1])], flush=True)
    sys.exit(0 if ok else 1)
