import dataclasses
from math import factorial

import numpy as np
import pytest
from scipy import integrate

from conftest import barrier_grid
from oracles import brute_singular_integral
from regime_pd.levy_measures import (GtsParams, RegimeModel, SyncJumpSpec, cgmy_params,
                                     kobol_params, side_moment, symmetrized_measure, vg_params)
from regime_pd.model import SwitchingModel
from regime_pd.pide_operator import (QuadratureConfig, UnsupportedBasisForMeasure,
                                     assemble_blocks, cross_regime_integral, singular_integral,
                                     singular_integral_pieces)
from regime_pd.rbf_basis import MAX_ORDER, BasisKind, derivative_bounds, uniform_grid

CGMY1 = cgmy_params(0.1, 2.0, 1.0, 0.11)
FAMILIES = {
    "vg": vg_params(0.3227, -0.1576, 0.0306),
    "cgmy": cgmy_params(0.9, 10.0, 9.0, 0.55),
    "kobol": kobol_params(0.13, 1.8, 0.8, 0.7, 2.5),
}


@dataclasses.dataclass
class PolyBasis:
    """Test harness: phi(r) = sum_n a_n r^n (not an RBF; no shape, no lift)."""
    coeffs: tuple
    shape = None
    tag = "poly"

    def __call__(self, r, order=0):
        r = np.asarray(r, float)
        out = np.zeros_like(r)
        for n, a in enumerate(self.coeffs):
            if n >= order:
                out = out + a * factorial(n) / factorial(n - order) * r ** (n - order)
        return out

    def derivatives(self, r, nmax, side=0):
        return [self(r, k) for k in range(nmax + 1)]

    def compensated(self, d, z):
        return self(d + z) - self(d) - z * self(d, 1)


def test_constant_function_integral_vanishes():
    one = PolyBasis((1.0,))
    for p in FAMILIES.values():
        assert singular_integral(one, 0.0, 0.4, p) == pytest.approx(0, abs=1e-14)


def test_linear_function_symmetric_measure():
    lin = PolyBasis((0.0, 1.0))
    p = symmetrized_measure(FAMILIES["cgmy"])
    assert singular_integral(lin, 0.0, 0.3, p) == pytest.approx(0, abs=1e-13)


def test_gaussian_against_brute_force():
    b = BasisKind("gaussian", 1.0)
    ours = singular_integral(b, 0.0, 0.3, CGMY1)
    ref = brute_singular_integral(lambda y: b(y), lambda y: b(y, 1), 0.3, CGMY1)
    assert ours == pytest.approx(ref, abs=1e-6)


@pytest.mark.parametrize("name", list(FAMILIES))
def test_sharp_gaussian_against_brute_force(name):
    b = BasisKind("gaussian", 6.0)
    p = FAMILIES[name]
    for x in (0.0, 0.17, -0.4):
        ref = brute_singular_integral(lambda y: b(y), lambda y: b(y, 1), x, p)
        assert singular_integral(b, 0.0, x, p) == pytest.approx(ref, abs=1e-6 * max(1, abs(ref)))


def test_cubic_rejected_for_infinite_variation():
    with pytest.raises(UnsupportedBasisForMeasure):
        singular_integral(BasisKind("cubic"), 0.0, 0.1, FAMILIES["kobol"])
    assert np.isfinite(singular_integral(BasisKind("cubic"), 0.0, 0.1, FAMILIES["cgmy"]))


@pytest.mark.parametrize("p", list(FAMILIES.values()) + [kobol_params(0.11, 1.2, 0.4, 0.5, 2.0)])
def test_inner_integrand_finite_near_zero(p):
    b = BasisKind("gaussian", 12.0)
    d = np.linspace(-0.3, 0.3, 7)
    for sg in (1, -1):
        v = b.compensated(d, np.full(7, sg * 1e-12)) * p.density(sg * 1e-12)
        assert np.all(np.isfinite(v))


@pytest.mark.parametrize("name", list(FAMILIES))
def test_panel_doubling(name):
    g = uniform_grid(-10, 10, 128)
    h = g.nodes[1] - g.nodes[0]
    b = BasisKind("gaussian", 0.5 / h)
    q = QuadratureConfig()
    q2 = dataclasses.replace(q, panels_inner=2 * q.panels_inner)
    d = g.nodes - g.nodes[64]
    a = singular_integral(b, 0.0, d, FAMILIES[name], q)
    c = singular_integral(b, 0.0, d, FAMILIES[name], q2)
    assert np.max(np.abs(a - c)) < 1e-7


def _inner_bound_ratio(eps, p, d, const):
    b = BasisKind("gaussian", eps)
    m = derivative_bounds(b, 3)
    ps = symmetrized_measure(p)
    c, beta, alpha = ps.side(1)
    z2 = 2 * side_moment(c, beta, alpha, 2, 0.0, 1.0)
    pieces = singular_integral_pieces(b, 0.0, d, p)
    return np.abs(pieces[..., 1] + pieces[..., 2]) / (const * max(m[2], m[3]) * z2)


@pytest.mark.parametrize("name", list(FAMILIES))
@pytest.mark.parametrize("eps", [1.0, 6.0, 16.0])
def test_inner_bound_quarter(name, eps, rng):
    d = rng.uniform(-3 / eps, 3 / eps, 50)
    assert np.all(_inner_bound_ratio(eps, FAMILIES[name], d, 0.25) <= 1)


@pytest.mark.parametrize("name", list(FAMILIES))
@pytest.mark.parametrize("eps", [0.2, 0.5, 1.0, 6.0])
def test_inner_bound_taylor_half(name, eps, rng):
    d = rng.uniform(-3 / eps, 3 / eps, 50)
    assert np.all(_inner_bound_ratio(eps, FAMILIES[name], d, 0.5) <= 1)


@pytest.mark.parametrize("name", list(FAMILIES))
def test_outer_bound(name, rng):
    p = FAMILIES[name]
    ps = symmetrized_measure(p)
    c, beta, alpha = ps.side(1)
    tail = 2 * side_moment(c, beta, alpha, 0, 1.0, 10.0)
    b = BasisKind("gaussian", 4.0)
    pieces = singular_integral_pieces(b, 0.0, rng.uniform(-3, 3, 50), p)
    assert np.all(np.abs(pieces[..., 0] + pieces[..., 3]) <= 2 * b(0.0) * tail)


def test_symmetric_first_order_part_vanishes():
    p = symmetrized_measure(FAMILIES["cgmy"])
    b = BasisKind("gaussian", 3.0)
    # with x = centre, phi'(0) = 0: the compensator contributes nothing
    full = singular_integral(b, 0.0, 0.0, p)
    ref = brute_singular_integral(lambda y: b(y), lambda y: 0.0 * y, 0.0, p)
    assert full == pytest.approx(ref, abs=1e-7)


def test_cross_regime_dirac_limit():
    b = BasisKind("gaussian", 1.0)
    s = SyncJumpSpec.from_rows([1e4, -1e4])
    for x in (0.0, 0.4, -1.2):
        assert cross_regime_integral(b, 0.0, x, s, 0, 1) == pytest.approx(b(x), abs=1e-3)
        assert cross_regime_integral(b, 0.0, x, s, 1, 0) == pytest.approx(b(x), abs=1e-3)


@pytest.mark.parametrize("eta", [0.0160, 0.5, -3.0])
def test_cross_regime_mass(eta):
    s = SyncJumpSpec.from_rows([eta, eta])
    val = cross_regime_integral(PolyBasis((1.0,)), 0.0, 0.0, s, 0, 1, z_cut=10.0)
    assert val == pytest.approx(1 - np.exp(-abs(eta) * 10.0), abs=1e-13)


def test_cross_regime_axa_against_quad():
    b = BasisKind("gaussian", 1.0)
    s = SyncJumpSpec.from_rows([0.0160, -0.0092])
    ref = integrate.quad(lambda z: b(z) * 0.016 * np.exp(-0.016 * z), 0, 10,
                         epsabs=1e-14, epsrel=1e-13)[0]
    assert cross_regime_integral(b, 0.0, 0.0, s, 0, 1) == pytest.approx(ref, abs=1e-8)


def test_no_jump_gives_zero():
    s = SyncJumpSpec(np.zeros((2, 2)))
    assert cross_regime_integral(BasisKind("gaussian", 1.0), 0.0, 0.0, s, 0, 1) == 0.0


def test_pure_diffusion_blocks():
    g = uniform_grid(-2, 2, 21)
    b = BasisKind("gaussian", 2.0)
    m = SwitchingModel.single(RegimeModel(mu=0.07, sigma=0.3))
    blk = assemble_blocks(m, b, g)
    diff = g.nodes[:, None] - g.nodes[None, :]
    ref = 0.07 * b(diff, 1) + 0.045 * b(diff, 2)
    assert np.allclose(blk.phi_L[1:-1], ref[1:-1], atol=1e-14)
    assert np.all(blk.phi_L[[0, -1]] == 0)


def test_zero_generator_block_diagonal():
    g = uniform_grid(-3, 3, 16)
    b = BasisKind("gaussian", 2.0)
    m = SwitchingModel.build([RegimeModel(gts=FAMILIES["cgmy"]), RegimeModel(gts=CGMY1)],
                             np.zeros((2, 2)), SyncJumpSpec.from_rows([0.1, -0.1]))
    blk = assemble_blocks(m, b, g, QuadratureConfig(z_cut=3.0))
    assert not np.any(blk.block(0, 1)) and not np.any(blk.block(1, 0))


def test_blocks_read_only(socgen):
    g = uniform_grid(-8, 8, 32)
    blk = assemble_blocks(socgen, BasisKind("gaussian", 0.5 / (16 / 31)), g)
    with pytest.raises(ValueError):
        blk.phi_L[3, 3] = 1.0


@pytest.mark.parametrize("lift", [True, False])
def test_constants_are_harmonic(socgen, lift):
    g = barrier_grid(-8, 8, 128)
    h = g.nodes[1] - g.nodes[0]
    b = BasisKind("gaussian", 0.5 / h)
    blk = assemble_blocks(socgen, b, g, lift=lift)
    r = blk.phi_L @ np.ones(2 * g.n)
    inner = np.tile(np.abs(g.nodes) <= 4, 2)
    assert np.max(np.abs(r[inner])) < 1e-4


def test_lift_reproduces_one(kobol3):
    g = barrier_grid(-10, 10, 96)
    h = g.nodes[1] - g.nodes[0]
    b = BasisKind("gaussian", 0.5 / h)
    blk = assemble_blocks(kobol3, b, g)
    lift = blk.lift
    c = np.linalg.solve(blk.phi, 1 - lift.at_nodes)
    x = np.linspace(g.x_min - 0.5, 0.0, 301)
    u = lift(b, x) + b(x[:, None] - g.nodes[None, :]) @ c
    assert np.max(np.abs(u - 1)) < 1e-7
    r = blk.phi_L @ np.tile(c, 3) + lift.L
    # the left edge is the lift's business; the right edge still leaks O(1e-7) near x = 0
    left = np.tile(g.nodes < -4, 3)
    assert np.max(np.abs(r[left])) < 1e-8
