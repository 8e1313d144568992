"""Collocation matrices of the regime-switching PIDE generator.

For a basis function phi centred at c, regime r and collocation point x the
generator reads

    L phi = mu_r phi' + sigma_r^2/2 phi'' + q_rr phi
            + int (phi(x+z) - phi(x) - z 1_{|z|<=1} phi'(x)) nu_r(dz)
            + sum_{k != r} q_rk int phi(x+z) mu_rk(z) dz.

The jump integral is split at |z| = 1 into two outer pieces (plain
integrand) and two inner pieces (compensated integrand, O(z^2) at 0).  Inner
pieces use geometrically graded Gauss-Legendre panels; the last sliver
[0, delta] next to the singularity is integrated term by term from the Taylor
expansion of phi, so z = 0 is never sampled.

During assembly the solution is continued outside [x_min, x_max] by its
boundary value, so jumps that leave the domain see 1 on the left and 0 on the
right instead of whatever the RBF expansion does out there.  For the Gaussian
basis a frozen row of ghost centres left of x_min (``BoundaryLift``) carries
the value 1 across the left edge; its generator image is returned with the
blocks and enters the time stepper as a constant forcing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Optional

import numpy as np
from scipy import special

from .levy_measures import GtsParams, SyncJumpSpec, side_moment
from .model import SwitchingModel
from .rbf_basis import MAX_ORDER, BasisKind, CollocationGrid, gram_matrix


class UnsupportedBasisForMeasure(ValueError):
    """The cubic basis is only C^2, too rough for infinite-variation measures."""


@dataclass(frozen=True)
class QuadratureConfig:
    z_cut: float = 10.0
    inner_split: float = 1.0
    panels_inner: int = 32
    inner_ratio: float = 0.7
    panels_outer: int = 16
    gl_order: int = 16
    far_field: bool = True

    def __post_init__(self):
        if not self.z_cut > 1:
            raise ValueError("z_cut must exceed 1")
        if not 0 < self.inner_split <= 1:
            raise ValueError("inner_split must lie in (0, 1]")
        if min(self.panels_inner, self.panels_outer, self.gl_order) < 1:
            raise ValueError("panel and point counts must be at least 1")
        if not 0 < self.inner_ratio < 1:
            raise ValueError("inner_ratio must lie in (0, 1)")


@dataclass(frozen=True)
class OperatorBlocks:
    phi: np.ndarray
    phi_L: np.ndarray
    H: int
    N: int
    grid: Optional[CollocationGrid] = field(default=None, compare=False)
    basis: Optional[BasisKind] = field(default=None, compare=False)
    lift: Optional["BoundaryLift"] = field(default=None, compare=False)

    def block(self, r: int, k: int) -> np.ndarray:
        N = self.N
        return self.phi_L[r * N:(r + 1) * N, k * N:(k + 1) * N]


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _panel_rule(edges: np.ndarray, order: int):
    """Nodes and weights of composite Gauss-Legendre on consecutive edges."""
    t, w = _gl(order)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * t[None, :]
    return nodes.ravel(), (half[:, None] * w[None, :]).ravel()


def _bump_scale(b) -> Optional[float]:
    shape = getattr(b, "shape", None)
    return 1.0 / shape if shape else None


def _bump_points(b, d: float) -> np.ndarray:
    s = _bump_scale(b)
    if s is None:
        return np.array([-d])
    return -d + s * np.arange(-8, 9)


def _check_pair(b, p: GtsParams):
    if getattr(b, "tag", None) == "cubic" and p.alpha_max >= 1:
        raise UnsupportedBasisForMeasure(
            f"cubic basis with alpha = {p.alpha_max} >= 1; use a Gaussian or multiquadric basis")


# ---------------------------------------------------------------------------
# tempered stable integral

def _inner_delta(b, q: QuadratureConfig) -> tuple[np.ndarray, float]:
    """Graded inner breakpoints (descending from inner_split) and the sliver width."""
    k = q.panels_inner
    pts = q.inner_split * q.inner_ratio ** np.arange(k + 1)
    s = _bump_scale(b)
    # the Taylor sliver must be short on the basis length scale
    while s is not None and pts[-1] > 0.01 * s:
        pts = np.append(pts, pts[-1] * q.inner_ratio)
    return pts, float(pts[-1])


def _sliver(b, d: np.ndarray, p: GtsParams, sg: int, delta: float) -> np.ndarray:
    """int_0^delta (phi(d + sg y) - phi(d) - sg y phi'(d)) nu(sg y) dy via Taylor terms."""
    c, beta, alpha = p.side(sg)
    der = b.derivatives(d, MAX_ORDER, side=sg)
    out = np.zeros_like(d)
    for n in range(2, MAX_ORDER + 1):
        s = n - alpha
        mom = c * beta ** (-s) * special.gammainc(s, beta * delta) * special.gamma(s)
        out += der[n] * sg ** n / factorial(n) * mom
    return out


def _gts_pieces(b, d, p: GtsParams, q: QuadratureConfig) -> np.ndarray:
    """The four pieces (z<-1, -1<z<0, 0<z<1, z>1) for every offset d = x - c."""
    _check_pair(b, p)
    d = np.atleast_1d(np.asarray(d, dtype=float))
    out = np.zeros((d.size, 4))
    inner, delta = _inner_delta(b, q)
    outer = np.linspace(1.0, q.z_cut, q.panels_outer + 1)
    base = np.union1d(np.union1d(inner, outer), [1.0])
    phi0 = b(d)
    for col, sg in ((2, 1), (1, -1)):
        out[:, col] += _sliver(b, d, p, sg, delta)
        # per-offset panels: shared grading plus breakpoints around the bump
        idx, nodes, weights = [], [], []
        for m, dm in enumerate(d):
            extra = sg * _bump_points(b, dm)
            extra = extra[(extra > delta) & (extra < q.z_cut)]
            edges = np.union1d(base, extra)
            y, w = _panel_rule(edges, q.gl_order)
            idx.append(np.full(y.size, m))
            nodes.append(y)
            weights.append(w)
        idx = np.concatenate(idx)
        y = np.concatenate(nodes)
        w = np.concatenate(weights) * p.density(sg * y)
        z = sg * y
        dd = d[idx]
        is_inner = y < 1.0
        f = np.empty_like(y)
        f[is_inner] = b.compensated(dd[is_inner], z[is_inner])
        f[~is_inner] = b(dd[~is_inner] + z[~is_inner]) - phi0[idx[~is_inner]]
        inner_sum = np.bincount(idx[is_inner], (w * f)[is_inner], minlength=d.size)
        outer_sum = np.bincount(idx[~is_inner], (w * f)[~is_inner], minlength=d.size)
        out[:, col] += inner_sum
        out[:, 3 if sg > 0 else 0] += outer_sum
    return out


def singular_integral_pieces(b, center, x, p: GtsParams, q: QuadratureConfig = QuadratureConfig()):
    """(I1, I2, I3, I4) over z < -1, -1 < z < 0, 0 < z < 1 and z > 1."""
    d = np.asarray(x, float) - np.asarray(center, float)
    out = _gts_pieces(b, d.ravel(), p, q)
    return out.reshape(d.shape + (4,))


def singular_integral(b, center, x, p: GtsParams, q: QuadratureConfig = QuadratureConfig()):
    """int_{0<|z|<=z_cut} (phi(x+z-c) - phi(x-c) - z 1_{|z|<=1} phi'(x-c)) nu(dz)."""
    out = singular_integral_pieces(b, center, x, p, q).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# synchronous jumps

def _sync_edges(lam: float, hi: float, extra) -> np.ndarray:
    """Breakpoints in y = |z| on [0, hi] for an exponential weight with rate lam."""
    scale = np.array([0.0, 0.25, 0.5, 1, 2, 4, 8, 16, 24, 32, 48]) / lam
    edges = np.concatenate([scale, np.linspace(0, hi, 17), np.asarray(extra, float)])
    edges = np.unique(np.clip(edges, 0.0, hi))
    return edges


def cross_regime_integral(b, center, x, s: SyncJumpSpec, j: int, k: int,
                          z_cut: float = 10.0, gl_order: int = 16) -> float:
    """int phi(x + z - c) mu_jk(z) dz over the jump half-line, truncated at |z| = z_cut."""
    if s.sign(j, k) == 0:
        return 0.0
    lam, sg = s.rate(j, k), s.sign(j, k)
    d = float(x) - float(center)
    edges = _sync_edges(lam, z_cut, sg * _bump_points(b, d))
    y, w = _panel_rule(edges, gl_order)
    return float(np.sum(w * lam * np.exp(-lam * y) * b(d + sg * y)))


def _sync_block(b, x: np.ndarray, centers: np.ndarray, s: SyncJumpSpec, j: int, k: int,
                q: QuadratureConfig) -> np.ndarray:
    """Rows x_i, columns centres: int u(x_i + z) mu_jk(z) dz, u continued by its boundary value."""
    if s.sign(j, k) == 0:
        return b(x[:, None] - centers[None, :])
    N = x.size
    lam, sg = s.rate(j, k), s.sign(j, k)
    scale = _bump_scale(b)
    reach = 40.0 / lam
    out = np.zeros((N, centers.size))
    bval = b(x[-1] - centers) if sg > 0 else b(x[0] - centers)
    h = np.min(np.diff(x))
    stride = max(1, int(scale / h)) if scale is not None else 1
    for i in range(1, N - 1):
        room = (x[-1] - x[i]) if sg > 0 else (x[i] - x[0])
        hi = min(room, reach) if q.far_field else min(q.z_cut, reach)
        # node offsets double as panel breakpoints (kinks / bump centres)
        ys = np.sort(sg * (x - x[i]))
        ys = ys[(ys > 0) & (ys < hi)][::stride]
        edges = _sync_edges(lam, hi, ys)
        y, w = _panel_rule(edges, q.gl_order)
        w = w * lam * np.exp(-lam * y)
        pts = x[i] + sg * y
        cols = slice(None)
        if scale is not None:
            lo_c, hi_c = pts.min() - 9 * scale, pts.max() + 9 * scale
            cols = np.flatnonzero((centers >= lo_c) & (centers <= hi_c))
        out[i, cols] = w @ b(pts[:, None] - centers[None, cols])
        if q.far_field:
            # mass that lands outside the domain sees the boundary value
            out[i] += np.exp(-lam * room) * bval
    return out


# ---------------------------------------------------------------------------
# far field

def _far_field(b, x: np.ndarray, centers: np.ndarray, p: GtsParams,
               q: QuadratureConfig) -> np.ndarray:
    """Correction replacing phi(x_i + z) by its boundary value when x_i + z leaves the domain."""
    N = x.size
    scale = _bump_scale(b)
    out = np.zeros((N, centers.size))
    for sg, edge in ((-1, x[0]), (1, x[-1])):
        c, beta, alpha = p.side(sg)
        bval = b(edge - centers)
        for i in range(1, N - 1):
            a = abs(edge - x[i])
            if a >= q.z_cut:
                continue
            hi = q.z_cut
            if scale is not None:
                hi = min(hi, a + 12 * scale)
            geo = a * 1.5 ** np.arange(0, 60)
            edges = np.concatenate([geo[geo < hi], [hi], a + (scale or 0.5) * np.arange(13),
                                    np.linspace(a, hi, 9)])
            edges = np.unique(edges[(edges >= a) & (edges <= hi)])
            y, w = _panel_rule(edges, q.gl_order)
            w = w * p.density(sg * y)
            mass = side_moment(c, beta, alpha, 0, a, q.z_cut)
            out[i] += mass * bval - w @ b((x[i] + sg * y)[:, None] - centers[None, :])
    return out


# ---------------------------------------------------------------------------
# assembly

def _offset_table(b, x: np.ndarray, centers: np.ndarray, p: GtsParams,
                  q: QuadratureConfig, h: Optional[float]) -> np.ndarray:
    """Singular integrals for every (row, centre) pair, evaluated once per distinct offset."""
    diff = x[:, None] - centers[None, :]
    if h is not None:
        m = np.rint(diff / h).astype(int)
        if np.allclose(m * h, diff, rtol=0, atol=1e-9 * h):
            lo = m.min()
            vals = _gts_pieces(b, h * np.arange(lo, m.max() + 1), p, q).sum(axis=1)
            return vals[m - lo]
    uniq, inv = np.unique(np.round(diff, 13), return_inverse=True)
    vals = _gts_pieces(b, uniq, p, q).sum(axis=1)
    return vals[inv].reshape(diff.shape)


def _lift(b, g: CollocationGrid):
    """Ghost centres left of x_min carrying the boundary value 1 (Gaussian only).

    With coefficient a = 1 / sum_m phi(m h) a lattice of Gaussians reproduces
    the constant 1; the ghost half of that lattice is a fixed function G that
    makes the nodal expansion u - G vanish near x_min, which removes the edge
    defect of Gaussian interpolation there.
    """
    if getattr(b, "tag", None) != "gaussian":
        return np.empty(0), 0.0
    h0 = g.nodes[1] - g.nodes[0]
    t = b.shape * h0
    M = int(np.ceil(7.0 / t)) + 1
    coeff = 1.0 / np.sum(np.exp(-(t * np.arange(-4 * M, 4 * M + 1)) ** 2))
    return g.nodes[0] - h0 * np.arange(M, 0, -1), float(coeff)


@dataclass(frozen=True)
class BoundaryLift:
    """u = G + sum_m c_m phi_m with G = coeff * sum_g phi(x - ghost_g)."""
    centers: np.ndarray
    coeff: float
    at_nodes: np.ndarray        # G(x_i)
    L: np.ndarray               # (H*N,) generator applied to G at the nodes

    def __call__(self, b, x):
        x = np.atleast_1d(np.asarray(x, float))
        if self.centers.size == 0:
            return np.zeros(x.shape)
        return self.coeff * b(x[:, None] - self.centers[None, :]).sum(axis=1)


def assemble_blocks(model: SwitchingModel, b: BasisKind, g: CollocationGrid,
                    q: QuadratureConfig = QuadratureConfig(), lift: bool = True) -> OperatorBlocks:
    x = g.nodes
    N, H = g.n, model.H
    Q = model.generator.q
    ghosts, coeff = _lift(b, g) if lift else (np.empty(0), 0.0)
    M = ghosts.size
    centers = np.concatenate([ghosts, x])
    diff = x[:, None] - centers[None, :]
    phi_all = b(diff)
    phi = gram_matrix(b, g)
    d1, d2 = b(diff, 1), b(diff, 2)
    h = g.spacing
    gw = np.full(M, coeff)
    big = np.zeros((H * N, H * N))
    lift_L = np.zeros(H * N)
    for r, reg in enumerate(model.regimes):
        rows = slice(r * N, (r + 1) * N)
        blk = reg.mu * d1 + 0.5 * reg.sigma ** 2 * d2 + Q[r, r] * phi_all
        if reg.gts is not None:
            blk = blk + _offset_table(b, x, centers, reg.gts, q, h)
            if q.far_field:
                blk = blk + _far_field(b, x, centers, reg.gts, q)
        big[rows, rows] = blk[:, M:]
        lift_L[rows] += blk[:, :M] @ gw
        for k in range(H):
            if k != r and Q[r, k] != 0:
                sb = Q[r, k] * _sync_block(b, x, centers, model.jumps, r, k, q)
                big[rows, k * N:(k + 1) * N] = sb[:, M:]
                lift_L[rows] += sb[:, :M] @ gw
    # boundary rows are replaced by boundary conditions in the time stepper
    for r in range(H):
        for i in (r * N, r * N + N - 1):
            big[i] = 0.0
            lift_L[i] = 0.0
    big.setflags(write=False)
    phi.setflags(write=False)
    lifted = BoundaryLift(ghosts, coeff, phi_all[:, :M] @ gw, lift_L)
    return OperatorBlocks(phi, big, H, N, g, b, lifted)
