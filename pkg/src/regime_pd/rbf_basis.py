"""Radial basis functions on the line, collocation grids and Gram matrices."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import factorial
from typing import Optional

import numpy as np

KINDS = ("gaussian", "multiquadric", "cubic")
MAX_ORDER = 7
COND_LIMIT = 1e14
# eps * |z| below this switches the compensated difference to its Taylor series
_TAYLOR_SWITCH = 0.02


class IllConditioned(UserWarning):
    pass


@dataclass(frozen=True)
class BasisKind:
    tag: str
    shape: Optional[float] = None

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ValueError(f"unknown basis {self.tag!r}; expected one of {KINDS}")
        if self.tag != "cubic" and (self.shape is None or self.shape <= 0):
            raise ValueError(f"{self.tag} basis needs a positive shape parameter")

    @property
    def smooth(self) -> bool:
        """C-infinity at the origin (cubic is only C^2)."""
        return self.tag != "cubic"

    def __call__(self, r, order: int = 0):
        """order-th derivative in x of phi(|x - c|), evaluated at r = x - c."""
        r = np.asarray(r, dtype=float)
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"derivative order must be in [0, {MAX_ORDER}]")
        return self.derivatives(r, order)[order]

    def derivatives(self, r, nmax: int, side: int = 0):
        """List of the derivatives of order 0..nmax at signed offsets r.

        ``side`` picks the one-sided value of a jump discontinuity at r = 0
        (only the third derivative of the cubic has one).
        """
        r = np.asarray(r, dtype=float)
        if self.tag == "gaussian":
            eps = self.shape
            t = eps * r
            g = np.exp(-t * t)
            h_prev, h = np.zeros_like(t), np.ones_like(t)
            out = [g]
            for n in range(1, nmax + 1):
                h_prev, h = h, 2 * t * h - 2 * (n - 1) * h_prev
                out.append((-eps) ** n * h * g)
            return out
        if self.tag == "multiquadric":
            eps2 = self.shape ** 2
            u = [1 + eps2 * r * r, 2 * eps2 * r, np.full_like(r, 2 * eps2)]
            f = [np.sqrt(u[0])]
            for n in range(1, nmax + 1):
                un = u[n] if n < 3 else 0.0
                acc = sum(_binom(n, k) * f[k] * f[n - k] for k in range(1, n))
                f.append((un - acc) / (2 * f[0]))
            return f
        a = np.abs(r)
        s = np.sign(r)
        if side:
            s = np.where(r == 0, np.sign(side), s)
        out = [a ** 3, 3 * r * a, 6 * a, 6.0 * s]
        out += [np.zeros_like(r)] * max(0, nmax - 3)
        return out[: nmax + 1]

    def compensated(self, d, z):
        """phi(d + z) - phi(d) - z phi'(d) without cancellation for small z."""
        d, z = np.broadcast_arrays(np.asarray(d, float), np.asarray(z, float))
        if self.tag == "cubic":
            ad = np.abs(d)
            inside = np.abs(z) < ad
            near = 3 * ad * z * z + np.sign(d) * z ** 3
            far = np.abs(d + z) ** 3 - ad ** 3 - 3 * z * d * ad
            return np.where(inside, near, far)
        out = np.array(self(d + z) - self(d) - z * self(d, 1), ndmin=1)
        small = np.array(np.abs(z) * self.shape < _TAYLOR_SWITCH, ndmin=1)
        if np.any(small):
            ds, zs = np.ravel(d)[small.ravel()], np.ravel(z)[small.ravel()]
            der = self.derivatives(ds, MAX_ORDER)
            out[small] = sum(der[n] * zs ** n / factorial(n) for n in range(2, MAX_ORDER + 1))
        return out.reshape(d.shape)


def _binom(n: int, k: int) -> int:
    return factorial(n) // (factorial(k) * factorial(n - k))


def eval(b: BasisKind, center, x, derivative_order: int = 0):
    """Value (or x-derivative) of the basis function centred at ``center``."""
    if derivative_order > 2:
        raise ValueError("derivative_order must be 0, 1 or 2")
    out = b(np.asarray(x, float) - np.asarray(center, float), derivative_order)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CollocationGrid:
    nodes: np.ndarray
    x_min: float
    x_max: float

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("a grid needs at least two nodes")
        if np.any(np.diff(x) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if x[0] != self.x_min or x[-1] != self.x_max:
            raise ValueError("grid endpoints must coincide with the domain bounds")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> Optional[float]:
        """Uniform spacing, or None for a non-uniform grid."""
        dx = np.diff(self.nodes)
        h = (self.x_max - self.x_min) / (self.n - 1)
        return h if np.allclose(dx, h, rtol=1e-10, atol=0) else None


def uniform_grid(x_min: float, x_max: float, n: int) -> CollocationGrid:
    if n < 2 or not x_min < x_max:
        raise ValueError("uniform_grid needs n >= 2 and x_min < x_max")
    nodes = np.linspace(x_min, x_max, n)
    return CollocationGrid(nodes, float(nodes[0]), float(nodes[-1]))


def default_shape(h: float, ratio: float = 0.5) -> float:
    """Stationary shape parameter: eps * h is held at ``ratio``."""
    return ratio / h


def gram_matrix(b: BasisKind, g: CollocationGrid) -> np.ndarray:
    x = g.nodes
    phi = b(x[:, None] - x[None, :])
    phi = 0.5 * (phi + phi.T)
    cond = np.linalg.cond(phi)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        warnings.warn(f"Gram matrix condition number {cond:.3g} exceeds {COND_LIMIT:g}; "
                      "the shape parameter is too flat for this grid", IllConditioned)
    return phi


def derivative_bounds(b: BasisKind, kmax: int = 4) -> np.ndarray:
    """M_k = max_x |phi^(k)(x)| for k = 0..kmax (Gaussian only, via Hermite extrema)."""
    if b.tag != "gaussian":
        raise ValueError("closed-form derivative bounds are implemented for the Gaussian basis")
    from numpy.polynomial import hermite as herm

    eps = b.shape
    out = np.empty(kmax + 1)
    for k in range(kmax + 1):
        # extrema of H_k(t) e^{-t^2} sit at the roots of H_{k+1}
        roots = herm.hermroots([0] * (k + 1) + [1]).real
        hk = herm.hermval(roots, [0] * k + [1])
        out[k] = eps ** k * np.max(np.abs(hk) * np.exp(-roots ** 2))
    return out


def evaluate(b: BasisKind, nodes, coeffs, x, order: int = 0):
    """RBF expansion sum_j coeffs[..., j] phi(x - nodes[j]) at points x."""
    x = np.atleast_1d(np.asarray(x, float))
    basis = b(x[:, None] - np.asarray(nodes)[None, :], order)
    return np.asarray(coeffs) @ basis.T
