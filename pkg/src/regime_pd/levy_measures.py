"""Generalized tempered stable (GTS) Levy measures and synchronous jumps.

A GTS measure has density

    nu(z) = C_+ w(beta_+ z) / z^(1+alpha_+)        for z > 0
          = C_- w(beta_- |z|) / |z|^(1+alpha_-)    for z < 0

with ``alpha_pm < 2``.  VG, CGMY and KoBoL are the usual sub-families.  All
characteristic exponents here use the truncation function ``1_{|z|<1}``:

    Psi(w) = i mu w - sigma^2 w^2 / 2 + int (e^{iwz} - 1 - iwz 1_{|z|<1}) nu(dz)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

# w(z) must be continuous, decreasing, w(0+) = 1 and decay faster than any power.
TEMPERINGS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "exponential": lambda z: np.exp(-z),
}



class IndexOutOfRange(ValueError):
    """Stability index alpha >= 2: the GTS density is not a Levy density."""


class DomainError(ValueError):
    pass


class DiagonalQuery(ValueError):
    """Synchronous jumps are attached to switches i -> j with i != j only."""


class QuadratureFailure(ArithmeticError):
    pass


@dataclass(frozen=True)
class GtsParams:
    c_plus: float
    c_minus: float
    beta_plus: float
    beta_minus: float
    alpha_plus: float
    alpha_minus: float
    tempering: str = "exponential"

    def __post_init__(self):
        if self.c_plus <= 0 or self.c_minus <= 0:
            raise ValueError("amplitudes C_+ and C_- must be positive")
        if self.beta_plus <= 0 or self.beta_minus <= 0:
            raise ValueError("tempering rates beta_+ and beta_- must be positive")
        if self.alpha_plus >= 2 or self.alpha_minus >= 2:
            raise IndexOutOfRange(
                f"alpha_+={self.alpha_plus}, alpha_-={self.alpha_minus}: need alpha < 2")
        if self.tempering not in TEMPERINGS:
            raise ValueError(f"unknown tempering function {self.tempering!r}")

    @property
    def alpha_max(self) -> float:
        return max(self.alpha_plus, self.alpha_minus)

    @property
    def finite_activity(self) -> bool:
        return self.alpha_max < 0

    @property
    def finite_variation(self) -> bool:
        return self.alpha_max < 1

    @property
    def activity_class(self) -> str:
        if self.finite_activity:
            return "finite-activity"
        if self.finite_variation:
            return "infinite-activity-finite-variation"
        return "infinite-variation"

    @property
    def is_symmetric(self) -> bool:
        return (self.c_plus == self.c_minus and self.beta_plus == self.beta_minus
                and self.alpha_plus == self.alpha_minus)

    def side(self, sign: int) -> tuple[float, float, float]:
        """(C, beta, alpha) of the positive (sign=+1) or negative half-line."""
        if sign > 0:
            return self.c_plus, self.beta_plus, self.alpha_plus
        return self.c_minus, self.beta_minus, self.alpha_minus

    def w(self, z):
        return TEMPERINGS[self.tempering](z)

    def density(self, z):
        """Density on |z| > 0, vectorised; zero is mapped to nan."""
        z = np.asarray(z, dtype=float)
        a = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            pos = self.c_plus * self.w(self.beta_plus * a) / a ** (1 + self.alpha_plus)
            neg = self.c_minus * self.w(self.beta_minus * a) / a ** (1 + self.alpha_minus)
        out = np.where(z > 0, pos, neg)
        return np.where(z == 0, np.nan, out)


def gts_density(p: GtsParams, z):
    z = np.asarray(z, dtype=float)
    if np.any(z == 0):
        raise DomainError("the GTS density is singular at z = 0")
    out = p.density(z)
    return float(out) if out.ndim == 0 else out


def vg_params(sigma: float, theta: float, kappa: float) -> GtsParams:
    """Variance gamma (sigma, theta, kappa) as a GTS measure with alpha = 0.

    With s = sqrt(theta^2 kappa^2 / 4 + sigma^2 kappa / 2) the tempering rates
    are 1/beta_+ = s + theta kappa / 2 and 1/beta_- = s - theta kappa / 2, so
    (1 - iu/beta_+)(1 + iu/beta_-) = 1 - iu theta kappa + sigma^2 kappa u^2 / 2.
    """
    if sigma <= 0 or kappa <= 0:
        raise ValueError("VG needs sigma > 0 and kappa > 0")
    s = np.sqrt(theta ** 2 * kappa ** 2 / 4 + sigma ** 2 * kappa / 2)
    half = theta * kappa / 2
    return GtsParams(1 / kappa, 1 / kappa, 1 / (s + half), 1 / (s - half), 0.0, 0.0)


def cgmy_params(C: float, G: float, M: float, Y: float) -> GtsParams:
    if Y >= 2:
        raise IndexOutOfRange(f"CGMY needs Y < 2, got {Y}")
    if C <= 0 or G <= 0 or M <= 0:
        raise ValueError("CGMY needs C, G, M > 0")
    return GtsParams(C, C, M, G, Y, Y)


def kobol_params(C: float, Y: float, p: float, q: float, lam: float) -> GtsParams:
    """KoBoL with tail weights p (positive jumps) and q (negative jumps)."""
    if Y >= 2:
        raise IndexOutOfRange(f"KoBoL needs Y < 2, got {Y}")
    if lam <= 0 or p < 0 or q < 0:
        raise ValueError("KoBoL needs lambda > 0 and p, q >= 0")
    return GtsParams(C * p, C * q, lam, lam, Y, Y)


def symmetrized_measure(p: GtsParams) -> GtsParams:
    """Symmetric GTS measure with C = max, beta = min, alpha = max.

    It dominates ``p`` on |z| <= 1, and everywhere when alpha_+ == alpha_-
    (VG, CGMY, KoBoL).
    """
    return GtsParams(
        max(p.c_plus, p.c_minus), max(p.c_plus, p.c_minus),
        min(p.beta_plus, p.beta_minus), min(p.beta_plus, p.beta_minus),
        p.alpha_max, p.alpha_max, p.tempering,
    )


# ---------------------------------------------------------------------------
# incomplete gamma helpers (exponential tempering)

def upper_gamma(s, x):
    """Upper incomplete gamma Gamma(s, x) for real s (any sign) and x > 0."""
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    s, x = np.broadcast_arrays(s, x)
    out = np.empty(s.shape)
    flat_s, flat_x, flat_o = s.ravel(), x.ravel(), out.reshape(-1)
    for k in range(flat_s.size):
        flat_o[k] = _upper_gamma_scalar(flat_s[k], flat_x[k])
    return out if out.ndim else float(out)


def _upper_gamma_scalar(s: float, x: float) -> float:
    if np.isinf(x):
        return 0.0
    if s > 0:
        return special.gammaincc(s, x) * special.gamma(s)
    n = int(np.ceil(-s))
    base = s + n
    # Gamma(s, x) = (Gamma(s + 1, x) - x^s e^{-x}) / s, applied downward from base in [0, 1).
    g = special.exp1(x) if base == 0 else special.gammaincc(base, x) * special.gamma(base)
    a = base
    for _ in range(n):
        a -= 1
        g = (g - x ** a * np.exp(-x)) / a
    return g


def side_moment(c: float, beta: float, alpha: float, n: float, lo: float, hi: float) -> float:
    """int_lo^hi z^n c e^{-beta z} z^{-1-alpha} dz for 0 <= lo < hi <= inf."""
    s = n - alpha
    if lo == 0:
        if s <= 0:
            return np.inf
        total = special.gamma(s) * special.gammainc(s, beta * hi) if np.isfinite(hi) else special.gamma(s)
        return c * beta ** (-s) * total
    return c * beta ** (-s) * (_upper_gamma_scalar(s, beta * lo) - _upper_gamma_scalar(s, beta * hi))


def abs_moment(p: GtsParams, n: float, lo: float = 0.0, hi: float = np.inf) -> float:
    """int_{lo <= |z| <= hi} |z|^n nu(dz), summed over both half-lines."""
    if p.tempering == "exponential":
        return sum(side_moment(*p.side(sg), n, lo, hi) for sg in (1, -1))
    total = 0.0
    for sg in (1, -1):
        c, beta, alpha = p.side(sg)
        f = lambda z: z ** (n - 1 - alpha) * c * p.w(beta * z)
        val, _ = integrate.quad(f, lo, hi, limit=200, epsabs=0, epsrel=1e-12)
        total += val
    return total


# ---------------------------------------------------------------------------
# characteristic exponents

@dataclass(frozen=True)
class RegimeModel:
    mu: float = 0.0
    sigma: float = 0.0
    gts: Optional[GtsParams] = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def _side_exponent(u, c: float, beta: float, alpha: float):
    """int_0^inf (e^{iuz} - 1 - iuz) c e^{-beta z} z^{-1-alpha} dz, analytically continued in alpha."""
    u = np.asarray(u, dtype=complex)
    if abs(alpha) < 1e-12:
        t = 1j * u / beta
        return c * (-np.log1p(-t) - t)
    if abs(alpha - 1) < 1e-12:
        t = 1j * u / beta
        return c * ((beta - 1j * u) * np.log1p(-t) + 1j * u)
    return c * special.gamma(-alpha) * (
        (beta - 1j * u) ** alpha - beta ** alpha + 1j * u * alpha * beta ** (alpha - 1))


def jump_exponent(p: GtsParams, omega):
    """Jump part of Psi with truncation 1_{|z|<1}, vectorised over omega."""
    omega = np.asarray(omega, dtype=float)
    if p.tempering != "exponential":
        return _jump_exponent_quad(p, omega)
    cp, bp, ap = p.side(1)
    cm, bm, am = p.side(-1)
    full = _side_exponent(omega, cp, bp, ap) + _side_exponent(-omega, cm, bm, am)
    tail_mean = side_moment(cp, bp, ap, 1, 1.0, np.inf) - side_moment(cm, bm, am, 1, 1.0, np.inf)
    return full + 1j * omega * tail_mean


def _jump_exponent_quad(p: GtsParams, omega):
    out = np.empty(omega.shape, dtype=complex)
    for idx, w in np.ndenumerate(omega):
        re = im = 0.0
        for sg in (1, -1):
            c, beta, alpha = p.side(sg)
            dens = lambda z: c * p.w(beta * z) * z ** (-1 - alpha)
            ws = sg * w
            # (cos - 1) and (sin - wz) are O(z^2) at the origin; weight='alg' takes z^(1-alpha).
            rc = lambda z: -2 * np.sin(ws * z / 2) ** 2 / z ** 2 * c * p.w(beta * z)
            rs = lambda z: _sin_minus_linear(ws, z) / z ** 2 * c * p.w(beta * z)
            opts = dict(limit=400, epsabs=1e-13, epsrel=1e-12, full_output=1)
            r1 = integrate.quad(rc, 0, 1, weight="alg", wvar=(1 - alpha, 0), **opts)
            r2 = integrate.quad(rs, 0, 1, weight="alg", wvar=(1 - alpha, 0), **opts)
            r3 = integrate.quad(lambda z: (np.cos(ws * z) - 1) * dens(z), 1, np.inf, **opts)
            r4 = integrate.quad(lambda z: np.sin(ws * z) * dens(z), 1, np.inf, **opts)
            for r in (r1, r2, r3, r4):
                if len(r) > 3 and r[1] > 1e-10:
                    raise QuadratureFailure(f"Levy-Khintchine quadrature did not converge at omega={w}")
            re += r1[0] + r3[0]
            im += sg * (r2[0] + r4[0])
        out[idx] = re + 1j * im
    return out


def _sin_minus_linear(w, z):
    x = w * z
    small = np.abs(x) < 1e-3
    series = -x ** 3 / 6 + x ** 5 / 120
    return np.where(small, series, np.sin(x) - x)


def characteristic_exponent(m: RegimeModel, omega):
    omega = np.asarray(omega, dtype=float)
    psi = 1j * m.mu * omega - 0.5 * m.sigma ** 2 * omega ** 2 + 0j
    if m.gts is not None:
        psi = psi + jump_exponent(m.gts, omega)
    return psi if psi.ndim else complex(psi)


# ---------------------------------------------------------------------------
# synchronous jumps

@dataclass(frozen=True)
class SyncJumpSpec:
    """Signed exponential jump parameters attached to regime switches.

    ``eta[i, j]`` governs the jump taken when the chain moves from i to j; its
    sign selects the half-line and zero means no jump.  With
    ``convention="rate"`` the jump density is |eta| exp(-|eta| |z|); with
    ``convention="mean"`` |eta| is the mean jump size, i.e. the rate is 1/|eta|.
    """
    eta: np.ndarray
    convention: str = "rate"

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float)
        if eta.ndim != 2 or eta.shape[0] != eta.shape[1]:
            raise ValueError("eta must be a square matrix")
        if self.convention not in ("rate", "mean"):
            raise ValueError(f"unknown eta convention {self.convention!r}")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def none(cls, H: int) -> "SyncJumpSpec":
        return cls(np.zeros((H, H)))

    @classmethod
    def from_rows(cls, per_state, convention: str = "rate") -> "SyncJumpSpec":
        """Every switch leaving state i uses the parameter ``per_state[i]``."""
        v = np.asarray(per_state, dtype=float)
        eta = np.repeat(v[:, None], v.size, axis=1)
        np.fill_diagonal(eta, 0.0)
        return cls(eta, convention)

    @property
    def H(self) -> int:
        return self.eta.shape[0]

    def _check(self, i, j):
        if i == j:
            raise DiagonalQuery(f"no synchronous jump on the diagonal ({i}, {j})")

    def has_jump(self, i: int, j: int) -> bool:
        self._check(i, j)
        return self.eta[i, j] != 0

    def sign(self, i: int, j: int) -> int:
        self._check(i, j)
        return int(np.sign(self.eta[i, j]))

    def rate(self, i: int, j: int) -> float:
        self._check(i, j)
        e = abs(self.eta[i, j])
        if e == 0:
            return np.inf
        return e if self.convention == "rate" else 1.0 / e


def sync_jump_density(s: SyncJumpSpec, i: int, j: int, z):
    lam, sg = s.rate(i, j), s.sign(i, j)
    z = np.asarray(z, dtype=float)
    if sg == 0:
        raise ValueError(f"no synchronous jump attached to switch {i} -> {j}")
    out = np.where(np.sign(z) == sg, lam * np.exp(-lam * np.abs(z)), 0.0)
    return float(out) if out.ndim == 0 else out


def sync_jump_cf(s: SyncJumpSpec, i: int, j: int, u):
    """E[exp(iuJ)]; equals 1 when no jump is attached to the switch."""
    lam, sg = s.rate(i, j), s.sign(i, j)
    u = np.asarray(u, dtype=float)
    if sg == 0:
        out = np.ones(u.shape, dtype=complex)
    else:
        out = lam / (lam - 1j * u * sg)
    return complex(out) if out.ndim == 0 else out
