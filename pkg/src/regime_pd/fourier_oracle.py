"""Reference default probabilities by Fourier inversion.

The log-asset of a regime-switching Levy model with synchronous jumps has
characteristic function

    E_j[exp(i w X_T)] = (expm(A(w) T) 1)_j,
    A(w) = diag(Psi_j(w)) + Q o Theta(w),

where Theta_jk(w) is the characteristic function of the jump attached to the
switch j -> k (one on the diagonal).  The CDF follows from Gil-Pelaez,

    P(X_T <= k) = 1/2 - (1/pi) int_0^inf Im(exp(-i w k) phi(w)) / w dw.

The frequency integral is marched panel by panel with Gauss-Legendre rules.
None of this shares quadrature code with the collocation operator, so the two
can be used to validate each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .levy_measures import characteristic_exponent, side_moment, sync_jump_cf
from .model import SwitchingModel
from .regime_chain import expm


class InversionNotConverged(ArithmeticError):
    pass


@dataclass(frozen=True)
class CfMatrix:
    omega: np.ndarray
    a: np.ndarray


def cf_matrix(model: SwitchingModel, omega) -> CfMatrix:
    """Stack of A(w), shape (len(omega), H, H)."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    H = model.H
    q = model.generator.q
    a = np.empty((w.size, H, H), dtype=complex)
    for j in range(H):
        for k in range(H):
            if j == k:
                a[:, j, j] = characteristic_exponent(model.regimes[j], w) + q[j, j]
            elif q[j, k] == 0:
                a[:, j, k] = 0
            else:
                a[:, j, k] = q[j, k] * sync_jump_cf(model.jumps, j, k, w)
    return CfMatrix(w, a)


def regime_cf(model: SwitchingModel, omega, T: float, start_regime: Optional[int] = None):
    """E[exp(i w X_T) | regime at 0]; all regimes as the last axis when start_regime is None."""
    if T < 0:
        raise ValueError("T must be non-negative")
    scalar = np.ndim(omega) == 0
    cm = cf_matrix(model, omega)
    vals = expm(cm.a * T).sum(axis=-1)
    if start_regime is not None:
        vals = vals[:, start_regime]
    return vals[0] if scalar else vals


# ---------------------------------------------------------------------------
# Gil-Pelaez inversion

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class InversionSettings:
    tol: float = 1e-10          # integrand envelope at which the march stops
    max_omega: float = 1e7
    periods_per_panel: float = 2.0
    chunk: int = 256            # panels evaluated per batch
    fail_tol: float = 1e-7      # largest acceptable tail correction when max_omega is hit


def _moments(model: SwitchingModel, T: float, h: float = 1e-3):
    """Mean and variance of X_T per starting regime, from the CF near 0."""
    phi = regime_cf(model, np.array([-h, 0.0, h]), T)
    logs = np.log(phi)
    mean = ((logs[2] - logs[0]) / (2j * h)).real
    var = -((logs[2] - 2 * logs[1] + logs[0]) / h ** 2).real
    return mean, np.maximum(var, 0.0)


def _phase_speed(model: SwitchingModel, T: float, k: float) -> float:
    """Upper estimate of |d/dw arg(exp(-iwk) phi(w))| at large w."""
    speed = 0.0
    for r in model.regimes:
        b = r.mu
        if r.gts is not None and r.gts.finite_variation:
            cp, bp, ap = r.gts.side(1)
            cm, bm, am = r.gts.side(-1)
            b -= side_moment(cp, bp, ap, 1, 0, 1.0) - side_moment(cm, bm, am, 1, 0, 1.0)
        speed = max(speed, abs(b) * T)
    return abs(k) + speed


def default_probability(model: SwitchingModel, T: float, start_regime: Optional[int], k: float,
                        settings: InversionSettings = InversionSettings()):
    """P(X_T <= k | X_0 = 0, regime) for one regime or all of them.

    Panels start narrow (resolving the bulk of the distribution) and widen
    geometrically up to a width covering ``periods_per_panel`` oscillations.
    The march stops once max |phi(w)| / w drops below ``settings.tol``; the
    remainder is estimated by treating the integrand as a single damped
    exponential beyond the last node.
    """
    if T <= 0:
        raise ValueError("default_probability needs T > 0")
    mean, var = _moments(model, T)
    spread = np.sqrt(np.max(var))
    bulk = abs(k) + np.max(np.abs(mean)) + 6 * spread
    kappa = max(_phase_speed(model, T, k), np.max(np.abs(mean - k)), 1e-3)
    w_first = min(0.25, 0.5 / bulk)
    w_max = max(w_first, 2 * np.pi * settings.periods_per_panel / kappa)

    def values(w):
        phi = regime_cf(model, w, T)
        return np.exp(-1j * w * k)[:, None] * phi

    total = np.zeros(model.H)
    a, width = 0.0, w_first
    tail = np.zeros(model.H)
    while True:
        widths = np.empty(settings.chunk)
        for i in range(settings.chunk):
            widths[i] = width
            width = min(w_max, width * 1.08)
        edges = a + np.concatenate([[0.0], np.cumsum(widths)])
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * widths
        nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        f = values(nodes)
        g = (f.imag / nodes[:, None]).reshape(settings.chunk, _GL_NODES.size, -1)
        total += np.einsum("p,q,pqh->h", half, _GL_WEIGHTS, g)
        a = edges[-1]

        # envelope and local log-derivative at the end of the chunk
        ends = np.array([a, a * (1 + 1e-7)])
        fe = values(ends)
        env = np.max(np.abs(fe[0])) / a
        with np.errstate(all="ignore"):
            lam = (fe[1] - fe[0]) / (fe[0] * a * 1e-7)
            tail = (-(fe[0] / a) / (lam - 1 / a)).imag
        tail = np.where(np.isfinite(tail), tail, 0.0)
        if env < settings.tol:
            break
        if a > settings.max_omega:
            if np.max(np.abs(tail)) > settings.fail_tol:
                raise InversionNotConverged(
                    f"integrand envelope {env:.3g} at omega={a:.3g}; "
                    f"tail estimate {np.max(np.abs(tail)):.3g}")
            break
    pd = 0.5 - (total + tail) / np.pi
    return float(pd[start_regime]) if start_regime is not None else pd
