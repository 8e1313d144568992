"""Continuous-time Markov chain driving the regime switches.

The chain is described by its generator (intensity) matrix ``Q``; transition
probabilities over a horizon ``dt`` are ``expm(Q * dt)``.  The matrix
exponential below is a scaling-and-squaring Pade(13) implementation that also
accepts stacks of complex matrices, which the Fourier oracle needs for the
frequency-dependent matrix ``A(omega)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-12


class GeneratorError(ValueError):
    """Raised when a matrix is not a valid Markov generator."""


class NegativeOffDiagonal(GeneratorError):
    def __init__(self, i: int, j: int, value: float):
        self.i, self.j = i, j
        super().__init__(f"q[{i},{j}] = {value!r} is negative")


class RowSumNonZero(GeneratorError):
    def __init__(self, i: int, total: float):
        self.i = i
        super().__init__(f"row {i} of the generator sums to {total!r}, not 0")


class NonFiniteResult(ArithmeticError):
    """Matrix exponential overflowed or produced NaN."""


@dataclass(frozen=True)
class GeneratorMatrix:
    q: np.ndarray

    @property
    def H(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class TransitionMatrix:
    p: np.ndarray
    horizon: float


def validate_generator(q) -> GeneratorMatrix:
    q = np.array(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
        raise GeneratorError(f"generator must be a non-empty square matrix, got shape {q.shape}")
    H = q.shape[0]
    for i in range(H):
        for j in range(H):
            if i != j and q[i, j] < 0:
                raise NegativeOffDiagonal(i, j, q[i, j])
    sums = q.sum(axis=1)
    for i in range(H):
        if abs(sums[i]) > ROW_SUM_TOL:
            raise RowSumNonZero(i, sums[i])
    q.setflags(write=False)
    return GeneratorMatrix(q)


# Pade(13) coefficients and the 1-norm threshold theta_13 (Higham 2005).
_B13 = np.array([
    64764752532480000., 32382376266240000., 7771770303897600., 1187353796428800.,
    129060195264000., 10559470521600., 670442572800., 33522128640., 1323241920.,
    40840800., 960960., 16380., 182., 1.,
])
_THETA13 = 5.371920351148152


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of ``a`` (shape ``(..., n, n)``, real or complex)."""
    a = np.asarray(a)
    if a.shape[-1] != a.shape[-2]:
        raise ValueError("expm needs square matrices")
    dtype = np.result_type(a.dtype, np.float64)
    a = a.astype(dtype, copy=False)
    batch = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape((-1, n, n))

    if not np.all(np.isfinite(a)):
        raise NonFiniteResult("matrix exponential of a non-finite matrix")
    norm1 = np.abs(a).sum(axis=-2).max(axis=-1)
    with np.errstate(divide="ignore", over="ignore"):
        s = np.where(norm1 > _THETA13, np.ceil(np.log2(norm1 / _THETA13)), 0.0)
    s = s.astype(int)
    a = a / (2.0 ** s)[:, None, None]
    with np.errstate(all="ignore"):
        r = _pade13(a, s, dtype)
    if not np.all(np.isfinite(r)):
        raise NonFiniteResult("matrix exponential is not finite; check generator magnitudes")
    return r.reshape(batch + (n, n))


def _pade13(a, s, dtype):
    n = a.shape[-1]

    b = _B13
    ident = np.broadcast_to(np.eye(n, dtype=dtype), a.shape)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    r = np.linalg.solve(v - u, v + u)

    for k in range(int(s.max(initial=0))):
        active = s > k
        r[active] = r[active] @ r[active]
    return r


def transition_matrix(g: GeneratorMatrix, dt: float) -> TransitionMatrix:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0 or not np.any(g.q):
        return TransitionMatrix(np.eye(g.H), float(dt))
    with np.errstate(over="ignore"):
        a = g.q * dt
    return TransitionMatrix(expm(a), float(dt))
