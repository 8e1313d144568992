"""Theta-scheme time stepping of the forward default-probability system.

With tau = T - t the default probability u(tau, x, j) solves

    du/dtau = L u,   u(0, x, j) = 1_{x < k},

and is collocated as u = sum_m Y_m phi_m.  One step reads

    (Phi - dtau (1 - theta) Phi_L) Y^{n+1} = (Phi + dtau theta Phi_L) Y^n,

so theta = 0 is fully implicit and theta = 1/2 is Crank-Nicolson (note the
labelling, reversed from the usual one).  Rows of the two boundary nodes are
replaced by u = 1 at x_min and u = 0 at x_max.

For the Gaussian basis a fixed lift G (ghost centres left of x_min with
frozen coefficients) carries the value 1 across the left edge, so the
expansion reads u = G + sum_m Y_m phi_m and the step gains dtau L G on the
right-hand side.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .model import SwitchingModel
from .pide_operator import OperatorBlocks, QuadratureConfig, assemble_blocks
from .rbf_basis import BasisKind, CollocationGrid, evaluate

CLIP_TOL = 5e-3


class BarrierOutsideDomain(ValueError):
    pass


class SingularSystem(ArithmeticError):
    """The step matrix could not be factorized (shape parameter too flat?)."""


@dataclass(frozen=True)
class SolverConfig:
    n_steps: int
    horizon: float
    barrier_log: float
    theta: float = 0.0
    rannacher: int = 4      # implicit half steps replacing the first two steps when theta > 0

    def __post_init__(self):
        if not 0 <= self.theta <= 1:
            raise ValueError("theta must lie in [0, 1]")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.rannacher < 0 or self.rannacher % 2:
            raise ValueError("rannacher must be a non-negative even number of half steps")

    @property
    def dtau(self) -> float:
        return self.horizon / self.n_steps


def initial_condition(g: CollocationGrid, k: float, H: int) -> np.ndarray:
    """Indicator 1_{x < k} at the nodes, shape (H, N)."""
    if not g.x_min < k < g.x_max:
        raise BarrierOutsideDomain(f"barrier {k} is outside ({g.x_min}, {g.x_max})")
    u0 = (g.nodes < k).astype(float)
    return np.tile(u0, (H, 1))


class Stepper:
    """Factorized theta-scheme step for fixed blocks, dtau and theta."""

    def __init__(self, blocks: OperatorBlocks, dtau: float, theta: float):
        H, N = blocks.H, blocks.N
        phi_h = np.kron(np.eye(H), blocks.phi)
        self.lhs = phi_h - dtau * (1 - theta) * blocks.phi_L
        self.rhs = phi_h + dtau * theta * blocks.phi_L
        self.lo = np.arange(H) * N
        self.hi = self.lo + N - 1
        lift = blocks.lift
        if lift is not None and lift.centers.size:
            g = np.tile(lift.at_nodes, H)
            self.forcing = dtau * lift.L
            self.b_lo, self.b_hi = 1.0 - g[self.lo], -g[self.hi]
        else:
            self.forcing = 0.0
            self.b_lo, self.b_hi = 1.0, 0.0
        for rows in (self.lo, self.hi):
            self.lhs[rows] = phi_h[rows]
        try:
            with np.errstate(all="raise"):
                self.lu = linalg.lu_factor(self.lhs, check_finite=True)
        except (linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            raise SingularSystem(str(exc)) from exc
        if not np.all(np.isfinite(self.lu[0])) or np.min(np.abs(np.diag(self.lu[0]))) == 0:
            raise SingularSystem("zero pivot in the step matrix")

    def _rhs(self, coeffs: np.ndarray) -> np.ndarray:
        b = self.rhs @ coeffs + self.forcing
        b[self.lo] = self.b_lo
        b[self.hi] = self.b_hi
        return b

    def __call__(self, coeffs: np.ndarray) -> np.ndarray:
        return linalg.lu_solve(self.lu, self._rhs(coeffs))

    def residual(self, coeffs_new: np.ndarray, coeffs_old: np.ndarray) -> float:
        b = self._rhs(coeffs_old)
        return float(np.linalg.norm(self.lhs @ coeffs_new - b) / max(np.linalg.norm(b), 1e-300))


def step(blocks: OperatorBlocks, cfg: SolverConfig, u_n: np.ndarray) -> np.ndarray:
    """One theta step on the stacked coefficient vector (refactorizes; use Stepper in loops)."""
    return Stepper(blocks, cfg.dtau, cfg.theta)(np.asarray(u_n, float))


@dataclass
class SolutionSurface:
    taus: np.ndarray
    values: np.ndarray          # (n_steps + 1, H, N)
    coeffs: np.ndarray          # same shape, RBF coefficients
    grid: CollocationGrid
    basis: BasisKind
    config: SolverConfig
    residuals: list = field(default_factory=list)
    lift: Optional[object] = None

    @property
    def clipped(self) -> np.ndarray:
        return np.clip(self.values, 0.0, 1.0)

    def at(self, x, step: int = -1) -> np.ndarray:
        """PD per regime at arbitrary points x, from the coefficients of a time slice."""
        out = evaluate(self.basis, self.grid.nodes, self.coeffs[step], x)
        if self.lift is not None and self.lift.centers.size:
            out = out + self.lift(self.basis, x)
        return out

    def at_time(self, tau: float, x) -> np.ndarray:
        n = int(round(tau / self.config.dtau))
        if abs(n * self.config.dtau - tau) > 1e-9 * max(1.0, tau) or not 0 <= n < self.taus.size:
            raise ValueError(f"tau={tau} is not on the time grid")
        return self.at(x, n)

    def to_csv(self, path, every: int = 1) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "regime", "x", "pd"])
            for n in range(0, self.taus.size, every):
                for j in range(self.values.shape[1]):
                    for x, v in zip(self.grid.nodes, self.values[n, j]):
                        w.writerow([f"{self.taus[n]:.12g}", j, f"{x:.12g}", f"{v:.12g}"])


def solve(model: SwitchingModel, basis: BasisKind, grid: CollocationGrid, cfg: SolverConfig,
          quad: QuadratureConfig = QuadratureConfig(),
          blocks: Optional[OperatorBlocks] = None, check_residual: bool = False) -> SolutionSurface:
    if blocks is None:
        blocks = assemble_blocks(model, basis, grid, quad)
    H, N = model.H, grid.n
    u0 = initial_condition(grid, cfg.barrier_log, H)
    lift = blocks.lift if blocks.lift is not None and blocks.lift.centers.size else None
    g_nodes = lift.at_nodes if lift is not None else np.zeros(N)
    c = np.linalg.solve(blocks.phi, (u0 - g_nodes).T).T.ravel()
    coeffs = np.empty((cfg.n_steps + 1, H, N))
    coeffs[0] = c.reshape(H, N)
    residuals = []

    main = Stepper(blocks, cfg.dtau, cfg.theta)
    n0 = 0
    if cfg.theta > 0 and cfg.rannacher and cfg.n_steps >= cfg.rannacher // 2:
        half = Stepper(blocks, cfg.dtau / 2, 0.0)
        for m in range(cfg.rannacher):
            new = half(c)
            if check_residual:
                residuals.append(half.residual(new, c))
            c = new
            if m % 2:
                n0 += 1
                coeffs[n0] = c.reshape(H, N)
    for n in range(n0, cfg.n_steps):
        new = main(c)
        if check_residual:
            residuals.append(main.residual(new, c))
        c = new
        coeffs[n + 1] = c.reshape(H, N)
    values = coeffs @ blocks.phi.T + g_nodes
    values[0] = u0
    taus = cfg.dtau * np.arange(cfg.n_steps + 1)
    return SolutionSurface(taus, values, coeffs, grid, basis, cfg, residuals, lift)
