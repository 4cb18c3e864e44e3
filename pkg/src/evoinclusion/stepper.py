"""Rothe (implicit) time stepping of the regularized inclusion

    u'' + A(t, u') + eps K_r(u') + B u  in  F(t, u, u').

Each step freezes a selection g of the forcing at (t+, u_n, v_n), including
the gamma v term, and solves the strictly monotone problem for the new
velocity w:

    (w - v_n)/tau + A(t+, w) + eps K_r(w) + B(u_n + tau w) = g,

then sets u_{n+1} = u_n + tau w.  The midpoint scheme solves the same problem
for m = (v_n + v_{n+1})/2 with tau/2 in the first term and B applied to
u_n + (tau/2) m, the average of the old and new positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from evoinclusion import kernels
from evoinclusion.forcing import ForcingEnvelope, SelectionStrategy, select_parts
from evoinclusion.grid import PRIMAL, GridFunction, SpatialGrid
from evoinclusion.kernels import InnerSolveError
from evoinclusion.operators import RegularizerSpec, ViscositySpec

SCHEMES = ("backward_euler", "midpoint")


class StepFailure(RuntimeError):
    """An implicit step could not be solved to tolerance."""

    def __init__(self, step_index: int, t: float, cause: InnerSolveError):
        super().__init__(f"step {step_index} (t={t:.6g}): {cause}")
        self.step_index = step_index
        self.t = t
        self.residual = cause.residual
        self.cause = cause


@dataclass(frozen=True)
class SolverConfig:
    tau: float
    horizon_b: float
    rspec: RegularizerSpec
    scheme: str = "backward_euler"
    newton_tol: float = 1e-11
    newton_max_iter: int = 50
    damping: float = 1.0
    strategy: SelectionStrategy = field(default_factory=SelectionStrategy)

    def __post_init__(self):
        if isinstance(self.strategy, str):
            object.__setattr__(self, "strategy", SelectionStrategy(self.strategy))
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.horizon_b > 0:
            raise ValueError(f"horizon b must be positive, got {self.horizon_b}")
        if self.tau > self.horizon_b:
            raise ValueError("tau must not exceed the horizon b")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; valid: {', '.join(SCHEMES)}")
        if not self.newton_tol > 0:
            raise ValueError(f"newton_tol must be positive, got {self.newton_tol}")
        if int(self.newton_max_iter) != self.newton_max_iter or self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be a positive integer")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")

    @property
    def epsilon(self) -> float:
        return self.rspec.epsilon

    @property
    def r(self) -> float:
        return self.rspec.r

    def times(self) -> np.ndarray:
        """t_0 = 0 < t_1 < ... < t_N = b; the last step may be shorter."""
        nsteps = max(1, math.ceil(self.horizon_b / self.tau - 1e-9))
        t = self.tau * np.arange(nsteps + 1)
        t[-1] = self.horizon_b
        return t


@dataclass(frozen=True)
class State:
    t: float
    u: GridFunction
    v: GridFunction
    f_sel: Optional[GridFunction] = None


@dataclass
class TrajectoryRecord:
    """All states of one run, stored as stacked arrays.

    ``g[k]`` is the selection used to reach state k; ``g[0]`` is the midpoint
    selection at the initial data and seeds ``closest_to_previous``.  ``s[k]``
    is the envelope part of ``g[k]``.
    """

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    g: np.ndarray
    s: np.ndarray
    newton_iters: np.ndarray
    residuals: np.ndarray
    config: SolverConfig
    grid: SpatialGrid

    def __len__(self):
        return self.t.shape[0]

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.t)

    def state(self, k: int) -> State:
        gr = self.grid
        return State(
            float(self.t[k]),
            GridFunction(self.u[k], gr),
            GridFunction(self.v[k], gr),
            GridFunction(self.g[k], gr),
        )

    @property
    def states(self) -> List[State]:
        return [self.state(k) for k in range(len(self))]


def _solve_inner(t_new, dt, u, v, g, cfg, vspec, grid):
    if cfg.scheme == "backward_euler":
        sigma = kappa = dt
        t_eval = t_new
    else:
        # B acts on (u_n + u_{n+1})/2 = u_n + (dt/2) m
        sigma = kappa = 0.5 * dt
        t_eval = t_new - 0.5 * dt
    a = vspec.a_edges(t_eval, grid)
    beta = vspec.beta_nodes(grid)
    w, res, it = kernels.newton_solve(
        v, u, g, a, beta, grid.h, vspec.p, cfg.epsilon, cfg.r, sigma, kappa,
        cfg.newton_tol, int(cfg.newton_max_iter), cfg.damping,
    )
    if cfg.scheme == "backward_euler":
        return u + dt * w, w, res, it
    return u + dt * w, 2.0 * w - v, res, it


def _advance(t, dt, u, v, prev, cfg, vspec, env, grid):
    t_new = t + dt
    s, g = select_parts(t_new, u, v, prev, env, cfg.strategy, grid.nodes)
    u_new, v_new, res, it = _solve_inner(t_new, dt, u, v, g, cfg, vspec, grid)
    return u_new, v_new, s, g, res, it


def step(s: State, cfg: SolverConfig, vspec: ViscositySpec, env: ForcingEnvelope,
         dt: Optional[float] = None) -> State:
    """One implicit step of size ``dt`` (default ``cfg.tau``).

    Raises ``InnerSolveError`` carrying the last residual if Newton does not
    converge; the caller may retry with a smaller step.
    """
    grid = s.u.grid
    if s.v.grid != grid:
        raise ValueError("u and v must live on the same grid")
    dt = cfg.tau if dt is None else dt
    prev = None if s.f_sel is None else s.f_sel.values
    u_new, v_new, _, g, _, _ = _advance(
        s.t, dt, s.u.values, s.v.values, prev, cfg, vspec, env, grid
    )
    return State(s.t + dt, GridFunction(u_new, grid), GridFunction(v_new, grid),
                 GridFunction(g, grid))


def inner_residual(w: GridFunction, s: State, cfg: SolverConfig, vspec: ViscositySpec,
                   env: ForcingEnvelope, g: GridFunction, dt: Optional[float] = None) -> float:
    """H-norm of the backward-Euler inner residual at candidate velocity w."""
    grid = s.u.grid
    dt = cfg.tau if dt is None else dt
    t_new = s.t + dt
    G = kernels.residual(
        w.values, s.v.values, s.u.values, g.values, vspec.a_edges(t_new, grid),
        vspec.beta_nodes(grid), grid.h, vspec.p, cfg.epsilon, cfg.r, dt, dt,
    )
    return math.sqrt(grid.h * float(np.dot(G, G)))


def solve_trajectory(u0: GridFunction, u1: GridFunction, cfg: SolverConfig,
                     vspec: ViscositySpec, env: ForcingEnvelope) -> TrajectoryRecord:
    """March from (0, u0, u1) to the horizon; raises ``StepFailure`` with the
    index of the failing step."""
    grid = u0.grid
    if u1.grid != grid:
        raise ValueError("u0 and u1 must live on the same grid")
    if u0.space != PRIMAL or u1.space != PRIMAL:
        raise ValueError("initial data must be primal vectors")
    if not (np.all(np.isfinite(u0.values)) and np.all(np.isfinite(u1.values))):
        raise ValueError("initial data must be finite")
    cfg.rspec.check_against(vspec.p)

    t = cfg.times()
    N = t.size - 1
    n = grid.n
    U = np.empty((N + 1, n))
    V = np.empty((N + 1, n))
    Gs = np.empty((N + 1, n))
    Ss = np.empty((N + 1, n))
    iters = np.zeros(N, dtype=np.int64)
    res = np.zeros(N)
    U[0] = u0.values
    V[0] = u1.values
    Ss[0], Gs[0] = select_parts(0.0, U[0], V[0], None, env, cfg.strategy, grid.nodes)
    prev = Gs[0]
    for k in range(N):
        dt = t[k + 1] - t[k]
        try:
            U[k + 1], V[k + 1], Ss[k + 1], Gs[k + 1], res[k], iters[k] = _advance(
                t[k], dt, U[k], V[k], prev, cfg, vspec, env, grid
            )
        except InnerSolveError as exc:
            raise StepFailure(k + 1, float(t[k + 1]), exc) from exc
        prev = Gs[k + 1]
    return TrajectoryRecord(t, U, V, Gs, Ss, iters, res, cfg, grid)


def trajectory_distance(a: TrajectoryRecord, b: TrajectoryRecord) -> float:
    """Discrete C(T, H) distance: max over steps of h_norm(u_a - u_b)."""
    if a.u.shape != b.u.shape or a.grid != b.grid:
        raise ValueError("trajectories are not on the same space-time grid")
    d = a.u - b.u
    return float(np.max(np.sqrt(a.grid.h * np.sum(d * d, axis=1))))
