"""Discrete operators: stiffness B, viscosity A(t, .), p-Laplacian J_p,
duality map, the regularizer K_r and the combined A_eps = A + eps K_r.

All of them map primal vectors to dual vectors in the nodal basis.  The
viscosity coefficient a(t, z) is sampled at cell midpoints and beta(z) at the
nodes, which keeps summation by parts exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from evoinclusion import _pykernels, kernels
from evoinclusion.grid import (
    DUAL,
    PRIMAL,
    GridFunction,
    SpatialGrid,
    sample_directions,
)


def _const(value: float) -> Callable:
    def f(*args):
        z = args[-1]
        return np.full(np.shape(z), float(value))

    f.constant = float(value)
    return f


@dataclass(frozen=True)
class ViscositySpec:
    """Coefficients of -div(a(t,z)|Dv|^{p-2}Dv) + beta(z) v.

    ``coeff_a(t, z)`` and ``beta(z)`` must accept arrays of positions.
    """

    coeff_a: Callable
    beta: Callable
    p: float = 2.0

    def __post_init__(self):
        if not self.p >= 2:
            raise ValueError(f"viscosity exponent must satisfy p >= 2, got {self.p}")

    @classmethod
    def constant(cls, a: float = 0.0, beta: float = 0.0, p: float = 2.0):
        return cls(_const(a), _const(beta), p)

    def a_edges(self, t: float, grid: SpatialGrid) -> np.ndarray:
        return np.asarray(self.coeff_a(t, grid.edge_midpoints), dtype=float)

    def beta_nodes(self, grid: SpatialGrid) -> np.ndarray:
        return np.asarray(self.beta(grid.nodes), dtype=float)

    def check(self, grid: SpatialGrid, times=(0.0,)) -> None:
        """Raise if a or beta is negative at any sampled point."""
        for t in times:
            if np.any(self.a_edges(t, grid) < 0):
                raise ValueError(f"viscosity coefficient a is negative at t={t}")
        if np.any(self.beta_nodes(grid) < 0):
            raise ValueError("damping coefficient beta is negative")


@dataclass(frozen=True)
class RegularizerSpec:
    epsilon: float
    r: float

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    def check_against(self, p: float) -> None:
        if self.r < p:
            raise ValueError(f"regularizer exponent r={self.r} must be >= p={p}")


def _primal(y: GridFunction):
    if y.space != PRIMAL:
        raise ValueError("operator expects a primal vector")


def apply_B(u: GridFunction) -> GridFunction:
    """3-point Dirichlet stencil -(u_{i+1} - 2u_i + u_{i-1}) / h^2."""
    _primal(u)
    g = u.grid
    return GridFunction(kernels.flux_divergence(u.values, 1.0, 0.0, g.h, 2.0), g, DUAL)


def stiffness_matrix(grid: SpatialGrid) -> np.ndarray:
    """Dense matrix of ``apply_B``; for small-n oracles and tests."""
    n = grid.n
    return (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / grid.h**2


def coercivity_constant(grid: SpatialGrid, samples: int = 64, seed: int = 0) -> float:
    """Smallest observed ratio <Bu, u> / x_norm(u)^2.

    Sampled over seeded random vectors and the coordinate directions.  The
    ratio is invariant under u -> alpha u for every p, so only directions
    matter.  Exact (1.0) at p = 2.
    """
    if grid.p == 2.0:
        return 1.0
    dirs = np.vstack([sample_directions(grid, samples, seed), np.eye(grid.n)])
    d = _pykernels.gradient(dirs, grid.h)
    quad = grid.h * np.sum(d * d, axis=-1)
    xn = _pykernels.gradient_pnorm(dirs, grid.h, grid.p)
    return float(np.min(quad / xn**2))


def apply_A(t: float, v: GridFunction, spec: ViscositySpec) -> GridFunction:
    """Edge-flux form of -div(a |Dv|^{p-2} Dv) + beta v."""
    _primal(v)
    g = v.grid
    out = kernels.flux_divergence(
        v.values, spec.a_edges(t, g), spec.beta_nodes(g), g.h, spec.p
    )
    return GridFunction(out, g, DUAL)


def apply_Jp(y: GridFunction, p: float) -> GridFunction:
    """Discrete p-Laplacian -(psi(Dy))' with psi(s) = |s|^{p-2} s."""
    _primal(y)
    g = y.grid
    return GridFunction(kernels.flux_divergence(y.values, 1.0, 0.0, g.h, p), g, DUAL)


def _pnorm(y: GridFunction, p: float) -> float:
    return float(_pykernels.gradient_pnorm(y.values, y.grid.h, p))


def duality_map(y: GridFunction, p: float) -> GridFunction:
    """x_norm(y)^{2-p} J_p(y); zero at y = 0.

    Satisfies <F(y), y> = x_norm(y)^2 = ||F(y)||_*^2 for the gradient p-norm.
    """
    nrm = _pnorm(y, p)
    if nrm == 0.0:
        return y.grid.zeros(DUAL)
    return nrm ** (2.0 - p) * apply_Jp(y, p)


def apply_Kr(y: GridFunction, spec: RegularizerSpec, p: float) -> GridFunction:
    """K_r(y) = x_norm(y)^{r-2} F(y) = x_norm(y)^{r-p} J_p(y)."""
    spec.check_against(p)
    nrm = _pnorm(y, p)
    if nrm == 0.0:
        return y.grid.zeros(DUAL)
    return nrm ** (spec.r - p) * apply_Jp(y, p)


def apply_A_eps(t: float, v: GridFunction, vspec: ViscositySpec,
                rspec: RegularizerSpec) -> GridFunction:
    return apply_A(t, v, vspec) + rspec.epsilon * apply_Kr(v, rspec, vspec.p)


# Batch forms over stacked trajectories, shape (steps, n).

def viscous_power(t, V: np.ndarray, vspec: ViscositySpec, grid: SpatialGrid) -> np.ndarray:
    """<A(t_k, v_k), v_k> for each row, with a evaluated at the row's time."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    a = np.stack([vspec.a_edges(tk, grid) for tk in t])
    d = _pykernels.gradient(V, grid.h)
    beta = vspec.beta_nodes(grid)
    return grid.h * (
        np.sum(a * np.abs(d) ** vspec.p, axis=-1) + np.sum(beta * V * V, axis=-1)
    )


def elastic_form(U: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """<Bu, u> = |Du|_2^2 per row."""
    d = _pykernels.gradient(U, grid.h)
    return grid.h * np.sum(d * d, axis=-1)


def batch_x_norm(Y: np.ndarray, grid: SpatialGrid, p: float | None = None) -> np.ndarray:
    return _pykernels.gradient_pnorm(Y, grid.h, grid.p if p is None else p)


def batch_h_norm(Y: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    return np.sqrt(grid.h * np.sum(Y * Y, axis=-1))
