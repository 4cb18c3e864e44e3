"""Uniform 1D Dirichlet grid carrying the triple W^{1,p}_0 / L^2 / W^{-1,p'}.

Primal vectors are interior nodal values (boundary values are implicitly 0).
Dual vectors use the same nodal basis with the pairing <g, y> = h * sum(g*y),
so the pairing of two primal vectors is the discrete L^2 inner product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from evoinclusion import _pykernels

PRIMAL = "primal"
DUAL = "dual"


class GridMismatchError(ValueError):
    """Two grid functions live on different discretizations."""


@dataclass(frozen=True)
class SpatialGrid:
    L: float
    n: int
    p: float = 2.0

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"domain length must be positive, got {self.L}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"need at least one interior node, got n={self.n}")
        if not self.p >= 2:
            raise ValueError(f"Sobolev exponent must satisfy p >= 2, got {self.p}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "p", float(self.p))

    @property
    def h(self) -> float:
        return self.L / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        """Interior node positions z_1..z_n."""
        return self.h * np.arange(1, self.n + 1)

    @property
    def edge_midpoints(self) -> np.ndarray:
        """Midpoints of the n+1 cells, where viscosity coefficients live."""
        return self.h * (np.arange(self.n + 1) + 0.5)

    def with_p(self, p: float) -> "SpatialGrid":
        return SpatialGrid(self.L, self.n, p)

    def function(self, values, space: str = PRIMAL) -> "GridFunction":
        return GridFunction(values, self, space)

    def zeros(self, space: str = PRIMAL) -> "GridFunction":
        return GridFunction(np.zeros(self.n), self, space)


class GridFunction:
    """Immutable nodal vector tagged as primal (X or H) or dual (X*)."""

    __slots__ = ("values", "grid", "space")

    def __init__(self, values, grid: SpatialGrid, space: str = PRIMAL):
        if space not in (PRIMAL, DUAL):
            raise ValueError(f"space must be 'primal' or 'dual', got {space!r}")
        arr = np.array(values, dtype=float, copy=True).reshape(-1)
        if arr.shape[0] != grid.n:
            raise ValueError(
                f"expected {grid.n} nodal values, got {arr.shape[0]}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "space", space)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    def __repr__(self):
        return f"GridFunction({self.space}, n={self.grid.n}, values={self.values!r})"

    def _check(self, other: "GridFunction"):
        if other.grid != self.grid:
            raise GridMismatchError(
                f"incompatible discretizations: {self.grid} vs {other.grid}"
            )
        if other.space != self.space:
            raise ValueError("cannot combine primal and dual vectors")

    def __add__(self, other):
        self._check(other)
        return GridFunction(self.values + other.values, self.grid, self.space)

    def __sub__(self, other):
        self._check(other)
        return GridFunction(self.values - other.values, self.grid, self.space)

    def __mul__(self, alpha):
        return GridFunction(float(alpha) * self.values, self.grid, self.space)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(-self.values, self.grid, self.space)

    def as_dual(self) -> "GridFunction":
        """Same vector read as an element of X* (the H = H* identification)."""
        return GridFunction(self.values, self.grid, DUAL)

    def as_primal(self) -> "GridFunction":
        return GridFunction(self.values, self.grid, PRIMAL)


def h_norm(y: GridFunction) -> float:
    """Discrete L^2 norm (h * sum y_i^2)^(1/2)."""
    return math.sqrt(y.grid.h * float(np.dot(y.values, y.values)))


def x_norm(y: GridFunction) -> float:
    """Gradient p-norm (h * sum_edges |Dy|^p)^(1/p) with Dirichlet ghosts."""
    if y.space != PRIMAL:
        raise ValueError("x_norm is defined for primal vectors only")
    return float(_pykernels.gradient_pnorm(y.values, y.grid.h, y.grid.p))


def dual_pair(g: GridFunction, y: GridFunction) -> float:
    """<g, y> = h * sum g_i y_i.

    Either argument may carry the dual tag; two primal arguments give the H
    inner product.  Two dual arguments have no meaning and are rejected.
    """
    if g.grid != y.grid:
        raise GridMismatchError(
            f"incompatible discretizations: {g.grid} vs {y.grid}"
        )
    if g.space == DUAL and y.space == DUAL:
        raise ValueError("cannot pair two dual vectors")
    return g.grid.h * float(np.dot(g.values, y.values))


def dirichlet_laplacian_eigenvalues(grid: SpatialGrid) -> np.ndarray:
    """Eigenvalues 4/h^2 sin^2(k pi h / 2L), k = 1..n, of the 3-point stencil."""
    k = np.arange(1, grid.n + 1)
    return 4.0 / grid.h**2 * np.sin(k * np.pi * grid.h / (2.0 * grid.L)) ** 2


def embedding_constant(grid: SpatialGrid) -> float:
    """Constant c with h_norm(y) <= c * x_norm(y) on this grid.

    Discrete Poincare, |y| <= lambda_1^{-1/2} |Dy|_2, combined with the
    Hoelder step |Dy|_2 <= L^{1/2 - 1/p} |Dy|_p on a domain of length L.
    """
    lam1 = dirichlet_laplacian_eigenvalues(grid)[0]
    return grid.L ** (0.5 - 1.0 / grid.p) / math.sqrt(lam1)


def inverse_estimate_constant(grid: SpatialGrid) -> float:
    """Constant c with x_norm(y) <= c * |Dy|_2; equals 1 at p = 2.

    Uses max|Dy| <= h^{-1/2} |Dy|_2, so the constant grows as h -> 0 for p > 2.
    """
    return grid.h ** (-(0.5 - 1.0 / grid.p))


def _stiffness_solve(grid: SpatialGrid, rhs: np.ndarray) -> np.ndarray:
    from evoinclusion import kernels

    e = np.full(grid.n, -1.0 / grid.h**2)
    d = np.full(grid.n, 2.0 / grid.h**2)
    return kernels.tridiag_solve(e, d, e, rhs)


def sample_directions(grid: SpatialGrid, samples: int, seed: int) -> np.ndarray:
    """Seeded random directions normalized to unit x_norm, one per row.

    Rows are generated sequentially, so the first k rows for a given seed do
    not depend on how many rows were requested.
    """
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((samples, grid.n))
    norms = _pykernels.gradient_pnorm(y, grid.h, grid.p)
    return y / norms[:, None]


def dual_norm_upper(g: GridFunction, samples: int = 32, seed: int = 0) -> float:
    """Sampled estimate of sup_{y != 0} <g, y> / x_norm(y).

    The candidates are ``samples`` seeded random unit directions plus the
    direction B^{-1} g, which is the exact maximizer when p = 2.  Every
    candidate gives a valid lower bound on the dual norm, and so does the
    maximum.
    """
    if samples < 1:
        raise ValueError("dual_norm_upper needs at least one sample")
    grid = g.grid
    if not np.any(g.values):
        return 0.0
    dirs = sample_directions(grid, samples, seed)
    best = float(np.max(np.abs(dirs @ g.values))) * grid.h
    riesz = _stiffness_solve(grid, g.values)
    rn = float(_pykernels.gradient_pnorm(riesz, grid.h, grid.p))
    if rn > 0.0:
        best = max(best, abs(grid.h * float(np.dot(g.values, riesz))) / rn)
    return best
