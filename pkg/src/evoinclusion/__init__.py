"""Implicit time stepping and a priori diagnostics for regularized
second-order evolution inclusions with a p-Laplacian viscosity term."""

__version__ = "0.1.0"

from evoinclusion.grid import GridFunction, SpatialGrid, dual_pair, h_norm, x_norm  # noqa: E402
from evoinclusion.kernels import BACKEND  # noqa: E402
from evoinclusion.operators import RegularizerSpec, ViscositySpec  # noqa: E402
from evoinclusion.scenarios import PRESETS, preset  # noqa: E402
from evoinclusion.stepper import SolverConfig, solve_trajectory  # noqa: E402

__all__ = [
    "BACKEND", "GridFunction", "PRESETS", "RegularizerSpec", "SolverConfig",
    "SpatialGrid", "ViscositySpec", "__version__", "dual_pair", "h_norm",
    "preset", "solve_trajectory", "x_norm",
]
