"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the NumPy versions
are used.  Setting ``EVOINCLUSION_PURE_PYTHON=1`` forces the fallback.
"""
import os

from evoinclusion import _pykernels
from evoinclusion._pykernels import InnerSolveError

_impl = _pykernels
if os.environ.get("EVOINCLUSION_PURE_PYTHON", "") in ("", "0"):
    try:
        from evoinclusion import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
flux_divergence = _impl.flux_divergence
newton_solve = _impl.newton_solve
residual = _impl.residual
tridiag_solve = _impl.tridiag_solve


def available_backends():
    """Map of backend name to kernel module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from evoinclusion import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out


__all__ = [
    "BACKEND",
    "InnerSolveError",
    "available_backends",
    "flux_divergence",
    "newton_solve",
    "residual",
    "tridiag_solve",
]
