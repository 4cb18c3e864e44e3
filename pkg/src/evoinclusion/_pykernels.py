"""NumPy implementations of the hot kernels.

These are the reference versions of the routines in ``_ckernels.pyx``; the
compiled module mirrors them loop for loop.  ``flux_divergence`` also accepts
stacked arrays of shape ``(..., n)`` and is used directly for batch evaluation.
"""
import math

import numpy as np

BACKEND = "python"


class InnerSolveError(RuntimeError):
    """Newton iteration for the implicit step did not reach tolerance."""

    def __init__(self, residual, iterations, reason="max_iter"):
        super().__init__(
            f"inner solve failed ({reason}) after {iterations} iterations, "
            f"residual {residual:.3e}"
        )
        self.residual = residual
        self.iterations = iterations
        self.reason = reason


def psi(s, p):
    """|s|^(p-2) s with psi(0) = 0 for every p >= 2."""
    s = np.asarray(s, dtype=float)
    if p == 2.0:
        return s.copy()
    a = np.abs(s)
    out = np.zeros_like(s)
    nz = a > 0.0
    out[nz] = a[nz] ** (p - 2.0) * s[nz]
    return out


def dpsi(s, p):
    """(p-1)|s|^(p-2), guarded the same way as ``psi``."""
    s = np.asarray(s, dtype=float)
    if p == 2.0:
        return np.ones_like(s)
    a = np.abs(s)
    out = np.zeros_like(s)
    nz = a > 0.0
    out[nz] = (p - 1.0) * a[nz] ** (p - 2.0)
    return out


def gradient(w, h):
    """Edge differences (n+1 of them) with homogeneous Dirichlet ghosts."""
    w = np.asarray(w, dtype=float)
    pad = [(0, 0)] * (w.ndim - 1) + [(1, 1)]
    return np.diff(np.pad(w, pad), axis=-1) / h


def flux_divergence(w, a_edge, beta, h, p):
    """-(a psi(Dw))' + beta w at the interior nodes."""
    flux = np.asarray(a_edge) * psi(gradient(w, h), p)
    return -np.diff(flux, axis=-1) / h + np.asarray(beta) * w


def gradient_pnorm(w, h, p):
    d = np.abs(gradient(w, h))
    return (h * np.sum(d**p, axis=-1)) ** (1.0 / p)


def tridiag_solve(lower, diag, upper, rhs):
    """Thomas elimination; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = diag.shape[0]
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / m
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m
    x = np.empty(n)
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _residual(w, v, u, g, a_edge, beta, h, p, eps, r, sigma, kappa):
    jp = flux_divergence(w, 1.0, 0.0, h, p)
    nrm = gradient_pnorm(w, h, p)
    kr = nrm ** (r - p) * jp if nrm > 0.0 else np.zeros_like(w)
    visc = flux_divergence(w, a_edge, beta, h, p)
    ela = flux_divergence(u + kappa * w, 1.0, 0.0, h, 2.0)
    return (w - v) / sigma + visc + eps * kr + ela - g, jp, nrm


def residual(w, v, u, g, a_edge, beta, h, p, eps, r, sigma, kappa):
    """Nodal residual of (w - v)/sigma + A(w) + eps K_r(w) + B(u + kappa w) - g."""
    return _residual(w, v, u, g, a_edge, beta, h, p, eps, r, sigma, kappa)[0]


def newton_solve(v, u, g, a_edge, beta, h, p, eps, r, sigma, kappa,
                 tol, max_iter, damping):
    """Damped Newton for the monotone inner problem of one implicit step.

    The Jacobian is tridiagonal plus the symmetric rank-one term coming from
    the norm factor of K_r, which is handled by Sherman-Morrison.  Returns
    ``(w, residual_hnorm, iterations)``.
    """
    v = np.asarray(v, dtype=float)
    sqh = math.sqrt(h)
    w = v.copy()
    G, jp, nrm = _residual(w, v, u, g, a_edge, beta, h, p, eps, r, sigma, kappa)
    res = sqh * float(np.linalg.norm(G))
    target = tol * max(1.0, res)
    lam = damping
    it = 0
    ih2 = 1.0 / (h * h)
    while res > target:
        if it >= max_iter:
            raise InnerSolveError(res, it)
        it += 1
        dw = gradient(w, h)
        dp = dpsi(dw, p)
        visc_e = a_edge * dp
        sc = eps * nrm ** (r - p) if nrm > 0.0 else 0.0
        kr_e = sc * dp
        e = (visc_e + kr_e + kappa) * ih2
        diag = 1.0 / sigma + e[:-1] + e[1:] + beta
        off = -e[1:-1]
        lower = np.concatenate(([0.0], off))
        upper = np.concatenate((off, [0.0]))
        x = tridiag_solve(lower, diag, upper, -G)
        if eps > 0.0 and r > p and nrm > 0.0:
            c = eps * (r - p) * h * nrm ** (r - 2.0 * p)
            z = tridiag_solve(lower, diag, upper, jp)
            x = x - z * (c * np.dot(jp, x) / (1.0 + c * np.dot(jp, z)))
        halvings = 0
        while True:
            wt = w + lam * x
            Gt, jpt, nrmt = _residual(wt, v, u, g, a_edge, beta, h, p, eps, r,
                                      sigma, kappa)
            rest = sqh * float(np.linalg.norm(Gt))
            if rest <= res or rest <= target:
                break
            halvings += 1
            if halvings > 40:
                raise InnerSolveError(res, it, "line_search")
            lam *= 0.5
        w, G, jp, nrm, res = wt, Gt, jpt, nrmt, rest
        lam = damping
    return w, res, it
