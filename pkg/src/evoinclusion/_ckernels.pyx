# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the routines in ``_pykernels``.

Same algorithms, loop for loop; the Newton solve runs without the GIL.
"""
import numpy as np

from libc.math cimport fabs, pow, sqrt
from libc.stdlib cimport free, malloc

from evoinclusion._pykernels import InnerSolveError

BACKEND = "cython"


def _arr(x, dtype=float):
    return np.array(x, dtype=dtype, order="C", copy=True)


def _vec(x, n):
    return np.array(np.broadcast_to(np.asarray(x, dtype=float), (n,)), order="C")


cdef inline double _psi(double s, double p) nogil:
    cdef double a
    if p == 2.0:
        return s
    a = fabs(s)
    if a > 0.0:
        return pow(a, p - 2.0) * s
    return 0.0


cdef inline double _dpsi(double s, double p) nogil:
    cdef double a
    if p == 2.0:
        return 1.0
    a = fabs(s)
    if a > 0.0:
        return (p - 1.0) * pow(a, p - 2.0)
    return 0.0


cdef void _flux_div(const double* w, const double* a_edge, const double* beta,
                    Py_ssize_t n, double h, double p, double* out) nogil:
    cdef Py_ssize_t i
    cdef double left, right, fl, fr
    fl = a_edge[0] * _psi(w[0] / h, p)
    for i in range(n):
        right = w[i + 1] if i + 1 < n else 0.0
        fr = a_edge[i + 1] * _psi((right - w[i]) / h, p)
        out[i] = -(fr - fl) / h + beta[i] * w[i]
        fl = fr


cdef double _pnorm(const double* w, Py_ssize_t n, double h, double p) nogil:
    cdef Py_ssize_t e
    cdef double left, right, acc = 0.0
    for e in range(n + 1):
        left = w[e - 1] if e > 0 else 0.0
        right = w[e] if e < n else 0.0
        acc += pow(fabs((right - left) / h), p)
    return pow(h * acc, 1.0 / p)


cdef void _thomas(const double* lower, const double* diag, const double* upper,
                  const double* rhs, double* c, double* d, double* x,
                  Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    cdef double m
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / m
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]


cdef double _residual(const double* w, const double* v, const double* u,
                      const double* g, const double* a_edge,
                      const double* beta, const double* ones,
                      const double* zeros, Py_ssize_t n, double h, double p,
                      double eps, double r, double sigma, double kappa,
                      double* tmp, double* jp, double* G) nogil:
    """Fills G and jp; returns the gradient p-norm of w."""
    cdef Py_ssize_t i
    cdef double nrm, kr
    _flux_div(w, ones, zeros, n, h, p, jp)
    nrm = _pnorm(w, n, h, p)
    kr = pow(nrm, r - p) if nrm > 0.0 else 0.0
    _flux_div(w, a_edge, beta, n, h, p, G)
    for i in range(n):
        G[i] += (w[i] - v[i]) / sigma + eps * kr * jp[i] - g[i]
        tmp[i] = u[i] + kappa * w[i]
    for i in range(n):
        G[i] += (-((tmp[i + 1] if i + 1 < n else 0.0) - tmp[i])
                 + (tmp[i] - (tmp[i - 1] if i > 0 else 0.0))) / (h * h)
    return nrm


cdef inline double _hnorm(const double* x, Py_ssize_t n, double h) nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += x[i] * x[i]
    return sqrt(h * acc)


def flux_divergence(w, a_edge, beta, double h, double p):
    """-(a psi(Dw))' + beta w at the interior nodes (1D input only)."""
    cdef double[::1] wv = _arr(w, dtype=float)
    cdef Py_ssize_t n = wv.shape[0]
    cdef double[::1] av = _vec(a_edge, n + 1)
    cdef double[::1] bv = _vec(beta, n)
    out = np.empty(n)
    cdef double[::1] ov = out
    _flux_div(&wv[0], &av[0], &bv[0], n, h, p, &ov[0])
    return out


def tridiag_solve(lower, diag, upper, rhs):
    """Thomas elimination; ``lower[0]`` and ``upper[-1]`` are ignored."""
    cdef double[::1] lo = _arr(lower, dtype=float)
    cdef double[::1] di = _arr(diag, dtype=float)
    cdef double[::1] up = _arr(upper, dtype=float)
    cdef double[::1] rh = _arr(rhs, dtype=float)
    cdef Py_ssize_t n = di.shape[0]
    c = np.empty(n)
    d = np.empty(n)
    x = np.empty(n)
    cdef double[::1] cv = c, dv = d, xv = x
    _thomas(&lo[0], &di[0], &up[0], &rh[0], &cv[0], &dv[0], &xv[0], n)
    return x


def residual(w, v, u, g, a_edge, beta, double h, double p, double eps,
             double r, double sigma, double kappa):
    """Nodal residual of (w - v)/sigma + A(w) + eps K_r(w) + B(u + kappa w) - g."""
    cdef double[::1] wv = _arr(w, dtype=float)
    cdef Py_ssize_t n = wv.shape[0]
    cdef double[::1] vv = _arr(v, dtype=float)
    cdef double[::1] uv = _arr(u, dtype=float)
    cdef double[::1] gv = _arr(g, dtype=float)
    cdef double[::1] av = _vec(a_edge, n + 1)
    cdef double[::1] bv = _vec(beta, n)
    cdef double[::1] ones = np.ones(n + 1)
    cdef double[::1] zeros = np.zeros(n)
    cdef double[::1] tmp = np.empty(n)
    cdef double[::1] jp = np.empty(n)
    out = np.empty(n)
    cdef double[::1] G = out
    _residual(&wv[0], &vv[0], &uv[0], &gv[0], &av[0], &bv[0], &ones[0],
              &zeros[0], n, h, p, eps, r, sigma, kappa, &tmp[0], &jp[0], &G[0])
    return out


def newton_solve(v, u, g, a_edge, beta, double h, double p, double eps,
                 double r, double sigma, double kappa, double tol,
                 int max_iter, double damping):
    """Damped Newton for the monotone inner problem of one implicit step.

    Returns ``(w, residual_hnorm, iterations)``; raises ``InnerSolveError``.
    """
    cdef double[::1] vv = _arr(v, dtype=float)
    cdef Py_ssize_t n = vv.shape[0]
    cdef double[::1] uv = _arr(u, dtype=float)
    cdef double[::1] gv = _arr(g, dtype=float)
    cdef double[::1] av = _vec(a_edge, n + 1)
    cdef double[::1] bv = _vec(beta, n)
    cdef double[::1] ones = np.ones(n + 1)
    cdef double[::1] zeros = np.zeros(n)
    out = np.array(vv, copy=True)
    cdef double[::1] w = out
    cdef int it = 0, status = 0, halvings
    cdef double res = 0.0

    cdef double* buf = <double*> malloc(16 * (n + 1) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* G = buf
    cdef double* jp = buf + (n + 1)
    cdef double* Gt = buf + 2 * (n + 1)
    cdef double* jpt = buf + 3 * (n + 1)
    cdef double* wt = buf + 4 * (n + 1)
    cdef double* tmp = buf + 5 * (n + 1)
    cdef double* e = buf + 6 * (n + 1)
    cdef double* lower = buf + 7 * (n + 1)
    cdef double* diag = buf + 8 * (n + 1)
    cdef double* upper = buf + 9 * (n + 1)
    cdef double* rhs = buf + 10 * (n + 1)
    cdef double* x = buf + 11 * (n + 1)
    cdef double* z = buf + 12 * (n + 1)
    cdef double* cc = buf + 13 * (n + 1)
    cdef double* dd = buf + 14 * (n + 1)

    cdef Py_ssize_t i, k
    cdef double nrm, nrmt, rest, target, lam, ih2, sc, left, right, dp
    cdef double coef, jx, jz, fac
    try:
        with nogil:
            ih2 = 1.0 / (h * h)
            nrm = _residual(&w[0], &vv[0], &uv[0], &gv[0], &av[0], &bv[0],
                            &ones[0], &zeros[0], n, h, p, eps, r, sigma, kappa,
                            tmp, jp, G)
            res = _hnorm(G, n, h)
            target = tol * (res if res > 1.0 else 1.0)
            lam = damping
            while res > target:
                if it >= max_iter:
                    status = 1
                    break
                it += 1
                sc = eps * pow(nrm, r - p) if nrm > 0.0 else 0.0
                for k in range(n + 1):
                    left = w[k - 1] if k > 0 else 0.0
                    right = w[k] if k < n else 0.0
                    dp = _dpsi((right - left) / h, p)
                    e[k] = (av[k] * dp + sc * dp + kappa) * ih2
                for i in range(n):
                    diag[i] = 1.0 / sigma + e[i] + e[i + 1] + bv[i]
                    lower[i] = -e[i] if i > 0 else 0.0
                    upper[i] = -e[i + 1] if i + 1 < n else 0.0
                    rhs[i] = -G[i]
                _thomas(lower, diag, upper, rhs, cc, dd, x, n)
                if eps > 0.0 and r > p and nrm > 0.0:
                    coef = eps * (r - p) * h * pow(nrm, r - 2.0 * p)
                    _thomas(lower, diag, upper, jp, cc, dd, z, n)
                    jx = 0.0
                    jz = 0.0
                    for i in range(n):
                        jx += jp[i] * x[i]
                        jz += jp[i] * z[i]
                    fac = coef * jx / (1.0 + coef * jz)
                    for i in range(n):
                        x[i] -= z[i] * fac
                halvings = 0
                while True:
                    for i in range(n):
                        wt[i] = w[i] + lam * x[i]
                    nrmt = _residual(wt, &vv[0], &uv[0], &gv[0], &av[0],
                                     &bv[0], &ones[0], &zeros[0], n, h, p, eps,
                                     r, sigma, kappa, tmp, jpt, Gt)
                    rest = _hnorm(Gt, n, h)
                    if rest <= res or rest <= target:
                        break
                    halvings += 1
                    if halvings > 40:
                        status = 2
                        break
                    lam *= 0.5
                if status != 0:
                    break
                for i in range(n):
                    w[i] = wt[i]
                    G[i] = Gt[i]
                    jp[i] = jpt[i]
                nrm = nrmt
                res = rest
                lam = damping
    finally:
        free(buf)
    if status == 1:
        raise InnerSolveError(res, it)
    if status == 2:
        raise InnerSolveError(res, it, "line_search")
    return out, res, it
