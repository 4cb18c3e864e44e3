"""Interval-valued forcing [f_l, f_u] + gamma v and its nodal selections.

A discontinuous f(x) is replaced by the interval between its one-sided limits
at each jump.  A selection picks one value per node from that interval; the
product of nodal intervals is closed, convex and decomposable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from evoinclusion.grid import PRIMAL, GridFunction, SpatialGrid

STRATEGIES = ("lower", "upper", "midpoint", "closest_to_previous")
NAMED_FORCINGS = ("identity", "sine_gordon", "relay", "zero")


@dataclass(frozen=True)
class ForcingEnvelope:
    """Lower/upper branches f_l(t, z, x) <= f_u(t, z, x), the linear
    coefficient gamma, and the growth coefficient a_2(t, z) with
    |f_l|, |f_u| <= a_2 (1 + |x|)."""

    f_lower: Callable
    f_upper: Callable
    gamma: float = 0.0
    growth_a2: Callable = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if self.growth_a2 is None:
            raise ValueError("a growth coefficient a_2(t, z) is required")

    def interval(self, t: float, z: np.ndarray, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        lo = np.broadcast_to(np.asarray(self.f_lower(t, z, x), dtype=float), x.shape)
        hi = np.broadcast_to(np.asarray(self.f_upper(t, z, x), dtype=float), x.shape)
        return lo, hi

    def check(self, grid: SpatialGrid, times=(0.0,), xs=None) -> None:
        """Sampled ordering and growth checks; raises ValueError on violation."""
        if xs is None:
            xs = np.concatenate([np.linspace(-10, 10, 401), [0.0]])
        z = grid.nodes
        X = np.broadcast_to(xs[:, None], (xs.size, z.size))
        for t in times:
            lo, hi = self.interval(t, z, X)
            if np.any(lo > hi):
                raise ValueError(f"envelope not ordered (f_l > f_u) at t={t}")
            a2 = np.asarray(self.growth_a2(t, z), dtype=float)
            if np.any(a2 < 0):
                raise ValueError("growth coefficient a_2 is negative")
            bound = a2 * (1.0 + np.abs(X))
            tol = 1e-12 * (1.0 + bound)
            if np.any(np.abs(lo) > bound + tol) or np.any(np.abs(hi) > bound + tol):
                raise ValueError(f"envelope violates |f| <= a_2(1+|x|) at t={t}")


@dataclass(frozen=True)
class SelectionStrategy:
    kind: str = "midpoint"

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(
                f"unknown selection strategy {self.kind!r}; valid: {', '.join(STRATEGIES)}"
            )


def _const_a2(value):
    def a2(t, z):
        return np.full(np.shape(z), float(value))

    return a2


def _vectorized(f):
    def g(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).copy()

    return g


def envelope_from_piecewise(
    branches: Sequence,
    jumps: Sequence[float] = (),
    gamma: float = 0.0,
    growth_a2=1.0,
) -> ForcingEnvelope:
    """Fill-in envelope of a piecewise-continuous f(x).

    ``branches`` is a list of ``((lo, hi), f)`` with f continuous on the closed
    interval [lo, hi]; together they must cover the real line.  At each point
    of ``jumps`` the envelope is [min, max] of the one-sided limits; elsewhere
    f_l = f_u = f.  A shared endpoint that is not listed as a jump must see
    matching values from both sides.
    """
    items = sorted(
        ((float(lo), float(hi)), _vectorized(f)) for (lo, hi), f in branches
    ) if branches else []
    if not items:
        raise ValueError("at least one branch is required")
    for (lo, hi), _ in items:
        if not lo < hi:
            raise ValueError(f"empty branch interval ({lo}, {hi})")
    if items[0][0][0] != -math.inf or items[-1][0][1] != math.inf:
        raise ValueError("branches must cover the whole real line")
    jumps = sorted(float(j) for j in jumps)
    for (a, fa), (b, fb) in zip(items, items[1:]):
        if b[0] > a[1]:
            raise ValueError(f"branches leave a gap ({a[1]}, {b[0]})")
        if b[0] < a[1]:
            lo, hi = b[0], min(a[1], b[1])
            pts = np.linspace(lo, hi, 7) if math.isfinite(hi - lo) else np.array([lo, lo + 1.0])
            pts = pts[np.isfinite(pts)]
            if not np.allclose(fa(pts), fb(pts), rtol=1e-12, atol=1e-12):
                raise ValueError(f"overlapping branches disagree on ({lo}, {hi})")
        elif a[1] not in jumps:
            x = np.array([a[1]])
            if not np.allclose(fa(x), fb(x), rtol=1e-12, atol=1e-12):
                raise ValueError(
                    f"branches disagree at {a[1]}, which is not declared as a jump"
                )

    jump_limits = []
    for j in jumps:
        vals = []
        for (lo, hi), f in items:
            if lo <= j <= hi:
                vals.append(float(f(np.array([j]))[0]))
        jump_limits.append((j, min(vals), max(vals)))

    def base(x):
        out = np.empty(x.shape)
        done = np.zeros(x.shape, dtype=bool)
        for (lo, hi), f in items:
            m = (~done) & (x >= lo) & (x <= hi)
            if np.any(m):
                out[m] = f(x[m])
                done |= m
        return out

    def make(pick):
        def fn(t, z, x):
            x = np.asarray(x, dtype=float)
            out = base(x)
            for j, lo, hi in jump_limits:
                out[x == j] = pick(lo, hi)
            return out

        return fn

    a2 = growth_a2 if callable(growth_a2) else _const_a2(growth_a2)
    return ForcingEnvelope(make(min), make(max), float(gamma), a2)


def _smooth(f, gamma, a2):
    def fn(t, z, x):
        return f(np.asarray(x, dtype=float))

    return ForcingEnvelope(fn, fn, float(gamma), _const_a2(a2))


def named_forcing(key: str, eta: float = 1.0, gamma: float = 0.0) -> ForcingEnvelope:
    """Built-in forcings: identity x, sine_gordon eta*sin(x), relay sign(x)
    with [-1, 1] at 0, and zero."""
    if key == "identity":
        return _smooth(lambda x: x.copy(), gamma, 1.0)
    if key == "sine_gordon":
        if not eta > 0:
            raise ValueError(f"sine-Gordon needs eta > 0, got {eta}")
        return _smooth(lambda x: eta * np.sin(x), gamma, eta)
    if key == "relay":
        return envelope_from_piecewise(
            [((-math.inf, 0.0), lambda x: -1.0), ((0.0, math.inf), lambda x: 1.0)],
            jumps=[0.0],
            gamma=gamma,
            growth_a2=1.0,
        )
    if key == "zero":
        return _smooth(np.zeros_like, gamma, 0.0)
    raise ValueError(f"unknown forcing {key!r}; valid: {', '.join(NAMED_FORCINGS)}")


def select_parts(t, u, v, prev, env: ForcingEnvelope, strat: SelectionStrategy, z):
    """Array-level selection.  Returns ``(s, g)`` where s is the envelope part
    (inside [f_l, f_u] exactly) and g = s + gamma v."""
    lo, hi = env.interval(t, z, u)
    kind = strat.kind
    if kind == "closest_to_previous" and prev is None:
        kind = "midpoint"
    if kind == "lower":
        s = lo.copy()
    elif kind == "upper":
        s = hi.copy()
    elif kind == "midpoint":
        s = np.clip(0.5 * (lo + hi), lo, hi)
    else:
        s = np.clip(np.asarray(prev) - env.gamma * v, lo, hi)
    return s, s + env.gamma * v


def select(t: float, u: GridFunction, v: GridFunction, prev: Optional[GridFunction],
           env: ForcingEnvelope, strat: SelectionStrategy) -> GridFunction:
    """Nodal selection g_i in [f_l(t, z_i, u_i), f_u(t, z_i, u_i)] + gamma v_i.

    ``closest_to_previous`` without ``prev`` falls back to the midpoint.
    """
    if u.grid != v.grid:
        raise ValueError("u and v must live on the same grid")
    pv = None if prev is None else prev.values
    _, g = select_parts(t, u.values, v.values, pv, env, strat, u.grid.nodes)
    return GridFunction(g, u.grid, PRIMAL)


class GrowthCheck(NamedTuple):
    passed: bool
    slack: float


def growth_coefficient(t: float, grid: SpatialGrid, env: ForcingEnvelope) -> float:
    """Scalar a with |g| <= a (1 + |u| + |v|) in H for every selection g."""
    a2 = np.asarray(env.growth_a2(t, grid.nodes), dtype=float)
    return max(
        math.sqrt(grid.h * float(np.dot(a2, a2))),
        float(np.max(a2)) if a2.size else 0.0,
        env.gamma,
    )


def growth_bound_check(t, u: GridFunction, v: GridFunction, g: GridFunction,
                       env: ForcingEnvelope) -> GrowthCheck:
    from evoinclusion.grid import h_norm

    bound = growth_coefficient(t, u.grid, env) * (1.0 + h_norm(u) + h_norm(v))
    slack = bound - h_norm(g)
    return GrowthCheck(slack >= -1e-12 * (1.0 + bound), slack)
