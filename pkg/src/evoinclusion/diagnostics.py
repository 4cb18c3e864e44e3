"""Energy ledger, a priori inequality checks and the data-only bound M0.

For backward Euler, pairing the step equation with v_{n+1} gives exactly

    1/2|v+|^2 - 1/2|v|^2 + tau<A_eps(v+), v+> + 1/2<Bu+, u+> - 1/2<Bu, u>
        = tau (g, v+) - 1/2|v+ - v|^2 - 1/2<B(u+ - u), u+ - u>,

so the energy inequality holds step by step up to roundoff and the inner
solve residual.  Time integrals use the right endpoint (v_{n+1}), which is
the quadrature that makes the discrete inequalities exact.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from evoinclusion import operators
from evoinclusion.forcing import ForcingEnvelope, growth_coefficient
from evoinclusion.grid import (
    GridFunction,
    dual_norm_upper,
    embedding_constant,
    h_norm,
    inverse_estimate_constant,
)
from evoinclusion.grid import dual_pair
from evoinclusion.operators import ViscositySpec, apply_B, batch_h_norm, batch_x_norm

LEDGER_COLUMNS = ("step", "t", "kinetic", "elastic", "visc_diss", "reg_diss", "work", "ineq_slack")


def initial_energy(u0: GridFunction, u1: GridFunction) -> float:
    """1/2|u1|^2 + 1/2<Bu0, u0>."""
    return 0.5 * h_norm(u1) ** 2 + 0.5 * dual_pair(apply_B(u0), u0)


@dataclass
class EnergyLedger:
    t: np.ndarray
    kinetic: np.ndarray
    elastic: np.ndarray
    visc_diss: np.ndarray
    reg_diss: np.ndarray
    work: np.ndarray
    step_slack: np.ndarray  # step_slack[0] = 0 by convention
    initial_energy: float
    sup_v_h: float  # M1 proxy, sup_t |v|
    sup_u_x: float  # M2 proxy, sup_t ||u||
    reg_lr_norm: float  # eps^{1/r} ||v||_{L^r(T, X)}
    gronwall_bound: float  # M, bound on |v|^2

    def __len__(self):
        return self.t.shape[0]

    @property
    def ineq_slack(self) -> np.ndarray:
        """Cumulative slack: work + E0 - (kinetic + reg_diss + elastic)."""
        return self.work + self.initial_energy - (self.kinetic + self.reg_diss + self.elastic)

    def write_csv(self, path) -> None:
        slack = self.ineq_slack
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LEDGER_COLUMNS)
            for k in range(len(self)):
                w.writerow([k] + [fmt(x) for x in (
                    self.t[k], self.kinetic[k], self.elastic[k], self.visc_diss[k],
                    self.reg_diss[k], self.work[k], slack[k])])


def fmt(x: float) -> str:
    """17-significant-digit, locale-free float formatting."""
    return format(float(x), ".17g")


def build_ledger(traj, vspec: ViscositySpec, env: ForcingEnvelope) -> EnergyLedger:
    grid = traj.grid
    cfg = traj.config
    h = grid.h
    dt = traj.dt
    U, V, G = traj.u, traj.v, traj.g
    kinetic = 0.5 * h * np.sum(V * V, axis=1)
    elastic = 0.5 * operators.elastic_form(U, grid)
    vp = np.zeros(len(traj))
    vp[1:] = operators.viscous_power(traj.t[1:], V[1:], vspec, grid)
    xv = batch_x_norm(V, grid, vspec.p)
    rp = np.zeros(len(traj))
    rp[1:] = cfg.epsilon * xv[1:] ** cfg.r
    wk = np.zeros(len(traj))
    wk[1:] = h * np.sum(G[1:] * V[1:], axis=1)

    visc = np.concatenate(([0.0], np.cumsum(dt * vp[1:])))
    reg = np.concatenate(([0.0], np.cumsum(dt * rp[1:])))
    work = np.concatenate(([0.0], np.cumsum(dt * wk[1:])))
    step_slack = np.zeros(len(traj))
    step_slack[1:] = dt * wk[1:] - (
        np.diff(kinetic) + dt * (vp[1:] + rp[1:]) + np.diff(elastic)
    )
    E0 = kinetic[0] + elastic[0]
    reg_lr = cfg.epsilon ** (1.0 / cfg.r) * float(np.sum(dt * xv[1:] ** cfg.r)) ** (1.0 / cfg.r)
    consts = _bound_constants(traj, vspec, env)
    return EnergyLedger(
        t=traj.t.copy(), kinetic=kinetic, elastic=elastic, visc_diss=visc,
        reg_diss=reg, work=work, step_slack=step_slack, initial_energy=E0,
        sup_v_h=float(np.max(batch_h_norm(V, grid))),
        sup_u_x=float(np.max(batch_x_norm(U, grid, vspec.p))),
        reg_lr_norm=reg_lr, gronwall_bound=consts["M"],
    )


class InequalityCheck(NamedTuple):
    passed: bool
    worst_slack: float
    tolerance: float


def check_apriori_inequality(ledger: EnergyLedger, u0: GridFunction,
                             u1: GridFunction) -> InequalityCheck:
    """kinetic_n + reg_diss_n + elastic_n <= work_n + E0 at every step,
    where E0 = 1/2|u1|^2 + 1/2<Bu0, u0>; the viscous dissipation is dropped."""
    E0 = initial_energy(u0, u1)
    slack = ledger.work + E0 - (ledger.kinetic + ledger.reg_diss + ledger.elastic)
    tol = 1e-10 * (E0 + 1.0)
    worst = float(np.min(slack))
    return InequalityCheck(worst >= -tol, worst, tol)


def check_step_inequality(ledger: EnergyLedger) -> InequalityCheck:
    """Per-step energy inequality, tolerance 1e-10 (E0 + 1)."""
    tol = 1e-10 * (ledger.initial_energy + 1.0)
    worst = float(np.min(ledger.step_slack[1:])) if len(ledger) > 1 else 0.0
    return InequalityCheck(worst >= -tol, worst, tol)


def gronwall_bound(c, weights: Sequence):
    """c * prod(1 + w_k): bound for x_n <= c + sum_{k<n} w_k x_k.

    Works with any numeric type, so Fractions give an exact result.
    """
    out = c
    for w in weights:
        if w < 0:
            raise ValueError("Gronwall weights must be nonnegative")
        out = out * (1 + w)
    return out


def _bound_constants(traj, vspec: ViscositySpec, env: ForcingEnvelope) -> dict:
    """Data-only quantities of the a priori estimate.

    Writing x_k = |v_k|^2 and abar_k for the growth coefficient of F at t_k,
    the summed step identity, |g_k| <= abar_k (1 + |u_{k-1}| + |v_{k-1}|) and
    the discrete Jensen bound |u_k|^2 <= 2|u0|^2 + 2b sum_{j<=k} dt_j x_j give
    x_n <= C + sum_{j<n} w_j x_j with C and w_j below.  Nothing here depends on
    eps or r.
    """
    grid = traj.grid
    t = traj.t
    dt = traj.dt
    tau = float(np.max(dt))
    b = float(t[-1])
    if not tau < 1.0:
        raise ValueError("the a priori bound needs tau < 1")
    u0 = GridFunction(traj.u[0], grid)
    u1 = GridFunction(traj.v[0], grid)
    E0 = initial_energy(u0, u1)
    u0h2 = h_norm(u0) ** 2
    abar = np.array([growth_coefficient(tk, grid, env) for tk in t[1:]])
    q = dt * abar**2  # dt_k abar_k^2, k = 1..N
    N = dt.size
    C = (2.0 * E0 + 3.0 * (1.0 + 2.0 * u0h2) * float(np.sum(q))) / (1.0 - tau)
    tail = np.concatenate((np.cumsum(q[::-1])[::-1], [0.0]))  # tail[j] = sum_{k>=j+1} q_k
    w = np.empty(N)
    w[0] = 3.0 * q[0] / (1.0 - tau)
    j = np.arange(1, N)
    w[1:] = (dt[j - 1] + 3.0 * q[j] + 6.0 * b * dt[j - 1] * tail[j]) / (1.0 - tau)
    M = float(gronwall_bound(C, w))
    M1 = math.sqrt(M)
    U = math.sqrt(2.0 * u0h2 + 2.0 * b * b * M)
    R = E0 + float(np.sum(dt * abar)) * (1.0 + U + M1) * M1

    c_inv = inverse_estimate_constant(grid)
    c_emb = embedding_constant(grid)
    sup_u_x = c_inv * math.sqrt(2.0 * R)
    if R == 0.0:
        reg_lr, reg_kr = 0.0, 0.0
    elif R >= 1.0:
        reg_lr, reg_kr = R ** (1.0 / vspec.p), R
    else:
        reg_lr, reg_kr = 1.0, R ** (1.0 - 1.0 / vspec.p)
    M2 = max(sup_u_x, reg_lr)

    # ||u''||_{L^{r'}(T, X*)}: triangle inequality on g - A(v) - eps K_r(v) - Bu,
    # with L^q(T) <= max(1, b) L^s(T) for q <= s.
    bt = max(1.0, b)
    a_all = np.concatenate([vspec.a_edges(tk, grid) for tk in t[1:]])
    a_max = float(np.max(a_all)) if a_all.size else 0.0
    a_min = float(np.min(a_all)) if a_all.size else 0.0
    beta_max = float(np.max(vspec.beta_nodes(grid)))
    p = vspec.p
    g_part = bt * c_emb * float(np.max(abar)) * (1.0 + U + M1)
    beta_part = bt * c_emb * beta_max * M1
    if a_max == 0.0:
        a_part = 0.0
    elif a_min > 0.0:
        a_part = bt * a_max * (R / a_min) ** (1.0 - 1.0 / p)
    else:
        a_part = math.inf
    b_part = bt * grid.L ** (0.5 - 1.0 / p) * math.sqrt(2.0 * R)
    M3 = g_part + beta_part + a_part + reg_kr + b_part
    return {
        "E0": E0, "C": C, "weights": w, "M": M, "M1": M1, "U": U, "R": R,
        "M2": M2, "M2_sup_u": sup_u_x, "M2_reg": reg_lr, "M3": M3,
        "M0": max(M1, M2, M3),
    }


@dataclass
class AprioriBound:
    M: float
    M0: float
    M1: float
    M2: float
    M3: float
    sup_v_h: float
    sup_u_x: float
    reg_lr_norm: float
    u2_proxy: float
    jensen_ok: bool
    passed: bool

    @property
    def realized(self) -> float:
        return max(self.sup_v_h, self.sup_u_x)


def jensen_check(traj) -> bool:
    """|u_k|^2 <= 2|u0|^2 + 2b sum_{j<=k} dt_j |v_j|^2 at every step."""
    grid = traj.grid
    h = grid.h
    b = float(traj.t[-1])
    uh2 = h * np.sum(traj.u * traj.u, axis=1)
    vh2 = h * np.sum(traj.v * traj.v, axis=1)
    acc = np.concatenate(([0.0], np.cumsum(traj.dt * vh2[1:])))
    rhs = 2.0 * uh2[0] + 2.0 * b * acc
    return bool(np.all(uh2 <= rhs * (1.0 + 1e-12) + 1e-300))


def apriori_M0(traj, vspec: ViscositySpec, env: ForcingEnvelope,
               u0: GridFunction = None, u1: GridFunction = None) -> AprioriBound:
    """Assemble M0 from the data and compare with the realized norms.

    The initial data are read from the trajectory when not given; if given
    they must match it.
    """
    if u0 is not None and not np.array_equal(u0.values, traj.u[0]):
        raise ValueError("u0 does not match the trajectory's initial state")
    if u1 is not None and not np.array_equal(u1.values, traj.v[0]):
        raise ValueError("u1 does not match the trajectory's initial velocity")
    consts = _bound_constants(traj, vspec, env)
    led = build_ledger(traj, vspec, env)
    u2 = second_derivative_norm_proxy(traj, vspec, env)
    ok = (
        led.sup_v_h <= consts["M1"]
        and led.sup_u_x <= consts["M2"]
        and led.reg_lr_norm <= consts["M2"]
        and u2 <= consts["M3"]
    )
    jen = jensen_check(traj)
    return AprioriBound(
        M=consts["M"], M0=consts["M0"], M1=consts["M1"], M2=consts["M2"],
        M3=consts["M3"], sup_v_h=led.sup_v_h, sup_u_x=led.sup_u_x,
        reg_lr_norm=led.reg_lr_norm, u2_proxy=u2, jensen_ok=jen,
        passed=bool(ok and jen),
    )


def second_derivative_norm_proxy(traj, vspec: ViscositySpec = None,
                                 env: ForcingEnvelope = None, samples: int = 8,
                                 seed: int = 0) -> float:
    """(sum dt ||(v_k - v_{k-1})/dt||_*^{r'})^{1/r'} with sampled dual norms."""
    if len(traj) < 2:
        raise ValueError("need at least one step")
    grid = traj.grid
    r = traj.config.r
    rp = r / (r - 1.0)
    dt = traj.dt
    acc = 0.0
    for k in range(1, len(traj)):
        acc_k = (traj.v[k] - traj.v[k - 1]) / dt[k - 1]
        if not np.any(acc_k):
            continue
        d = dual_norm_upper(GridFunction(acc_k, grid, "dual"), samples, seed)
        acc += dt[k - 1] * d**rp
    return acc ** (1.0 / rp)
