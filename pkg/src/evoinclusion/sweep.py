"""Continuation in eps (and r) toward the unregularized problem.

Every (eps, r) run shares grid, time step and data.  Runs are independent and
may be executed on a thread pool; results are keyed by (eps, r), so the report
does not depend on completion order.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from evoinclusion.diagnostics import (
    apriori_M0,
    build_ledger,
    check_apriori_inequality,
    fmt,
)
from evoinclusion.grid import GridFunction, h_norm
from evoinclusion.operators import RegularizerSpec
from evoinclusion.scenarios import Scenario
from evoinclusion.stepper import (
    SolverConfig,
    StepFailure,
    TrajectoryRecord,
    solve_trajectory,
    trajectory_distance,
)

SWEEP_COLUMNS = (
    "eps", "r", "status", "sup_u_x", "sup_v_h", "reg_lr_norm", "u2_proxy",
    "reg_contribution", "M0", "within_M0", "ineq_ok", "dist_to_finest",
)


@dataclass(frozen=True)
class SweepPlan:
    eps_list: Tuple[float, ...]
    r_list: Tuple[float, ...]
    base_config: SolverConfig
    scenario: Scenario
    workers: int = 1

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        rs = tuple(float(r) for r in self.r_list)
        object.__setattr__(self, "eps_list", eps)
        object.__setattr__(self, "r_list", rs)
        if not eps:
            raise ValueError("eps_list must not be empty")
        if not rs:
            raise ValueError("r_list must not be empty")
        if any(not 0.0 < e <= 1.0 for e in eps):
            raise ValueError("every eps must lie in (0, 1]")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        p = self.scenario.p
        if any(r < p for r in rs):
            raise ValueError(f"every r must be >= p = {p}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def keys(self) -> List[Tuple[float, float]]:
        return [(e, r) for r in self.r_list for e in self.eps_list]


@dataclass
class RunSummary:
    eps: float
    r: float
    status: str = "ok"
    sup_u_x: float = math.nan
    sup_v_h: float = math.nan
    reg_lr_norm: float = math.nan
    u2_proxy: float = math.nan
    reg_contribution: float = math.nan  # eps * sum dt ||v||^r
    M0: float = math.nan
    within_M0: bool = False
    ineq_ok: bool = False
    trajectory: Optional[TrajectoryRecord] = field(default=None, repr=False)

    @property
    def realized(self) -> float:
        """max(||u||_{C(T,X)}, ||u'||_{C(T,H)}), the quantity bounded by M0."""
        return max(self.sup_u_x, self.sup_v_h)


@dataclass
class SweepReport:
    plan: SweepPlan
    runs: Dict[Tuple[float, float], RunSummary]
    keys: List[Tuple[float, float]]
    distance: np.ndarray  # over ``keys``; nan where a run failed
    dist_to_finest: Dict[Tuple[float, float], float]

    @property
    def M0(self) -> float:
        vals = {s.M0 for s in self.runs.values() if s.status == "ok"}
        if len(vals) > 1:
            raise RuntimeError(f"M0 differs across runs: {sorted(vals)}")
        return vals.pop() if vals else math.nan

    @property
    def failures(self) -> List[Tuple[float, float]]:
        return [k for k in self.keys if self.runs[k].status != "ok"]

    def uniform_bound_ok(self) -> bool:
        ok = [s for s in self.runs.values() if s.status == "ok"]
        return bool(ok) and all(s.within_M0 for s in ok)

    def spread(self, attr: str = "realized") -> float:
        """(max - min) / max of a per-run quantity over successful runs."""
        vals = np.array([getattr(s, attr) for s in self.runs.values() if s.status == "ok"])
        if vals.size == 0 or np.max(vals) == 0.0:
            return 0.0
        return float((np.max(vals) - np.min(vals)) / np.max(vals))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_COLUMNS)
            for k in self.keys:
                s = self.runs[k]
                w.writerow([
                    fmt(s.eps), fmt(s.r), s.status, fmt(s.sup_u_x), fmt(s.sup_v_h),
                    fmt(s.reg_lr_norm), fmt(s.u2_proxy), fmt(s.reg_contribution),
                    fmt(s.M0), int(s.within_M0), int(s.ineq_ok),
                    fmt(self.dist_to_finest.get(k, math.nan)),
                ])

    def summary_text(self) -> str:
        lines = [
            f"scenario: {self.plan.scenario.name}",
            f"runs: {len(self.keys)}  failures: {len(self.failures)}",
            f"M0: {fmt(self.M0)}",
            f"uniform bound holds: {self.uniform_bound_ok()}",
            f"spread of max(||u||_C(X), ||u'||_C(H)): {self.spread():.4f}",
            f"spread of ||u||_C(X): {self.spread('sup_u_x'):.4f}",
            f"spread of ||u'||_C(H): {self.spread('sup_v_h'):.4f}",
        ]
        for r in self.plan.r_list:
            d = [self.dist_to_finest.get((e, r), math.nan) for e in self.plan.eps_list]
            lines.append(f"r={fmt(r)} distance to finest eps: " + " ".join(fmt(x) for x in d))
        return "\n".join(lines) + "\n"


def _run_one(plan: SweepPlan, eps: float, r: float) -> RunSummary:
    sc = plan.scenario
    cfg = replace(plan.base_config, rspec=RegularizerSpec(eps, r))
    u0, u1 = sc.initial()
    out = RunSummary(eps, r)
    try:
        traj = solve_trajectory(u0, u1, cfg, sc.vspec, sc.env)
    except StepFailure as exc:
        out.status = f"failed at step {exc.step_index}: residual {exc.residual:.3e}"
        return out
    led = build_ledger(traj, sc.vspec, sc.env)
    bound = apriori_M0(traj, sc.vspec, sc.env)
    out.sup_u_x = led.sup_u_x
    out.sup_v_h = led.sup_v_h
    out.reg_lr_norm = led.reg_lr_norm
    out.u2_proxy = bound.u2_proxy
    out.reg_contribution = float(led.reg_diss[-1])
    out.M0 = bound.M0
    out.within_M0 = bound.passed and bound.realized <= bound.M0
    out.ineq_ok = check_apriori_inequality(led, u0, u1).passed
    out.trajectory = traj
    return out


def run_sweep(plan: SweepPlan) -> SweepReport:
    keys = plan.keys()
    if plan.workers == 1:
        results = [_run_one(plan, e, r) for e, r in keys]
    else:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            results = list(pool.map(lambda k: _run_one(plan, *k), keys))
    runs = dict(zip(keys, results))
    m = len(keys)
    dist = np.full((m, m), math.nan)
    for i in range(m):
        for j in range(i, m):
            ti, tj = runs[keys[i]].trajectory, runs[keys[j]].trajectory
            if ti is None or tj is None:
                continue
            d = 0.0 if i == j else trajectory_distance(ti, tj)
            dist[i, j] = dist[j, i] = d
    to_finest = {}
    finest = plan.eps_list[-1]
    for r in plan.r_list:
        ref = runs[(finest, r)].trajectory
        for e in plan.eps_list:
            tr = runs[(e, r)].trajectory
            if ref is not None and tr is not None:
                to_finest[(e, r)] = trajectory_distance(tr, ref)
    return SweepReport(plan, runs, keys, dist, to_finest)


def is_nonincreasing(values: Sequence[float]) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


@dataclass
class LimitEstimate:
    eps_pair: Tuple[float, float]
    terminal: GridFunction
    residual: float
    finest_gap: float


def richardson_limit_estimate(report: SweepReport, r: Optional[float] = None) -> LimitEstimate:
    """Extrapolate the terminal state to eps = 0 assuming it is linear in eps.

    Uses the two finest successful runs (for the given r, default the first).
    With three or more runs the residual is the misfit of the linear model at
    the third-finest eps; with two it is the size of the correction.
    ``finest_gap`` is h_norm of the difference of the two finest terminal states.
    """
    r = report.plan.r_list[0] if r is None else r
    runs = [report.runs[(e, r)] for e in report.plan.eps_list
            if (e, r) in report.runs and report.runs[(e, r)].trajectory is not None]
    if len(runs) < 2:
        raise ValueError("need at least two successful runs to extrapolate")
    grid = runs[-1].trajectory.grid
    ec, ef = runs[-2].eps, runs[-1].eps
    uc, uf = runs[-2].trajectory.u[-1], runs[-1].trajectory.u[-1]
    slope = (uc - uf) / (ec - ef)
    limit = uf - ef * slope
    gap = h_norm(GridFunction(uc - uf, grid))
    if len(runs) >= 3:
        e3, u3 = runs[-3].eps, runs[-3].trajectory.u[-1]
        pred = uf + (e3 - ef) * slope
        res = h_norm(GridFunction(pred - u3, grid))
    else:
        res = h_norm(GridFunction(limit - uf, grid))
    return LimitEstimate((ec, ef), GridFunction(limit, grid), res, gap)
