"""One test per acceptance criterion, each printing a single pass/fail line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines inline;
they are also collected into an "acceptance criteria" section of the summary.
"""
import time
from fractions import Fraction

import numpy as np
import pytest

from evoinclusion import cli
from evoinclusion.diagnostics import (
    apriori_M0,
    build_ledger,
    check_apriori_inequality,
    check_step_inequality,
    gronwall_bound,
)
from evoinclusion.forcing import STRATEGIES
from evoinclusion.grid import SpatialGrid, dual_pair, x_norm
from evoinclusion.operators import RegularizerSpec, apply_Jp, apply_Kr, duality_map
from evoinclusion.scenarios import PRESETS, preset, reference_error
from evoinclusion.stepper import SolverConfig, solve_trajectory
from evoinclusion.sweep import SweepPlan, is_nonincreasing, run_sweep

EPS_MATRIX = (1.0, 0.1, 0.01, 0.001)


def test_criterion_1_operator_identities(acceptance):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst, count = 0.0, 0
    for p in (2.0, 2.5, 3.0, 4.0):
        for r in (p, p + 1, p + 3):
            rs = RegularizerSpec(1.0, r)
            for n in (7, 31, 63):
                g = SpatialGrid(1.0, n, p)
                for _ in range(200):
                    y = g.function(rng.standard_normal(n) * rng.uniform(0.01, 10))
                    nx = x_norm(y)
                    worst = max(
                        worst,
                        abs(dual_pair(apply_Jp(y, p), y) / nx**p - 1),
                        abs(dual_pair(duality_map(y, p), y) / nx**2 - 1),
                        abs(dual_pair(apply_Kr(y, rs, p), y) / nx**r - 1),
                    )
                    count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10
    acceptance(1, "operator identities", ok,
               f"{count} vectors, worst rel err {worst:.2e} (tol 1e-10), {elapsed:.2f}s (< 10s)")


@pytest.fixture(scope="module")
def matrix_runs():
    """Every preset x eps x r in {p, p+2} at tau = 1e-3, b = 1, n = 63."""
    start = time.perf_counter()
    runs = {}
    for name in PRESETS:
        sc = preset(name, n=63)
        u0, u1 = sc.initial()
        for eps in EPS_MATRIX:
            for r in (sc.p, sc.p + 2):
                cfg = SolverConfig(1e-3, 1.0, RegularizerSpec(eps, r))
                tr = solve_trajectory(u0, u1, cfg, sc.vspec, sc.env)
                runs[(name, eps, r)] = (sc, tr, build_ledger(tr, sc.vspec, sc.env))
    return runs, time.perf_counter() - start


def test_criterion_2_step_energy_inequality(acceptance, matrix_runs):
    runs, elapsed = matrix_runs
    failures, worst_margin = [], np.inf
    for key, (sc, tr, led) in runs.items():
        tol = 1e-10 * (led.initial_energy + 1.0)
        step = check_step_inequality(led)
        cum = check_apriori_inequality(led, *sc.initial())
        worst_margin = min(worst_margin, step.worst_slack + tol, cum.worst_slack + tol)
        if not (step.passed and cum.passed):
            failures.append(key)
    ok = not failures and elapsed < 120
    acceptance(2, "per-step energy inequality", ok,
               f"{len(runs)} runs, {len(failures)} violations, min slack+tol {worst_margin:.2e}, "
               f"{elapsed:.1f}s (< 120s)")


def test_criterion_3_apriori_uniformity(acceptance, matrix_runs):
    runs, _ = matrix_runs
    problems, spreads, v_spreads = [], {}, {}
    for name in PRESETS:
        bounds = [apriori_M0(tr, sc.vspec, sc.env)
                  for (nm, _, _), (sc, tr, _) in runs.items() if nm == name]
        m0 = {b.M0 for b in bounds}
        if len(m0) != 1:
            problems.append(f"{name}: M0 varies {sorted(m0)}")
        for b in bounds:
            if not (b.sup_u_x <= b.M0 and b.sup_v_h <= b.M0):
                problems.append(f"{name}: realized {b.realized} > M0 {b.M0}")
        realized = np.array([b.realized for b in bounds])
        spreads[name] = 0.0 if realized.max() == 0 else float(np.ptp(realized) / realized.max())
        if spreads[name] >= 0.10:
            problems.append(f"{name}: spread {spreads[name]:.3f}")
        sv = np.array([b.sup_v_h for b in bounds])
        v_spreads[name] = 0.0 if sv.max() == 0 else float(np.ptp(sv) / sv.max())
    detail = "spread of max(sup ||u||_X, sup |u'|_H): " + ", ".join(
        f"{k} {v:.3f}" for k, v in spreads.items())
    # informational only: the velocity part alone reacts to the regularizer
    detail += "; sup |u'|_H alone (not asserted): " + ", ".join(
        f"{k} {v:.3f}" for k, v in v_spreads.items())
    acceptance(3, "a priori bound uniformity", not problems,
               detail + ("; " + "; ".join(problems) if problems else ""))


def _exhaustive(c, w):
    xs = []
    for n in range(len(w) + 1):
        xs.append(c + sum((w[k] * xs[k] for k in range(n)), Fraction(0)))
    return xs[-1]


def test_criterion_4_gronwall_oracle(acceptance):
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        m = int(rng.integers(0, 13))
        c = Fraction(int(rng.integers(0, 10**6)), int(rng.integers(1, 10**3)))
        w = [Fraction(int(a), int(b)) * 2 for a, b in
             zip(rng.integers(0, 10**4, size=m), rng.integers(10**4, 2 * 10**4, size=m))]
        if gronwall_bound(c, w) != _exhaustive(c, w):
            mismatches += 1
    elapsed = time.perf_counter() - start
    acceptance(4, "Gronwall oracle equivalence", mismatches == 0 and elapsed < 5,
               f"1000 exact instances, {mismatches} mismatches, {elapsed:.2f}s (< 5s)")


def test_criterion_5_klein_gordon_reference(acceptance):
    start = time.perf_counter()
    sc = preset("klein_gordon", n=63)
    u0, u1 = sc.initial()
    taus = (4e-3, 2e-3, 1e-3)
    errs = []
    for tau in taus:
        tr = solve_trajectory(u0, u1, SolverConfig(tau, 1.0, RegularizerSpec(1e-4, 2.0)),
                              sc.vspec, sc.env)
        errs.append(reference_error(tr, sc))
    order = float(np.polyfit(np.log(taus), np.log(errs), 1)[0])
    elapsed = time.perf_counter() - start
    ok = errs[0] > errs[1] > errs[2] and 0.7 <= order <= 1.3 and elapsed < 60
    acceptance(5, "Klein-Gordon reference", ok,
               "errors " + ", ".join(f"{e:.3e}" for e in errs)
               + f", fitted order {order:.3f} in [0.7, 1.3], {elapsed:.1f}s (< 60s)")


def test_criterion_6_eps_convergence(acceptance):
    eps = (1e-1, 1e-2, 1e-3, 1e-4)
    parts, ok = [], True
    for name in ("klein_gordon", "sine_gordon"):
        sc = preset(name, n=63)
        rep = run_sweep(SweepPlan(eps, (2.0,), SolverConfig(1e-3, 1.0, RegularizerSpec(1.0, 2.0)),
                                  sc, workers=4))
        d = [rep.dist_to_finest[(e, 2.0)] for e in eps]
        reg = [rep.runs[(e, 2.0)].reg_contribution for e in eps]
        ratio = reg[-1] / reg[0]
        ok &= not rep.failures and is_nonincreasing(d) and ratio <= 0.1
        parts.append(f"{name}: d " + ", ".join(f"{x:.3e}" for x in d) + f"; reg ratio {ratio:.2e}")
    acceptance(6, "eps -> 0 convergence", ok, " | ".join(parts))


def test_criterion_7_selection_containment(acceptance):
    sc = preset("relay", n=63)
    u0, u1 = sc.initial()
    bad, checked = [], 0
    for strat in STRATEGIES:
        cfg = SolverConfig(1e-3, 1.0, RegularizerSpec(0.1, 2.0), strategy=strat)
        tr = solve_trajectory(u0, u1, cfg, sc.vspec, sc.env)
        for k in range(1, len(tr)):
            checked += tr.grid.n
            if not cli.selection_contained(tr, sc.env, k):
                bad.append((strat, k))
    acceptance(7, "selection containment (exact)", not bad,
               f"{checked} nodal selections over 4 strategies, {len(bad)} outside the interval")


def test_criterion_8_determinism(acceptance, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("preset = relay\ntau = 0.002\nselection = closest_to_previous\nepsilon = 0.01\n")
    rcs = [cli.cmd_solve(str(cfg), [], tmp_path / d) for d in ("a", "b")]
    same = all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        for f in ("trajectory.csv", "energy.csv", "manifest.json")
    )
    acceptance(8, "determinism", rcs == [0, 0] and same,
               f"exit codes {rcs}, trajectory.csv/energy.csv/manifest.json byte-identical: {same}")
