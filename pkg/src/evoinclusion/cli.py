"""Command-line front end: ``solve``, ``sweep`` and ``verify``.

Configuration is a flat ``key = value`` file (``#`` starts a comment).
Command-line ``key=value`` pairs override file values.  Keys left unset take
the preset's value (L, p, gamma, u0, u1) or the defaults in ``DEFAULTS``.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 verification failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from evoinclusion import __version__, kernels
from evoinclusion.diagnostics import (
    apriori_M0,
    build_ledger,
    check_apriori_inequality,
    check_step_inequality,
    fmt,
    gronwall_bound,
)
from evoinclusion.forcing import STRATEGIES, SelectionStrategy
from evoinclusion.grid import dual_pair, x_norm
from evoinclusion.operators import RegularizerSpec, apply_Jp, apply_Kr, duality_map
from evoinclusion.scenarios import PRESETS, Scenario, parse_initial, preset
from evoinclusion.stepper import SCHEMES, SolverConfig, StepFailure, solve_trajectory
from evoinclusion.sweep import SweepPlan, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

WORKERS_ENV = "EVOINCLUSION_WORKERS"

# None means "take it from the preset"
DEFAULTS: Dict[str, object] = {
    "preset": "klein_gordon",
    "L": None,
    "n": 63,
    "p": None,
    "r": None,
    "epsilon": 1e-4,
    "gamma": None,
    "eta": 1.0,
    "tau": 1e-3,
    "b": 1.0,
    "scheme": "backward_euler",
    "selection": "midpoint",
    "newton_tol": 1e-11,
    "newton_max_iter": 50,
    "damping": 1.0,
    "u0": None,
    "u1": None,
    "seed": 0,
    "workers": 1,
}
KEYS = tuple(DEFAULTS)

_FLOATS = {"L", "p", "r", "epsilon", "gamma", "eta", "tau", "b", "newton_tol", "damping"}
_INTS = {"n", "newton_max_iter", "seed", "workers"}


class ConfigError(ValueError):
    pass


def parse_pairs(lines: Sequence[str], source: str) -> Dict[str, str]:
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}; valid keys: {', '.join(KEYS)}")
        out[key] = val
    return out


def _coerce(key: str, text: str):
    try:
        if key in _FLOATS:
            return float(text)
        if key in _INTS:
            return int(text)
    except ValueError:
        raise ConfigError(f"bad value for key {key!r}: {text!r}") from None
    return text


def load_config(path: Optional[str], overrides: Sequence[str] = ()) -> Dict[str, object]:
    """Merge file and override pairs, then resolve preset-dependent keys."""
    raw: Dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
        raw.update(parse_pairs(text.splitlines(), str(path)))
    raw.update(parse_pairs(list(overrides), "command line"))
    cfg = dict(DEFAULTS)
    cfg.update({k: _coerce(k, v) for k, v in raw.items()})
    return resolve(cfg)


def resolve(cfg: Dict[str, object]) -> Dict[str, object]:
    """Fill preset-dependent keys and validate everything before any run."""
    cfg = dict(cfg)
    name = cfg["preset"]
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}")
    over = {"n": cfg["n"], "eta": cfg["eta"]}
    for key in ("L", "p", "gamma"):
        if cfg[key] is not None:
            over[key] = cfg[key]
    for key in ("u0", "u1"):
        if cfg[key] is not None:
            try:
                over[key] = parse_initial(cfg[key])
            except ValueError as exc:
                raise ConfigError(f"key {key!r}: {exc}") from None
    try:
        sc = preset(name, **over)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for key in ("L", "p", "gamma", "u0", "u1"):
        cfg[key] = sc.params[key]
    if cfg["r"] is None:
        cfg["r"] = cfg["p"]
    if cfg["scheme"] not in SCHEMES:
        raise ConfigError(f"bad value for key 'scheme': {cfg['scheme']!r}; valid: {', '.join(SCHEMES)}")
    if cfg["selection"] not in STRATEGIES:
        raise ConfigError(
            f"bad value for key 'selection': {cfg['selection']!r}; valid: {', '.join(STRATEGIES)}"
        )
    if cfg["workers"] < 1:
        raise ConfigError("key 'workers' must be at least 1")
    try:
        config_to_solver(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def config_to_scenario(cfg) -> Scenario:
    return preset(cfg["preset"], L=cfg["L"], n=cfg["n"], p=cfg["p"], gamma=cfg["gamma"],
                  eta=cfg["eta"], u0=parse_initial(cfg["u0"]), u1=parse_initial(cfg["u1"]))


def config_to_solver(cfg, epsilon=None, r=None) -> SolverConfig:
    rspec = RegularizerSpec(cfg["epsilon"] if epsilon is None else epsilon,
                            cfg["r"] if r is None else r)
    rspec.check_against(cfg["p"])
    return SolverConfig(
        tau=cfg["tau"], horizon_b=cfg["b"], rspec=rspec, scheme=cfg["scheme"],
        newton_tol=cfg["newton_tol"], newton_max_iter=cfg["newton_max_iter"],
        damping=cfg["damping"], strategy=SelectionStrategy(cfg["selection"]),
    )


def input_digest(cfg) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def write_manifest(out_dir: Path, cfg, outputs: List[str], extra=None) -> None:
    man = {
        "config": cfg,
        "version": __version__,
        "seed": cfg["seed"],
        "input_digest": input_digest(cfg),
        "backend": kernels.BACKEND,
        "outputs": sorted(outputs),
    }
    if extra:
        man.update(extra)
    (out_dir / "manifest.json").write_text(
        json.dumps(man, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def write_trajectory_csv(path: Path, traj) -> None:
    n = traj.grid.n
    header = ["step", "t"] + [f"u_{i}" for i in range(1, n + 1)] + [f"v_{i}" for i in range(1, n + 1)]
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(len(traj)):
            row = [str(k), fmt(traj.t[k])]
            row += [fmt(x) for x in traj.u[k]]
            row += [fmt(x) for x in traj.v[k]]
            fh.write(",".join(row) + "\n")


def _solve_into(out_dir: Path, cfg, sc: Scenario, solver: SolverConfig):
    out_dir.mkdir(parents=True, exist_ok=True)
    u0, u1 = sc.initial()
    traj = solve_trajectory(u0, u1, solver, sc.vspec, sc.env)
    write_trajectory_csv(out_dir / "trajectory.csv", traj)
    build_ledger(traj, sc.vspec, sc.env).write_csv(out_dir / "energy.csv")
    return traj


def cmd_solve(config_path, overrides, out_dir) -> int:
    try:
        cfg = load_config(config_path, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    try:
        _solve_into(out, cfg, config_to_scenario(cfg), config_to_solver(cfg))
    except StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_manifest(out, cfg, ["trajectory.csv", "energy.csv"])
    print(f"wrote {out / 'trajectory.csv'} and {out / 'energy.csv'}")
    return EXIT_OK


def _parse_floats(values, key) -> List[float]:
    try:
        return [float(x) for x in values]
    except ValueError:
        raise ConfigError(f"non-numeric entry in {key}") from None


def _short(x: float) -> str:
    """Shortest round-tripping text for a float, without a trailing ``.0``."""
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


def cmd_sweep(config_path, eps_list, r_list, out_dir, overrides=()) -> int:
    try:
        cfg = load_config(config_path, overrides)
        eps = _parse_floats(eps_list or [], "eps list")
        rs = _parse_floats(r_list or [], "r list") or [cfg["r"]]
        if not eps:
            raise ConfigError("eps list must not be empty")
        workers = cfg["workers"]
        env_workers = os.environ.get(WORKERS_ENV)
        if env_workers:
            try:
                workers = int(env_workers)
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV} must be an integer") from None
        sc = config_to_scenario(cfg)
        for e in eps:
            for r in rs:
                config_to_solver(cfg, e, r)
        plan = SweepPlan(tuple(eps), tuple(rs), config_to_solver(cfg, eps[0], rs[0]), sc, workers)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = run_sweep(plan)
    outputs = ["sweep.csv", "summary.txt"]
    for e, r in report.keys:
        run = report.runs[(e, r)]
        if run.trajectory is None:
            continue
        sub = f"eps_{_short(e)}_r_{_short(r)}"
        (out / sub).mkdir(exist_ok=True)
        write_trajectory_csv(out / sub / "trajectory.csv", run.trajectory)
        build_ledger(run.trajectory, sc.vspec, sc.env).write_csv(out / sub / "energy.csv")
        outputs += [f"{sub}/trajectory.csv", f"{sub}/energy.csv"]
    report.write_csv(out / "sweep.csv")
    (out / "summary.txt").write_text(report.summary_text(), encoding="ascii")
    write_manifest(out, cfg, outputs, {"eps_list": eps, "r_list": rs})
    sys.stdout.write(report.summary_text())
    if report.failures:
        print(f"{len(report.failures)} run(s) failed; see sweep.csv", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _exhaustive_gronwall(c: Fraction, w: Sequence[Fraction]) -> Fraction:
    """Largest x_N allowed by x_n <= c + sum_{k<n} w_k x_k, by forward recursion."""
    xs: List[Fraction] = []
    for n in range(len(w) + 1):
        xs.append(c + sum((w[k] * xs[k] for k in range(n)), Fraction(0)))
    return xs[-1]


def selection_contained(traj, env, k: int) -> bool:
    """Exact (no tolerance) check that step k's selection lies in the fill-in
    interval at the frozen state, both before and after adding gamma v.

    Floating-point addition is monotone, so lo <= s <= hi implies
    fl(lo + gamma v) <= fl(s + gamma v) <= fl(hi + gamma v).
    """
    z = traj.grid.nodes
    lo, hi = env.interval(traj.t[k], z, traj.u[k - 1])
    s, g = traj.s[k], traj.g[k]
    gv = env.gamma * traj.v[k - 1]
    return bool(np.all((lo <= s) & (s <= hi)) and np.all((lo + gv <= g) & (g <= hi + gv)))


def verify_checks(cfg) -> List[tuple]:
    """Run the invariant suites for one configuration; returns (name, ok, detail)."""
    rng = np.random.default_rng(cfg["seed"])
    sc = config_to_scenario(cfg)
    grid = sc.grid()
    p = sc.p
    rows = []

    worst = 0.0
    for r in (p, p + 1.0, p + 3.0):
        for _ in range(50):
            y = grid.function(rng.standard_normal(grid.n))
            nx = x_norm(y)
            worst = max(
                worst,
                abs(dual_pair(apply_Jp(y, p), y) - nx**p) / nx**p,
                abs(dual_pair(duality_map(y, p), y) - nx**2) / nx**2,
                abs(dual_pair(apply_Kr(y, RegularizerSpec(1.0, r), p), y) - nx**r) / nx**r,
            )
    rows.append(("operator identities", worst <= 1e-10, f"worst rel err {worst:.2e}"))

    ok_g = True
    for _ in range(200):
        m = int(rng.integers(0, 13))
        c = Fraction(int(rng.integers(0, 1000)), 100)
        w = [Fraction(int(x), 500) for x in rng.integers(0, 1001, size=m)]
        ok_g &= gronwall_bound(c, w) == _exhaustive_gronwall(c, w)
    rows.append(("gronwall oracle", ok_g, "200 exact instances"))

    # the energy identities are exact for backward Euler only
    be = dict(cfg, scheme="backward_euler")
    u0, u1 = sc.initial()
    traj = None
    for strat in STRATEGIES:
        solver = config_to_solver(dict(be, selection=strat))
        traj_s = solve_trajectory(u0, u1, solver, sc.vspec, sc.env)
        inside = all(selection_contained(traj_s, sc.env, k) for k in range(1, len(traj_s)))
        rows.append((f"selection containment ({strat})", inside, f"{len(traj_s) - 1} steps"))
        if strat == cfg["selection"]:
            traj = traj_s
    led = build_ledger(traj, sc.vspec, sc.env)
    st = check_step_inequality(led)
    rows.append(("per-step energy inequality", st.passed, f"worst slack {st.worst_slack:.3e}"))
    ap = check_apriori_inequality(led, u0, u1)
    rows.append(("cumulative energy inequality", ap.passed, f"worst slack {ap.worst_slack:.3e}"))
    bound = apriori_M0(traj, sc.vspec, sc.env)
    rows.append(("a priori bound M0", bound.passed and bound.realized <= bound.M0,
                 f"realized {bound.realized:.4g} <= M0 {bound.M0:.4g}"))
    return rows


def cmd_verify(preset_name, overrides=()) -> int:
    try:
        cfg = load_config(None, [f"preset={preset_name}", *overrides])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = verify_checks(cfg)
    except StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    failed = [r[0] for r in rows if not r[1]]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evoinclusion", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="integrate one configuration")
    s.add_argument("config", help="key=value configuration file")
    s.add_argument("overrides", nargs="*", metavar="key=value")
    s.add_argument("--out", required=True, help="output directory")

    w = sub.add_parser("sweep", help="run an eps (and r) continuation")
    w.add_argument("config")
    w.add_argument("overrides", nargs="*", metavar="key=value")
    w.add_argument("--eps", nargs="*", default=[], help="strictly decreasing values in (0, 1]")
    w.add_argument("--r", nargs="*", default=[], help="exponents >= p (default: config r)")
    w.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="run the invariant suites on a preset")
    v.add_argument("preset", help=f"one of {', '.join(PRESETS)}")
    v.add_argument("overrides", nargs="*", metavar="key=value")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args.config, args.overrides, args.out)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.eps, args.r, args.out, args.overrides)
    return cmd_verify(args.preset, args.overrides)


if __name__ == "__main__":
    sys.exit(main())
