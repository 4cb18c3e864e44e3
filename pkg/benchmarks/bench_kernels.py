"""Compare the compiled and pure-Python kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--n 63 127 255] [--repeat 5]

Times one inner Newton solve (a typical implicit step) and one full
trajectory for each available backend, and checks that both backends agree.
"""
import argparse
import time
from unittest import mock

import numpy as np

from evoinclusion import kernels, stepper
from evoinclusion.operators import RegularizerSpec
from evoinclusion.scenarios import preset
from evoinclusion.stepper import SolverConfig, solve_trajectory


def step_inputs(n, p, r, rng):
    sc = preset("viscous_plap", n=n, p=p)
    g = sc.grid()
    u, v = (x.values for x in sc.initial())
    v = v + 0.1 * rng.standard_normal(n)
    rhs = rng.standard_normal(n)
    a = sc.vspec.a_edges(0.0, g)
    beta = sc.vspec.beta_nodes(g)
    return (v, u, rhs, a, beta, g.h, p, 0.1, r, 1e-3, 1e-3, 1e-11, 50, 1.0)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[63, 127, 255])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the python backend is available")
    rng = np.random.default_rng(0)

    print(f"{'case':<28}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for n in args.n:
        for p, r in ((2.0, 2.0), (3.0, 5.0)):
            inputs = step_inputs(n, p, r, rng)
            times, sols = {}, {}
            for name, mod in backends.items():
                times[name], (sols[name], _, _) = best_of(lambda: mod.newton_solve(*inputs), args.repeat)
            ref = sols["python"]
            for w in sols.values():
                assert np.allclose(w, ref, rtol=1e-9, atol=1e-12)
            row = f"newton n={n} p={p:g} r={r:g}"
            print(f"{row:<28}" + "".join(f"{times[k] * 1e3:>10.3f}ms" for k in backends)
                  + (f"{times['python'] / times['cython']:>9.1f}x" if "cython" in times else ""))

    for n in args.n:
        sc = preset("viscous_plap", n=n)
        u0, u1 = sc.initial()
        cfg = SolverConfig(2e-3, 0.2, RegularizerSpec(0.1, 5.0))
        times, finals = {}, {}
        for name, mod in backends.items():
            with mock.patch.object(stepper.kernels, "newton_solve", mod.newton_solve):
                times[name], tr = best_of(lambda: solve_trajectory(u0, u1, cfg, sc.vspec, sc.env),
                                          max(1, args.repeat // 2))
            finals[name] = tr.u[-1]
        for u in finals.values():
            assert np.allclose(u, finals["python"], rtol=1e-9, atol=1e-12)
        row = f"trajectory n={n} (100 steps)"
        print(f"{row:<28}" + "".join(f"{times[k]:>11.3f}s" for k in backends)
              + (f"{times['python'] / times['cython']:>9.1f}x" if "cython" in times else ""))


if __name__ == "__main__":
    main()
