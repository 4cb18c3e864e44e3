"""Named problem instances on (0, L) with homogeneous Dirichlet data.

Presets
-------
klein_gordon
    a = 0, beta = 0, gamma = 0, f(x) = x; u0 = sin(pi z / L), u1 = 0.  The
    limit equation u_tt - u_zz = u has the mode solution
    cos(omega t) sin(pi z / L) with omega^2 = (pi/L)^2 - 1.
sine_gordon
    As above with f(x) = eta sin x, eta = 1.
relay
    f(x) = sign(x), filled in to [-1, 1] at x = 0.
viscous_plap
    a = 1, beta = 1, gamma = 0.5, f(x) = x, p = 3.
zero
    Zero data and zero forcing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from evoinclusion import operators
from evoinclusion.forcing import ForcingEnvelope, named_forcing
from evoinclusion.grid import GridFunction, SpatialGrid
from evoinclusion.operators import ViscositySpec

PRESETS = ("klein_gordon", "sine_gordon", "relay", "viscous_plap", "zero")
INITIAL_KINDS = ("sine_mode", "gaussian", "zero")


def parse_initial(text: str) -> Tuple:
    """Parse ``zero``, ``sine_mode:k[:amp]`` or ``gaussian:center:width[:amp]``."""
    parts = [s.strip() for s in str(text).split(":")]
    kind, args = parts[0], parts[1:]
    try:
        if kind == "zero" and not args:
            return ("zero",)
        if kind == "sine_mode" and 1 <= len(args) <= 2:
            return ("sine_mode", int(args[0]), float(args[1]) if len(args) > 1 else 1.0)
        if kind == "gaussian" and 2 <= len(args) <= 3:
            amp = float(args[2]) if len(args) > 2 else 1.0
            return ("gaussian", float(args[0]), float(args[1]), amp)
    except ValueError:
        pass
    raise ValueError(
        f"bad initial profile {text!r}; expected zero, sine_mode:k[:amp] "
        "or gaussian:center:width[:amp]"
    )


def format_initial(spec: Tuple) -> str:
    return ":".join(str(x) for x in spec)


def initial_values(spec: Tuple, grid: SpatialGrid) -> GridFunction:
    z = grid.nodes
    kind = spec[0]
    if kind == "zero":
        vals = np.zeros(grid.n)
    elif kind == "sine_mode":
        _, k, amp = spec
        vals = amp * np.sin(k * np.pi * z / grid.L)
    elif kind == "gaussian":
        _, c, w, amp = spec
        if not w > 0:
            raise ValueError("gaussian width must be positive")
        vals = amp * np.exp(-0.5 * ((z - c) / w) ** 2)
    else:
        raise ValueError(f"unknown initial profile kind {kind!r}")
    return GridFunction(vals, grid)


@dataclass(frozen=True)
class Scenario:
    name: str
    L: float
    n: int
    vspec: ViscositySpec
    env: ForcingEnvelope
    u0: Tuple = ("zero",)
    u1: Tuple = ("zero",)
    expected: Optional[Callable] = None
    # potential P(u) with total energy kinetic + elastic - P(u); None if unknown
    potential: Optional[Callable] = field(default=None, repr=False)
    params: dict = field(default_factory=dict, compare=False)

    @property
    def p(self) -> float:
        return self.vspec.p

    def grid(self) -> SpatialGrid:
        return SpatialGrid(self.L, self.n, self.vspec.p)

    def initial(self):
        g = self.grid()
        return initial_values(self.u0, g), initial_values(self.u1, g)

    def check(self, times=(0.0, 0.5, 1.0)) -> None:
        """Sampled checks of a >= 0, beta >= 0 and the envelope hypotheses."""
        g = self.grid()
        self.vspec.check(g, times)
        self.env.check(g, times)
        u0, u1 = self.initial()
        for name, y in (("u0", u0), ("u1", u1)):
            if not np.all(np.isfinite(y.values)):
                raise ValueError(f"{name} is not finite")


def _kg_expected(L):
    omega = math.sqrt((math.pi / L) ** 2 - 1.0)

    def expected(t, z):
        return math.cos(omega * t) * np.sin(math.pi * np.asarray(z) / L)

    expected.omega = omega
    return expected


def preset(name: str, **overrides) -> Scenario:
    """Build a named scenario.

    Recognized overrides: L, n, p, gamma, eta, u0, u1 (profiles as tuples or
    strings accepted by ``parse_initial``).
    """
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}")
    unknown = set(overrides) - {"L", "n", "p", "gamma", "eta", "u0", "u1"}
    if unknown:
        raise ValueError(f"unknown preset override(s): {', '.join(sorted(unknown))}")
    L = float(overrides.get("L", 1.0))
    n = int(overrides.get("n", 63))
    eta = float(overrides.get("eta", 1.0))
    expected = None
    potential = None
    if name == "klein_gordon":
        p = overrides.get("p", 2.0)
        gamma = overrides.get("gamma", 0.0)
        vspec = ViscositySpec.constant(0.0, 0.0, p)
        env = named_forcing("identity", gamma=gamma)
        u0, u1 = ("sine_mode", 1, 1.0), ("zero",)
        if gamma == 0.0 and (math.pi / L) ** 2 > 1.0:
            expected = _kg_expected(L)
        potential = lambda U, h: 0.5 * h * np.sum(U * U, axis=-1)
    elif name == "sine_gordon":
        p = overrides.get("p", 2.0)
        gamma = overrides.get("gamma", 0.0)
        vspec = ViscositySpec.constant(0.0, 0.0, p)
        env = named_forcing("sine_gordon", eta=eta, gamma=gamma)
        u0, u1 = ("sine_mode", 1, 1.0), ("zero",)
        potential = lambda U, h: -eta * h * np.sum(np.cos(U), axis=-1)
    elif name == "relay":
        p = overrides.get("p", 2.0)
        gamma = overrides.get("gamma", 0.0)
        vspec = ViscositySpec.constant(0.0, 0.0, p)
        env = named_forcing("relay", gamma=gamma)
        u0, u1 = ("sine_mode", 1, 1.0), ("zero",)
    elif name == "viscous_plap":
        p = overrides.get("p", 3.0)
        gamma = overrides.get("gamma", 0.5)
        vspec = ViscositySpec.constant(1.0, 1.0, p)
        env = named_forcing("identity", gamma=gamma)
        u0, u1 = ("sine_mode", 1, 1.0), ("zero",)
    else:
        p = overrides.get("p", 2.0)
        gamma = overrides.get("gamma", 0.0)
        vspec = ViscositySpec.constant(0.0, 0.0, p)
        env = named_forcing("zero", gamma=gamma)
        u0, u1 = ("zero",), ("zero",)
    if "u0" in overrides:
        u0 = overrides["u0"] if isinstance(overrides["u0"], tuple) else parse_initial(overrides["u0"])
        expected = None
    if "u1" in overrides:
        u1 = overrides["u1"] if isinstance(overrides["u1"], tuple) else parse_initial(overrides["u1"])
        expected = None
    params = {"L": L, "n": n, "p": float(p), "gamma": float(gamma), "eta": eta,
              "u0": format_initial(u0), "u1": format_initial(u1)}
    sc = Scenario(name, L, n, vspec, env, u0, u1, expected, potential, params)
    sc.check()
    return sc


def reference_error(traj, scenario: Scenario) -> float:
    """max_k h_norm(u_k - expected(t_k, .))."""
    if scenario.expected is None:
        raise ValueError(f"scenario {scenario.name!r} has no closed-form reference")
    z = traj.grid.nodes
    ref = np.stack([scenario.expected(t, z) for t in traj.t])
    d = traj.u - ref
    return float(np.max(np.sqrt(traj.grid.h * np.sum(d * d, axis=1))))


def total_energy(traj, scenario: Scenario) -> np.ndarray:
    """kinetic + elastic - potential along the trajectory (conserved by the
    unregularized smooth presets)."""
    if scenario.potential is None:
        raise ValueError(f"scenario {scenario.name!r} has no potential")
    g = traj.grid
    kin = 0.5 * g.h * np.sum(traj.v * traj.v, axis=1)
    ela = 0.5 * operators.elastic_form(traj.u, g)
    return kin + ela - scenario.potential(traj.u, g.h)
