import math

import numpy as np
import pytest

from evoinclusion.grid import h_norm, x_norm
from evoinclusion.operators import RegularizerSpec
from evoinclusion.scenarios import (
    PRESETS,
    format_initial,
    initial_values,
    parse_initial,
    preset,
    reference_error,
    total_energy,
)
from evoinclusion.stepper import SolverConfig, solve_trajectory


def kg_run(tau, eps=1e-4, n=31, b=1.0, name="klein_gordon"):
    sc = preset(name, n=n)
    u0, u1 = sc.initial()
    return sc, solve_trajectory(u0, u1, SolverConfig(tau, b, RegularizerSpec(eps, 2.0)),
                                sc.vspec, sc.env)


class TestPresets:
    @pytest.mark.parametrize("name", PRESETS)
    def test_construct_and_check(self, name):
        sc = preset(name)
        sc.check(times=(0.0, 0.3, 1.0))
        u0, u1 = sc.initial()
        assert math.isfinite(x_norm(u0)) and math.isfinite(h_norm(u1))

    def test_unknown_lists_names(self):
        with pytest.raises(ValueError) as exc:
            preset("burgers")
        for name in PRESETS:
            assert name in str(exc.value)

    def test_unknown_override(self):
        with pytest.raises(ValueError, match="viscosity"):
            preset("relay", viscosity=2)

    def test_zero(self):
        sc = preset("zero")
        u0, u1 = sc.initial()
        assert not np.any(u0.values) and not np.any(u1.values)
        lo, hi = sc.env.interval(0.0, sc.grid().nodes, np.linspace(-3, 3, sc.n))
        assert not np.any(lo) and not np.any(hi)

    def test_klein_gordon(self):
        sc = preset("klein_gordon")
        assert sc.expected.omega ** 2 == pytest.approx(math.pi**2 - 1, rel=1e-14)
        assert sc.expected.omega ** 2 == pytest.approx(8.8696, abs=1e-4)
        z = sc.grid().nodes
        np.testing.assert_array_equal(sc.expected(0.0, z), sc.initial()[0].values)
        assert sc.p == 2.0 and sc.env.gamma == 0.0
        np.testing.assert_array_equal(sc.vspec.a_edges(0.5, sc.grid()), 0.0)

    def test_expected_dropped_for_other_data(self):
        assert preset("klein_gordon", u0="gaussian:0.5:0.1").expected is None
        assert preset("klein_gordon", gamma=0.3).expected is None

    def test_viscous_plap(self):
        sc = preset("viscous_plap")
        assert sc.p == 3.0 and sc.env.gamma == 0.5
        np.testing.assert_array_equal(sc.vspec.a_edges(0.0, sc.grid()), 1.0)
        np.testing.assert_array_equal(sc.vspec.beta_nodes(sc.grid()), 1.0)

    def test_relay_and_sine_gordon_forcing(self):
        z = preset("relay").grid().nodes
        lo, hi = preset("relay").env.interval(0.0, z[:3], np.array([-0.5, 0.0, 2.0]))
        np.testing.assert_array_equal(lo, [-1, -1, 1])
        np.testing.assert_array_equal(hi, [-1, 1, 1])
        sg = preset("sine_gordon", eta=2.0)
        lo, hi = sg.env.interval(0.0, z[:1], np.array([1.0]))
        assert lo[0] == hi[0] == pytest.approx(2 * math.sin(1.0))

    def test_overrides(self):
        sc = preset("relay", L=2.0, n=9, p=3.0, gamma=0.25, u1="sine_mode:2:0.5")
        assert (sc.L, sc.n, sc.p, sc.env.gamma) == (2.0, 9, 3.0, 0.25)
        assert sc.params["u1"] == "sine_mode:2:0.5"


class TestInitial:
    @pytest.mark.parametrize("text,spec", [
        ("zero", ("zero",)),
        ("sine_mode:3", ("sine_mode", 3, 1.0)),
        ("sine_mode:2:0.5", ("sine_mode", 2, 0.5)),
        ("gaussian:0.5:0.1", ("gaussian", 0.5, 0.1, 1.0)),
        ("gaussian:0.3:0.05:2", ("gaussian", 0.3, 0.05, 2.0)),
    ])
    def test_parse_round_trip(self, text, spec):
        assert parse_initial(text) == spec
        assert parse_initial(format_initial(spec)) == spec

    @pytest.mark.parametrize("text", ["", "sine_mode", "sine_mode:x", "gauss:1:2", "zero:1",
                                      "gaussian:1"])
    def test_parse_rejects(self, text):
        with pytest.raises(ValueError):
            parse_initial(text)

    def test_values(self):
        g = preset("zero", n=9, L=2.0).grid()
        np.testing.assert_allclose(initial_values(("sine_mode", 2, 3.0), g).values,
                                   3 * np.sin(2 * np.pi * g.nodes / 2.0))
        gv = initial_values(("gaussian", 1.0, 0.2, 1.0), g).values
        assert np.argmax(gv) == 4 and gv[4] == 1.0
        with pytest.raises(ValueError):
            initial_values(("gaussian", 1.0, 0.0, 1.0), g)


class TestReference:
    def test_sampled_expected_has_zero_error(self):
        sc, tr = kg_run(0.1, b=0.3)
        z = tr.grid.nodes
        for k, t in enumerate(tr.t):
            tr.u[k] = sc.expected(t, z)
        assert reference_error(tr, sc) == 0.0

    def test_missing_expected(self):
        sc, tr = kg_run(0.1, b=0.2, name="sine_gordon")
        with pytest.raises(ValueError):
            reference_error(tr, sc)
        with pytest.raises(ValueError):
            total_energy(tr, preset("relay"))

    def test_error_decreases_with_tau(self):
        errs = [reference_error(kg_run(tau)[1], preset("klein_gordon", n=31))
                for tau in (8e-3, 4e-3, 2e-3)]
        assert errs[0] > errs[1] > errs[2]

    @pytest.mark.parametrize("name", ["klein_gordon", "sine_gordon"])
    def test_energy_drift_improves_under_refinement(self, name):
        """Drift max_t |E(t) - E(0)| / |E(0)| obeys drift <= C (tau + eps), C calibrated."""
        drifts = {}
        for tau in (4e-3, 2e-3, 1e-3):
            for eps in (1e-3, 1e-4):
                sc, tr = kg_run(tau, eps=eps, name=name)
                e = total_energy(tr, sc)
                drifts[(tau, eps)] = float(np.max(np.abs(e - e[0]))) / abs(e[0])
        for eps in (1e-3, 1e-4):
            seq = [drifts[(tau, eps)] for tau in (4e-3, 2e-3, 1e-3)]
            assert seq[0] > seq[1] > seq[2]
        for tau in (4e-3, 2e-3, 1e-3):
            assert drifts[(tau, 1e-4)] < drifts[(tau, 1e-3)]
        C = {"klein_gordon": 10.5, "sine_gordon": 7.5}[name]  # calibrated at n = 31
        for (tau, eps), d in drifts.items():
            assert d <= C * (tau + eps)
