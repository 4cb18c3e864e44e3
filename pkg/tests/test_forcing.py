import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evoinclusion.forcing import (
    STRATEGIES,
    ForcingEnvelope,
    SelectionStrategy,
    envelope_from_piecewise,
    growth_bound_check,
    growth_coefficient,
    named_forcing,
    select,
    select_parts,
)
from evoinclusion.grid import SpatialGrid, h_norm

G5 = SpatialGrid(1.0, 5)


def fn(g, vals):
    return g.function(np.asarray(vals, dtype=float))


class TestEnvelopes:
    def test_relay_fill_in(self):
        env = named_forcing("relay")
        x = np.array([-2.0, -1e-300, 0.0, 1e-300, 3.0])
        lo, hi = env.interval(0.0, G5.nodes, x)
        np.testing.assert_array_equal(lo, [-1, -1, -1, 1, 1])
        np.testing.assert_array_equal(hi, [-1, -1, 1, 1, 1])

    def test_continuous_piecewise_is_degenerate(self):
        env = envelope_from_piecewise(
            [((-math.inf, 1.0), lambda x: 2 * x), ((1.0, math.inf), lambda x: x + 1)]
        )
        x = np.linspace(-3, 3, 61)
        lo, hi = env.interval(0.0, np.zeros_like(x), x)
        np.testing.assert_array_equal(lo, hi)
        np.testing.assert_allclose(lo, np.where(x <= 1, 2 * x, x + 1))

    def test_sine_gordon_degenerate(self):
        env = named_forcing("sine_gordon", eta=0.7)
        x = np.linspace(-5, 5, 11)
        lo, hi = env.interval(0.3, x, x)
        np.testing.assert_array_equal(lo, hi)
        np.testing.assert_allclose(lo, 0.7 * np.sin(x))

    def test_sine_gordon_needs_positive_eta(self):
        with pytest.raises(ValueError):
            named_forcing("sine_gordon", eta=0.0)

    def test_unknown_named(self):
        with pytest.raises(ValueError, match="identity"):
            named_forcing("cubic")

    @pytest.mark.parametrize("branches,jumps,msg", [
        ([], (), "at least one"),
        ([((0.0, math.inf), lambda x: x)], (), "cover"),
        ([((-math.inf, 0.0), lambda x: x), ((1.0, math.inf), lambda x: x)], (), "gap"),
        ([((-math.inf, 0.0), lambda x: -1.0), ((0.0, math.inf), lambda x: 1.0)], (), "not declared"),
        ([((-math.inf, 1.0), lambda x: x), ((0.0, math.inf), lambda x: -x)], (), "disagree"),
        ([((-math.inf, math.inf), lambda x: x), ((2.0, 2.0), lambda x: x)], (), "empty"),
    ])
    def test_piecewise_validation(self, branches, jumps, msg):
        with pytest.raises(ValueError, match=msg):
            envelope_from_piecewise(branches, jumps)

    def test_negative_gamma(self):
        with pytest.raises(ValueError):
            named_forcing("identity", gamma=-0.1)

    def test_missing_growth(self):
        with pytest.raises(ValueError):
            ForcingEnvelope(lambda t, z, x: x, lambda t, z, x: x)

    def test_check_catches_misordered_and_fast_growth(self):
        bad_order = ForcingEnvelope(lambda t, z, x: 1 + 0 * x, lambda t, z, x: 0 * x, 0.0,
                                    lambda t, z: 5 + 0 * z)
        with pytest.raises(ValueError, match="ordered"):
            bad_order.check(G5)
        too_fast = ForcingEnvelope(lambda t, z, x: x ** 2, lambda t, z, x: x ** 2, 0.0,
                                   lambda t, z: 1 + 0 * z)
        with pytest.raises(ValueError, match="a_2"):
            too_fast.check(G5)

    @pytest.mark.parametrize("key", ["identity", "sine_gordon", "relay", "zero"])
    def test_named_pass_check(self, key):
        env = named_forcing(key, gamma=0.3)
        env.check(G5, times=(0.0, 1.0))
        x = np.linspace(-50, 50, 2001)
        lo, hi = env.interval(0.0, x, x)
        assert np.all(lo <= hi)


class TestSelect:
    def test_sign_at_zero(self):
        env = named_forcing("relay")
        u = G5.zeros()
        v = G5.zeros()
        expect = {"lower": -1.0, "upper": 1.0, "midpoint": 0.0, "closest_to_previous": 0.0}
        for kind, val in expect.items():
            g = select(0.0, u, v, None, env, SelectionStrategy(kind))
            np.testing.assert_array_equal(g.values, val)

    def test_closest_to_previous_clips(self):
        env = named_forcing("relay")
        prev = fn(G5, [0.3, -5.0, 5.0, 0.0, 0.9])
        g = select(0.0, G5.zeros(), G5.zeros(), prev, env, SelectionStrategy("closest_to_previous"))
        np.testing.assert_array_equal(g.values, [0.3, -1.0, 1.0, 0.0, 0.9])

    def test_gamma_term_only(self):
        g1 = SpatialGrid(1.0, 1)
        env = named_forcing("zero", gamma=2.0)
        g = select(0.0, g1.zeros(), fn(g1, [3.0]), None, env, SelectionStrategy())
        np.testing.assert_array_equal(g.values, [6.0])

    def test_default_strategy_midpoint(self):
        assert SelectionStrategy().kind == "midpoint"
        with pytest.raises(ValueError):
            SelectionStrategy("random")

    @given(st.sampled_from(STRATEGIES), st.integers(0, 2**32 - 1))
    def test_continuous_forcing_independent_of_strategy(self, kind, seed):
        rng = np.random.default_rng(seed)
        env = named_forcing("sine_gordon", eta=1.3, gamma=0.4)
        u, v, prev = (fn(G5, rng.standard_normal(5)) for _ in range(3))
        ref = select(0.2, u, v, None, env, SelectionStrategy("midpoint"))
        got = select(0.2, u, v, prev, env, SelectionStrategy(kind))
        np.testing.assert_array_equal(got.values, ref.values)

    @given(st.sampled_from(STRATEGIES), st.integers(0, 2**32 - 1), st.floats(0, 3))
    def test_containment_exact(self, kind, seed, gamma):
        rng = np.random.default_rng(seed)
        env = named_forcing("relay", gamma=gamma)
        u = np.where(rng.random(5) < 0.5, 0.0, rng.standard_normal(5))
        v = rng.standard_normal(5)
        prev = 3 * rng.standard_normal(5)
        s, g = select_parts(0.0, u, v, prev, env, SelectionStrategy(kind), G5.nodes)
        lo, hi = env.interval(0.0, G5.nodes, u)
        assert np.all(lo <= s) and np.all(s <= hi)
        assert np.all(lo + gamma * v <= g) and np.all(g <= hi + gamma * v)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            select(0.0, G5.zeros(), SpatialGrid(1.0, 4).zeros(), None, named_forcing("zero"),
                   SelectionStrategy())


class TestGrowth:
    def test_zero_data_margin(self):
        env = named_forcing("identity")
        chk = growth_bound_check(0.0, G5.zeros(), G5.zeros(), G5.zeros(), env)
        assert chk.passed
        assert chk.slack == pytest.approx(growth_coefficient(0.0, G5, env))

    @given(st.integers(0, 2**32 - 1), st.sampled_from(STRATEGIES))
    def test_relay_any_state(self, seed, kind):
        rng = np.random.default_rng(seed)
        env = named_forcing("relay")
        u, v = fn(G5, rng.standard_normal(5)), fn(G5, rng.standard_normal(5))
        g = select(0.0, u, v, None, env, SelectionStrategy(kind))
        assert h_norm(g) <= 1.0
        assert growth_bound_check(0.0, u, v, g, env).passed

    def test_linear_term_tight(self):
        env = named_forcing("zero", gamma=0.8)
        for scale in (1.0, 10.0, 1e4):
            v = fn(G5, scale * np.ones(5))
            g = select(0.0, G5.zeros(), v, None, env, SelectionStrategy())
            chk = growth_bound_check(0.0, G5.zeros(), v, g, env)
            assert chk.passed
            # |g| = gamma |v| while the bound is gamma (1 + |v|)
            assert chk.slack == pytest.approx(0.8, rel=1e-9)
