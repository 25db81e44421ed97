"""Core types: samples, order statistics, step CDFs, weight functions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from losscert.samples import (
    LossSamples,
    StepCdf,
    WeightFunction,
    order_statistics,
    step_inverse,
    weight_integral,
)


class TestLossSamples:
    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="no samples"):
            LossSamples(np.array([]))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            LossSamples(np.array([0.1, np.nan]))

    def test_nonneg_flag_enforced(self):
        with pytest.raises(ValueError):
            LossSamples(np.array([-0.5, 1.0]), nonneg=True)

    def test_support_max_must_cover(self):
        with pytest.raises(ValueError):
            LossSamples(np.array([0.5, 2.0]), support_max=1.0)

    def test_group_split(self):
        s = LossSamples(np.array([1.0, 2.0, 3.0]), group=("a", "b", "a"))
        parts = s.by_group()
        assert sorted(parts) == ["a", "b"]
        assert parts["a"].values.tolist() == [1.0, 3.0]


class TestOrderStatistics:
    def test_sorts(self):
        s = LossSamples(np.array([3.0, 1.0, 2.0]))
        assert order_statistics(s).sorted.tolist() == [1.0, 2.0, 3.0]

    def test_singleton(self):
        s = LossSamples(np.array([5.0]))
        assert order_statistics(s).sorted.tolist() == [5.0]

    def test_ties_kept(self):
        s = LossSamples(np.array([2.0, 2.0, 1.0]))
        assert order_statistics(s).sorted.tolist() == [1.0, 2.0, 2.0]


class TestStepCdf:
    def cdf(self):
        # 0 below 1.0; 0.5 on [1.0, 2.0); 1 at 2.0
        return StepCdf(breakpoints=np.array([1.0, 2.0]), levels=np.array([0.5, 1.0]))

    def test_eval(self):
        f = self.cdf()
        assert f(0.5) == 0.0
        assert f(1.0) == 0.5
        assert f(1.5) == 0.5
        assert f(2.0) == 1.0
        assert f(99.0) == 1.0

    def test_inverse_boundary_hits_level(self):
        assert step_inverse(self.cdf(), 0.5) == 1.0

    def test_inverse_next_jump(self):
        assert step_inverse(self.cdf(), 0.7) == 2.0

    def test_inverse_terminal_jump(self):
        # lower band with all L_i = 0, closed at B = 3
        f = StepCdf(breakpoints=np.array([1.0, 2.0, 3.0]), levels=np.array([0.0, 0.0, 1.0]))
        assert step_inverse(f, 0.2) == 3.0

    def test_inverse_unbounded_signal(self):
        f = StepCdf(
            breakpoints=np.array([1.0]),
            levels=np.array([0.4]),
            closed=False,
            jump_at=math.inf,
        )
        assert step_inverse(f, 0.9) == math.inf

    def test_inverse_rejects_bad_p(self):
        with pytest.raises(ValueError):
            self.cdf().inverse(0.0)
        with pytest.raises(ValueError):
            self.cdf().inverse(1.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            StepCdf(breakpoints=np.array([1.0, 1.0]), levels=np.array([0.5, 1.0]))
        with pytest.raises(ValueError):
            StepCdf(breakpoints=np.array([1.0, 2.0]), levels=np.array([0.9, 0.5]))
        with pytest.raises(ValueError):  # closed must end at 1
            StepCdf(breakpoints=np.array([1.0]), levels=np.array([0.8]))

    def test_inverse_monotone_and_galois(self):
        rng = np.random.default_rng(3)
        xs = np.sort(rng.uniform(0, 10, 8))
        lv = np.sort(rng.uniform(0, 1, 8))
        lv[-1] = 1.0
        f = StepCdf(breakpoints=xs, levels=lv)
        ps = np.linspace(0.01, 1.0, 97)
        inv = [f.inverse(p) for p in ps]
        assert all(a <= b for a, b in zip(inv, inv[1:]))
        for x in xs:
            assert f.inverse(f(x)) <= x or f(x) == 0.0


class TestWeightIntegral:
    def test_cvar_segment(self):
        # (1/(1-beta)) * (0.9 - 0.8) with beta = 0.75
        assert weight_integral(WeightFunction.cvar(0.75), 0.8, 0.9) == pytest.approx(0.4, abs=1e-14)

    def test_linear_segment(self):
        assert weight_integral(WeightFunction.linear(), 0.2, 0.6) == pytest.approx(0.16, abs=1e-14)

    def test_constant_unit_mass(self):
        assert weight_integral(WeightFunction.constant_one(), 0.0, 1.0) == 1.0

    def test_rejects_reversed(self):
        with pytest.raises(ValueError):
            weight_integral(WeightFunction.linear(), 0.6, 0.2)

    def test_unit_mass_kinds(self):
        for psi in (
            WeightFunction.constant_one(),
            WeightFunction.cvar(0.6),
            WeightFunction.interval_uniform(0.3, 0.8),
        ):
            assert psi.integral(0.0, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_smoothed_median_near_unit_mass(self):
        # Gaussian tails outside [0,1] leak below 1e-10 for these settings
        psi = WeightFunction.smoothed_median(0.5, 0.05)
        assert psi.integral(0.0, 1.0) == pytest.approx(1.0, abs=1e-10)

    @given(
        a=st.floats(0.0, 1.0),
        b=st.floats(0.0, 1.0),
        c=st.floats(0.0, 1.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_additivity(self, a, b, c):
        lo, mid, hi = sorted([a, b, c])
        for psi in (
            WeightFunction.constant_one(),
            WeightFunction.cvar(0.75),
            WeightFunction.interval_uniform(0.25, 0.75),
            WeightFunction.linear(),
            WeightFunction.smoothed_median(0.5, 0.01),
            WeightFunction.piecewise_poly([(0.0, 0.5, (1.0, -2.0)), (0.5, 1.0, (0.0, 2.0))]),
        ):
            whole = psi.integral(lo, hi)
            parts = psi.integral(lo, mid) + psi.integral(mid, hi)
            assert abs(whole - parts) < 1e-12

    def test_cumulative_matches_integral(self):
        edges = np.linspace(0, 1, 37)
        for psi in (
            WeightFunction.cvar(0.4),
            WeightFunction.smoothed_median(0.5, 0.02),
            WeightFunction.linear(),
            WeightFunction.piecewise_poly([(0.1, 0.9, (0.5, 1.0, -1.0))]),
        ):
            cum = psi.cumulative(edges)
            for k in range(36):
                assert cum[k + 1] - cum[k] == pytest.approx(
                    psi.integral(edges[k], edges[k + 1]), abs=1e-12
                )

    def test_positive_negative_split(self):
        psi = WeightFunction.piecewise_poly([(0.0, 1.0, (-1.0, 2.0))])  # 2p - 1
        pos, neg = psi.positive_negative_parts()
        assert pos.integral(0, 1) == pytest.approx(0.25, abs=1e-12)
        assert neg.integral(0, 1) == pytest.approx(0.25, abs=1e-12)
        grid = np.linspace(0, 1, 101)
        assert np.allclose(pos(grid) - neg(grid), psi(grid), atol=1e-10)
