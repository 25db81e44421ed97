"""Crossing engine: exact probabilities, gradients, calibrations."""

import math
from fractions import Fraction

import numpy as np
import pytest

from losscert.crossing import (
    BoundVector,
    calibrate_berk_jones,
    calibrate_dkw,
    calibrate_truncated_bj,
    mc_noncrossing_oracle,
    noncrossing_gradient,
    noncrossing_probability,
)
from losscert.errors import CalibrationError


def closed_form_n2(l1, l2):
    # P(U_(1) >= l1, U_(2) >= l2) = 1 - 2 l1 - l2^2 + 2 l1 l2, derived by hand
    return 1.0 - 2.0 * l1 - l2**2 + 2.0 * l1 * l2


def exact_rational_probability(levels):
    """Independent oracle: the same volume in exact rational arithmetic."""
    fracs = [Fraction(v).limit_denominator(10**9) for v in levels]
    n = len(fracs)
    fact = [Fraction(1)]
    for k in range(1, n + 1):
        fact.append(fact[-1] * k)
    V = [Fraction(1)] + [Fraction(0)] * n
    prev = Fraction(0)
    for j, t in enumerate(list(fracs) + [Fraction(1)], start=1):
        d = t - prev
        dk = [Fraction(1)]
        for k in range(1, n + 1):
            dk.append(dk[-1] * d)
        V = [
            sum(V[i - k] * dk[k] / fact[k] for k in range(i + 1))
            for i in range(n + 1)
        ]
        prev = t
        if j <= n:
            for i in range(j, n + 1):
                V[i] = Fraction(0)
    return V[n] * fact[n], [float(q) for q in fracs]


class TestNoncrossingProbability:
    def test_n1(self):
        assert noncrossing_probability([0.3]) == pytest.approx(0.7, abs=1e-15)

    def test_all_zeros(self):
        for n in (1, 4, 17):
            assert noncrossing_probability(np.zeros(n)) == pytest.approx(1.0, abs=1e-13)

    def test_n2_closed_form(self):
        assert noncrossing_probability([0.2, 0.5]) == pytest.approx(0.55, abs=1e-12)
        rng = np.random.default_rng(0)
        for _ in range(50):
            l1, l2 = np.sort(rng.uniform(0, 1, 2))
            got = noncrossing_probability([l1, l2])
            assert got == pytest.approx(closed_form_n2(l1, l2), abs=1e-12)

    def test_against_exact_rational(self):
        rng = np.random.default_rng(1)
        for trial in range(10):
            n = int(rng.integers(3, 30))
            shape = trial % 3
            if shape == 0:
                L = np.maximum.accumulate(rng.uniform(0, 0.9, n) * np.arange(1, n + 1) / n)
            elif shape == 1:  # one large late jump
                L = np.concatenate([np.zeros(n - 1), [rng.uniform(0.3, 0.95)]])
            else:  # heavy ties
                L = np.sort(np.round(rng.uniform(0, 0.5, n), 1))
            exact, used = exact_rational_probability(L)
            got = noncrossing_probability(np.asarray(used))
            assert got == pytest.approx(float(exact), rel=1e-11, abs=1e-250)

    def test_matches_mc_oracle(self):
        rng = np.random.default_rng(2)
        for n in (5, 10, 50):
            L = np.maximum.accumulate(np.sort(rng.uniform(0, 0.8, n)) * 0.8)
            exact = noncrossing_probability(L)
            est, se = mc_noncrossing_oracle(L, 200_000, seed=n)
            assert abs(exact - est) <= 3.0 * max(se, 1e-9)

    def test_monotone_in_each_coordinate(self):
        rng = np.random.default_rng(3)
        L = np.maximum.accumulate(np.sort(rng.uniform(0.0, 0.6, 12)))
        base = noncrossing_probability(L)
        for i in range(12):
            bumped = L.copy()
            bumped[i:] = np.maximum(bumped[i:], bumped[i] + 0.02)
            assert noncrossing_probability(bumped) <= base + 1e-12

    def test_ties_are_legal(self):
        L = np.array([0.2, 0.2, 0.2, 0.5, 0.5])
        exact, used = exact_rational_probability(L)
        assert noncrossing_probability(L) == pytest.approx(float(exact), rel=1e-12)

    def test_rejects_invalid(self):
        with pytest.raises(ValueError):
            noncrossing_probability([0.5, 0.2])
        with pytest.raises(ValueError):
            noncrossing_probability([-0.1, 0.2])
        with pytest.raises(ValueError):
            noncrossing_probability([0.1, 1.2])

    def test_bound_vector_type(self):
        bv = BoundVector(L=np.array([0.1, 0.4]), n=2, delta=0.05, method="custom")
        assert noncrossing_probability(bv) == pytest.approx(
            closed_form_n2(0.1, 0.4), abs=1e-12
        )


class TestNoncrossingGradient:
    def test_n2_hand_derived(self):
        grad = noncrossing_gradient([0.2, 0.5])
        # dP/dL1 = -2 (1 - L2), dP/dL2 = -2 (L2 - L1), by differentiating the closed form
        assert grad[0] == pytest.approx(-1.0, abs=1e-12)
        assert grad[1] == pytest.approx(-0.6, abs=1e-12)

    def test_n1_at_zero(self):
        assert noncrossing_gradient([0.0])[0] == pytest.approx(-1.0, abs=1e-12)

    def test_nonpositive_everywhere(self):
        rng = np.random.default_rng(4)
        for n in (1, 2, 7, 20):
            L = np.maximum.accumulate(np.sort(rng.uniform(0, 0.9, n)))
            assert np.all(noncrossing_gradient(L) <= 0.0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        h = 1e-6
        for n in (3, 8, 14, 20):
            # keep coordinates separated so +-h keeps the vector sorted
            L = np.linspace(0.05, 0.7, n) + rng.uniform(0, 0.2 / n, n)
            L = np.maximum.accumulate(L)
            grad = noncrossing_gradient(L)
            for i in range(n):
                up = L.copy()
                up[i] += h
                dn = L.copy()
                dn[i] -= h
                fd = (noncrossing_probability(up) - noncrossing_probability(dn)) / (2 * h)
                denom = max(abs(fd), 1e-9)
                assert abs(grad[i] - fd) / denom <= 1e-4


class TestCalibrations:
    def test_dkw_closed_formula(self):
        bv = calibrate_dkw(100, 0.05)
        radius = math.sqrt(math.log(2 / 0.05) / 200)
        assert abs(radius - 0.135811) < 1e-6
        idx = np.arange(1, 101)
        assert np.allclose(bv.L, np.maximum(0.0, idx / 100 - radius), atol=0)
        assert bv.L[49] == pytest.approx(0.364189, abs=1e-6)

    def test_dkw_clamps_low_indices(self):
        bv = calibrate_dkw(100, 0.05)
        assert bv.L[9] == 0.0

    def test_dkw_monotone_in_delta(self):
        l_small = calibrate_dkw(50, 0.01).L
        l_large = calibrate_dkw(50, 0.2).L
        assert np.all(l_small <= l_large)

    def test_dkw_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            calibrate_dkw(10, 0.0)
        with pytest.raises(ValueError):
            calibrate_dkw(10, 1.0)

    def test_bj_n1(self):
        bv = calibrate_berk_jones(1, 0.05, 1e-12)
        assert bv.L[0] == pytest.approx(0.05, abs=1e-9)

    def test_bj_probability_window(self):
        for n, delta in ((20, 0.1), (100, 0.05)):
            bv = calibrate_berk_jones(n, delta, 1e-9)
            p = noncrossing_probability(bv)
            assert 1 - delta <= p <= 1 - delta + 1e-6

    def test_bj_small_tail_level_is_feasible(self):
        from losscert.crossing import _bj_levels

        L = _bj_levels(40, 1e-12)
        assert noncrossing_probability(L) > 1 - 0.05

    def test_truncated_matches_full_without_window(self):
        full = calibrate_berk_jones(30, 0.1, 1e-9)
        trunc = calibrate_truncated_bj(30, 0.1, 0.0, 1.0, 1e-9)
        assert np.allclose(full.L, trunc.L, atol=1e-6)

    def test_truncated_structure(self):
        bv = calibrate_truncated_bj(100, 0.05, 0.5, 0.9)
        assert np.all(bv.L[:49] == 0.0)
        assert np.all(bv.L[90:] == bv.L[89])
        p = noncrossing_probability(bv)
        assert 0.95 <= p <= 0.95 + 1e-6

    def test_truncated_tighter_in_window(self):
        full = calibrate_berk_jones(100, 0.05)
        trunc = calibrate_truncated_bj(100, 0.05, 0.5, 0.9)
        assert np.all(trunc.L[49:90] > full.L[49:90])

    def test_truncated_empty_window_errors(self):
        with pytest.raises(ValueError, match="no order statistics"):
            calibrate_truncated_bj(10, 0.05, 0.01, 0.05)

    def test_calibrated_vectors_are_valid(self):
        for bv in (
            calibrate_dkw(37, 0.07),
            calibrate_berk_jones(37, 0.07),
            calibrate_truncated_bj(37, 0.07, 0.2, 0.8),
        ):
            assert bv.L[0] >= 0 and bv.L[-1] <= 1
            assert np.all(np.diff(bv.L) >= 0)
            assert noncrossing_probability(bv) >= 1 - 0.07


class TestMcOracle:
    def test_all_zeros(self):
        est, se = mc_noncrossing_oracle(np.zeros(5), 1000, seed=0)
        assert est == 1.0 and se == 0.0

    def test_deterministic_given_seed(self):
        L = np.array([0.1, 0.3, 0.5])
        a = mc_noncrossing_oracle(L, 50_000, seed=42)
        b = mc_noncrossing_oracle(L, 50_000, seed=42)
        assert a == b

    def test_rejects_no_trials(self):
        with pytest.raises(ValueError):
            mc_noncrossing_oracle(np.zeros(3), 0, seed=0)
