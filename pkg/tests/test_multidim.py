"""Multivariate CDF banding: ecdf, radius, Frechet-Hoeffding combination."""

import math

import numpy as np
import pytest

from losscert.bands import discretize_cdf
from losscert.multidim import (
    build_marginal_bands,
    multidim_band_query,
    multidim_dkw_radius,
    multidim_ecdf,
)


class TestEcdf:
    def test_query_below_all(self):
        pts = np.array([[0.5, 0.5], [0.8, 0.2]])
        assert multidim_ecdf(pts, [0.0, 0.0]) == 0.0

    def test_query_above_all(self):
        pts = np.array([[0.5, 0.5], [0.8, 0.2]])
        assert multidim_ecdf(pts, [1.0, 1.0]) == 1.0

    def test_half_dominated(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0]])
        assert multidim_ecdf(pts, [0.5, 0.5]) == 0.5

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            multidim_ecdf(np.array([[0.1, 0.2]]), [0.1, 0.2, 0.3])


class TestRadius:
    def test_hand_value(self):
        # sqrt(ln(2 * 101 / 0.05) / 200)
        assert multidim_dkw_radius(100, 2, 0.05) == pytest.approx(0.20376, abs=1e-5)

    def test_shrinks_with_n(self):
        assert multidim_dkw_radius(1000, 2, 0.05) < multidim_dkw_radius(100, 2, 0.05)


class TestBandQuery:
    def test_frechet_part_with_exact_marginals(self):
        # marginals known exactly: F1 = 0.7, F2 = 0.8 at the query point;
        # two wide-radius points make the ecdf constraints vacuous
        marginals = [discretize_cdf(lambda x: x, 0.0, 1.0, 10_000) for _ in range(2)]
        pts = np.array([[0.9, 0.9], [0.95, 0.95]])
        iv = multidim_band_query(pts, marginals, 0.05, [0.7, 0.8])
        assert iv.lo == pytest.approx(0.5, abs=1e-3)  # max(0, 0.7 + 0.8 - 1)
        assert iv.hi == pytest.approx(0.7, abs=1e-3)  # min(0.7, 0.8)

    def test_lo_le_hi_on_grid(self):
        rng = np.random.default_rng(0)
        pts = rng.random((100, 2))
        bands = build_marginal_bands(pts, 0.05, "dkw", support_max=[1.0, 1.0])
        for x in np.linspace(0.05, 0.95, 7):
            for y in np.linspace(0.05, 0.95, 7):
                iv = multidim_band_query(pts, bands, 0.05, [x, y])
                assert iv.lo <= iv.hi
                assert 0.0 <= iv.lo and iv.hi <= 1.0

    def test_interval_shrinks_with_more_data(self):
        rng = np.random.default_rng(1)
        pts_small = rng.random((50, 2))
        pts_big = rng.random((2000, 2))
        bands_small = build_marginal_bands(pts_small, 0.05, "dkw", support_max=[1.0, 1.0])
        bands_big = build_marginal_bands(pts_big, 0.05, "dkw", support_max=[1.0, 1.0])
        q = [0.5, 0.6]
        iv_small = multidim_band_query(pts_small, bands_small, 0.05, q)
        iv_big = multidim_band_query(pts_big, bands_big, 0.05, q)
        assert iv_big.width < iv_small.width

    def test_budget_flag(self):
        rng = np.random.default_rng(2)
        pts = rng.random((200, 2))
        bands_two = build_marginal_bands(pts, 0.05, "dkw", budget="two_delta", support_max=[1, 1])
        bands_one = build_marginal_bands(pts, 0.05, "dkw", budget="one_delta", support_max=[1, 1])
        q = [0.4, 0.7]
        iv_two = multidim_band_query(pts, bands_two, 0.05, q, budget="two_delta")
        iv_one = multidim_band_query(pts, bands_one, 0.05, q, budget="one_delta")
        # pre-splitting the budget costs width but buys 1 - delta overall
        assert iv_one.width >= iv_two.width - 1e-12

    def test_coverage_small_sim(self):
        # independent uniforms: true joint CDF is x*y
        rng = np.random.default_rng(3)
        trials = 100
        delta = 0.05
        grid = np.linspace(0.05, 0.95, 7)
        hits = 0
        for _ in range(trials):
            pts = rng.random((100, 2))
            bands = build_marginal_bands(pts, delta, "dkw", support_max=[1.0, 1.0])
            ok = True
            for x in grid:
                for y in grid:
                    iv = multidim_band_query(pts, bands, delta, [x, y])
                    if not (iv.lo - 1e-12 <= x * y <= iv.hi + 1e-12):
                        ok = False
            hits += ok
        coverage = hits / trials
        se = math.sqrt(max(coverage * (1 - coverage), 1e-9) / trials)
        assert coverage >= 1 - 2 * delta - 3 * se
