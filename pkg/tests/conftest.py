"""Shared fixtures: known distributions, numeric oracles, enclosing bands."""

import math

import numpy as np
import pytest
from scipy.stats import beta as beta_dist

from losscert.bands import lower_band, upper_band
from losscert.crossing import BoundVector
from losscert.samples import CdfBand, OrderStats


class KnownDist:
    """A distribution with callable cdf/quantile and exact support top."""

    def __init__(self, name, cdf, quantile, support_max, support_min=0.0):
        self.name = name
        self.cdf = cdf
        self.quantile = quantile
        self.support_max = support_max
        self.support_min = support_min

    def sample(self, rng, n):
        return self.quantile(rng.random(n))


def uniform_dist():
    return KnownDist("uniform", lambda x: np.clip(x, 0, 1), lambda p: np.asarray(p, dtype=float), 1.0)


def beta25_dist():
    frozen = beta_dist(2, 5)
    return KnownDist("beta(2,5)", lambda x: frozen.cdf(np.clip(x, 0, 1)), frozen.ppf, 1.0)


def shifted_uniform_dist():
    # support [0.1, 1.0]; strictly positive losses for the eps > 1 measures
    return KnownDist(
        "uniform[0.1,1]",
        lambda x: np.clip((np.asarray(x, dtype=float) - 0.1) / 0.9, 0, 1),
        lambda p: 0.1 + 0.9 * np.asarray(p, dtype=float),
        1.0,
        support_min=0.1,
    )


def oracle_measures(quantile, grid=200_001):
    """High-resolution midpoint-rule values of the dispersion measures."""
    p = (np.arange(grid) + 0.5) / grid
    q = np.asarray(quantile(p), dtype=np.float64)
    mu = float(q.mean())
    out = {"mean": mu}
    out["gini"] = float(2 * np.mean(p * q) / mu - 1.0)
    for nu in (1.5, 2.0, 4.0):
        out[f"ext_gini_{nu:g}"] = float(1.0 - nu * np.mean((1 - p) ** (nu - 1) * q) / mu)
    for eps in (0.25, 0.5, 2.0):
        ede = float(np.mean(q ** (1 - eps)) ** (1 / (1 - eps)))
        out[f"atkinson_{eps:g}"] = 1.0 - ede / mu
    with np.errstate(divide="ignore"):
        logq = np.log(q)
    out["atkinson_1"] = float(1.0 - math.exp(np.mean(logq)) / mu) if np.all(q > 0) else 1.0
    out["hoover"] = float(np.mean(np.abs(q - mu)) / (2 * mu))
    for alpha in (0.5, 2.0, 3.0):
        out[f"ge_{alpha:g}"] = float(np.mean((q / mu) ** alpha - 1.0) / (alpha * (alpha - 1)))
    out["lorenz"] = lambda t: float(np.mean(q * (p <= t)) / mu)
    return out


def random_enclosing_band(rng, dist, n_range=(20, 80), delta=0.1):
    """A valid band guaranteed to enclose the known CDF.

    Lower validity needs L_i <= F(X_(i)); upper validity needs
    L_j <= 1 - F(X_(n-j+1)).  Both caps are nondecreasing in the index, so
    scaling them by uniforms and taking a running max keeps the vector
    sorted and inside the caps.
    """
    n = int(rng.integers(*n_range))
    xs = np.sort(dist.sample(rng, n))
    f_at = np.asarray(dist.cdf(xs), dtype=np.float64)
    caps = np.minimum(f_at, 1.0 - f_at[::-1])
    L = np.maximum.accumulate(caps * rng.uniform(0.0, 1.0, n))
    L = np.minimum(L, caps)
    stats = OrderStats(sorted=xs, n=n)
    bv = BoundVector(L=L, n=n, delta=delta, method="optimized")
    return CdfBand(
        lower=lower_band(stats, bv, dist.support_max),
        upper=upper_band(stats, bv),
        delta=delta,
        method="optimized",
        order_stats=stats,
        L=bv,
    )


@pytest.fixture(scope="session")
def uniform_plugin():
    from losscert.bands import discretize_cdf

    return discretize_cdf(lambda x: x, 0.0, 1.0, 10_000)


@pytest.fixture(scope="session")
def exponential_plugin():
    from losscert.bands import discretize_cdf

    return discretize_cdf(lambda x: 1.0 - np.exp(-np.asarray(x, dtype=float)), 0.0, 20.0, 10_000)
