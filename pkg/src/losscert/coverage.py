"""Monte Carlo validation of band coverage against known distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .bands import build_band
from .samples import LossSamples


@dataclass(frozen=True)
class DistSpec:
    """A sampling distribution with a known CDF for coverage checks."""

    name: str
    sample: Callable
    cdf: Callable
    support: Tuple[float, float]

    @classmethod
    def uniform(cls) -> "DistSpec":
        return cls("uniform", lambda rng, n: rng.random(n), lambda x: np.clip(x, 0.0, 1.0), (0.0, 1.0))

    @classmethod
    def beta(cls, a: float, b: float) -> "DistSpec":
        from scipy.stats import beta as beta_dist

        frozen = beta_dist(a, b)
        return cls(
            f"beta({a:g},{b:g})",
            lambda rng, n: rng.beta(a, b, n),
            lambda x: frozen.cdf(np.clip(x, 0.0, 1.0)),
            (0.0, 1.0),
        )

    @classmethod
    def exponential_truncated(cls, lam: float, B: float) -> "DistSpec":
        z = 1.0 - math.exp(-lam * B)

        def sample(rng, n):
            u = rng.random(n)
            return -np.log1p(-u * z) / lam

        def cdf(x):
            return np.clip((1.0 - np.exp(-lam * np.clip(x, 0.0, B))) / z, 0.0, 1.0)

        return cls(f"exponential({lam:g})|[0,{B:g}]", sample, cdf, (0.0, B))

    @classmethod
    def discrete(cls, values: Sequence[float], probs: Optional[Sequence[float]] = None) -> "DistSpec":
        vals = np.asarray(sorted(values), dtype=np.float64)
        p = np.full(vals.size, 1.0 / vals.size) if probs is None else np.asarray(probs, dtype=np.float64)
        if p.size != vals.size or abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
            raise ValueError("discrete probabilities must be a distribution over the values")
        cum = np.cumsum(p)

        def sample(rng, n):
            return vals[np.searchsorted(cum, rng.random(n), side="right")]

        def cdf(x):
            idx = np.searchsorted(vals, np.asarray(x, dtype=np.float64), side="right")
            out = np.concatenate([[0.0], cum])[idx]
            return out

        lo = float(vals[0]) - 1.0
        return cls("discrete", sample, cdf, (lo, float(vals[-1])))

    def make(self, rng: np.random.Generator, n: int) -> LossSamples:
        values = np.asarray(self.sample(rng, n), dtype=np.float64)
        return LossSamples(values, support_max=self.support[1], nonneg=self.support[0] >= -1e-12)


def parse_dist_spec(spec: dict) -> DistSpec:
    kind = spec.get("kind")
    if kind == "uniform":
        return DistSpec.uniform()
    if kind == "beta":
        return DistSpec.beta(float(spec["a"]), float(spec["b"]))
    if kind == "exponential":
        return DistSpec.exponential_truncated(float(spec.get("lam", 1.0)), float(spec["B"]))
    if kind == "discrete":
        return DistSpec.discrete(spec["values"], spec.get("probs"))
    raise ValueError(f"unknown distribution kind: {kind}")


def simulate_coverage(
    dist: DistSpec,
    method: str,
    delta: float,
    n: int,
    trials: int,
    seed: int,
    grid_points: int = 1001,
    **band_options,
) -> dict:
    """Fraction of trials whose band encloses the true CDF on a grid.

    Deterministic given the seed; the grid spans the declared support.
    Returns {coverage, std_error, trials, ...} (binomial standard error).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = dist.support
    grid = np.linspace(lo, hi, grid_points)
    truth = np.asarray(dist.cdf(grid), dtype=np.float64)
    hits = 0
    for _ in range(trials):
        samples = dist.make(rng, n)
        band = build_band(samples, method, delta, **band_options)
        ok = bool(
            np.all(band.lower(grid) <= truth + 1e-9)
            and np.all(truth <= band.upper(grid) + 1e-9)
        )
        hits += ok
    coverage = hits / trials
    se = math.sqrt(coverage * (1.0 - coverage) / trials)
    return {
        "distribution": dist.name,
        "method": method,
        "delta": delta,
        "n": n,
        "trials": trials,
        "seed": seed,
        "coverage": coverage,
        "std_error": se,
    }
