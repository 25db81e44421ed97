"""Certified bounds on dispersion and risk measures of nonnegative losses.

Every bound consumes one CdfBand, so a single band event certifies all
measures evaluated from it.  All integrals against band inverses are exact
finite sums over the band levels; there is no quadrature error.

Orientation: the lower band's inverse upper-bounds the true quantile
function, the upper band's inverse lower-bounds it.  Ratio measures pick
sides so that the quotient is maximized; 0/0 is defined as 0 and flagged.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .crossing import BoundVector
from .errors import DivergenceError
from .functionals import DIVERGE_MSG, ValueInterval
from .samples import CdfBand, OrderStats, StepCdf


def _segment_integral(cdf: StepCdf, cumfn: Callable, xi=None, terminal=None) -> float:
    """Exact int psi(p) xi(inverse(p)) dp with psi given by its antiderivative."""
    edges, values = cdf.inverse_segments(floor=0.0)
    if terminal is not None and values.size and math.isinf(values[-1]):
        values = values.copy()
        values[-1] = terminal
    weights = np.diff(np.asarray(cumfn(edges), dtype=np.float64))
    live = weights > 0.0
    if not np.any(live):
        return 0.0
    xs = values[live]
    if np.any(np.isinf(xs)):
        raise DivergenceError(DIVERGE_MSG)
    ys = xs if xi is None else np.asarray(xi(xs), dtype=np.float64)
    return float(np.dot(ys, weights[live]))


def _mean_of_lower_inverse(band: CdfBand) -> float:
    """int F_L^-(p) dp, the large side of the mean (needs a finite B)."""
    return _segment_integral(band.lower, lambda p: p)


def _mean_of_upper_inverse(band: CdfBand) -> float:
    """int F_U^-(p) dp, the small side of the mean."""
    return _segment_integral(band.upper, lambda p: p)


def _merged_inverse_values(band: CdfBand):
    """Common p-segmentation carrying both inverses' values per segment."""
    e_lo, v_lo = band.lower.inverse_segments(floor=0.0)
    e_up, v_up = band.upper.inverse_segments(floor=0.0)
    edges = np.unique(np.concatenate([e_lo, e_up]))
    mids_idx_lo = np.searchsorted(e_lo, edges[1:], side="left") - 1
    mids_idx_up = np.searchsorted(e_up, edges[1:], side="left") - 1
    lo_vals = v_lo[np.clip(mids_idx_lo, 0, v_lo.size - 1)]
    up_vals = v_up[np.clip(mids_idx_up, 0, v_up.size - 1)]
    return edges, lo_vals, up_vals


def gini_upper(band: CdfBand) -> float:
    """(1-delta) upper bound on the Gini coefficient of a nonnegative loss."""
    num = _segment_integral(band.lower, lambda p: p * p)  # int 2p F_L^-
    den = _mean_of_upper_inverse(band)
    if den <= 0.0:
        return 0.0 if num <= 0.0 else math.inf
    return num / den - 1.0


def extended_gini_upper(band: CdfBand, nu: float) -> float:
    """(1-delta) upper bound on the extended Gini with parameter nu > 0.

    nu = 2 recovers the standard Gini; nu = 1 weights all quantiles equally
    and the measure vanishes.
    """
    if nu <= 0:
        raise ValueError("extended Gini parameter must be positive")
    num = _segment_integral(band.upper, lambda p: 1.0 - (1.0 - p) ** nu)
    den = _mean_of_lower_inverse(band)
    if den <= 0.0:
        return 0.0 if num <= 0.0 else math.inf
    return 1.0 - num / den


def atkinson_upper(band: CdfBand, eps: float, x_min: Optional[float] = None) -> float:
    """(1-delta) upper bound on the Atkinson index at aversion eps >= 0.

    For eps > 1 the power transform blows up at zero losses, so a declared
    positive support floor ``x_min`` is required whenever the upper band's
    inverse touches 0.  For eps = 1 the geometric-mean form applies and any
    zero mass collapses the numerator to 0.
    """
    if eps < 0:
        raise ValueError("Atkinson aversion must be nonnegative")
    den = _mean_of_lower_inverse(band)
    if den <= 0.0:
        return 0.0
    edges, values = band.upper.inverse_segments(floor=0.0)
    weights = np.diff(edges)
    live = weights > 0.0
    xs = values[live]
    ws = weights[live]
    if eps == 1.0:
        if np.any(xs <= 0.0):
            num = 0.0
        else:
            num = math.exp(float(np.dot(np.log(xs), ws)))
        return 1.0 - num / den
    if eps > 1.0 and np.any(xs <= 0.0):
        if x_min is None or x_min <= 0.0:
            raise ValueError("Atkinson eps>1 undefined at zero losses")
        xs = np.maximum(xs, x_min)
    power = 1.0 - eps
    integral = float(np.dot(xs**power, ws))
    num = integral ** (1.0 / power) if integral > 0.0 else 0.0
    return 1.0 - num / den


def atkinson_upper_family(
    band: CdfBand, eps_list: Sequence[float], x_min: Optional[float] = None
) -> List[float]:
    """Atkinson bounds for several aversions from one band (one shared event)."""
    return [atkinson_upper(band, eps, x_min) for eps in eps_list]


def lorenz_band(band: CdfBand, t_grid) -> List[ValueInterval]:
    """Per-t enclosures of the Lorenz curve, valid jointly at level 1-delta."""
    mu_big = _mean_of_lower_inverse(band)
    mu_small = _mean_of_upper_inverse(band)
    out = []
    for t in np.asarray(t_grid, dtype=np.float64):
        if not (0.0 <= t <= 1.0):
            raise ValueError("Lorenz curve arguments lie in [0, 1]")
        part_small = _segment_integral(band.upper, lambda p: np.minimum(p, t))
        part_big = _segment_integral(band.lower, lambda p: np.minimum(p, t))
        lo = part_small / mu_big if mu_big > 0.0 else 0.0
        hi = part_big / mu_small if mu_small > 0.0 else (0.0 if part_big <= 0.0 else math.inf)
        out.append(ValueInterval(lo, max(lo, hi)))
    return out


def hoover_upper(band: CdfBand) -> float:
    """(1-delta) upper bound on the Hoover (Robin Hood) index."""
    mu_small = _mean_of_upper_inverse(band)
    mu_big = _mean_of_lower_inverse(band)
    edges, lo_vals, up_vals = _merged_inverse_values(band)
    if np.any(np.isinf(lo_vals)):
        raise DivergenceError(DIVERGE_MSG)
    seg = np.diff(edges)
    integrand = np.maximum(np.abs(lo_vals - mu_small), np.abs(up_vals - mu_big))
    num = float(np.dot(integrand, seg))
    if mu_small <= 0.0:
        return 0.0 if num <= 0.0 else math.inf
    return num / (2.0 * mu_small)


def generalized_entropy_upper(
    band: CdfBand, alpha: float, x_min: Optional[float] = None
) -> float:
    """(1-delta) upper bound on the generalized entropy index, alpha not in {0,1}.

    alpha > 1: positive prefactor, increasing power: large inverse over the
    small mean.  alpha in (0,1): negative prefactor flips the goal, so the
    bracket is minimized with the small inverse over the large mean.
    alpha < 0: positive prefactor, decreasing power: small inverse over the
    large mean again, and zero losses need a declared floor x_min.
    """
    if alpha in (0.0, 1.0):
        raise ValueError("generalized entropy at alpha in {0, 1} is unsupported (see docs)")
    pref = 1.0 / (alpha * (alpha - 1.0))
    if alpha > 1.0:
        mu = _mean_of_upper_inverse(band)
        if mu <= 0.0:
            num_probe = _segment_integral(band.lower, lambda p: p)
            return 0.0 if num_probe <= 0.0 else math.inf
        power_int = _segment_integral(band.lower, lambda p: p, xi=lambda x: x**alpha)
        return pref * (power_int / mu**alpha - 1.0)
    mu = _mean_of_lower_inverse(band)
    if mu <= 0.0:
        return 0.0
    edges, values = band.upper.inverse_segments(floor=0.0)
    weights = np.diff(edges)
    live = weights > 0.0
    xs = values[live]
    ws = weights[live]
    if alpha < 0.0 and np.any(xs <= 0.0):
        if x_min is None or x_min <= 0.0:
            raise ValueError("generalized entropy alpha<0 undefined at zero losses")
        xs = np.maximum(xs, x_min)
    with np.errstate(divide="ignore"):
        power_int = float(np.dot(xs**alpha, ws))
    return pref * (power_int / mu**alpha - 1.0)


def _transform_step(cdf: StepCdf, fn: Callable) -> StepCdf:
    levels = np.minimum(np.maximum.accumulate(np.asarray(fn(cdf.levels))), 1.0)
    return StepCdf(
        breakpoints=cdf.breakpoints.copy(),
        levels=levels,
        level_before=float(np.clip(fn(cdf.level_before), 0.0, 1.0)),
        closed=cdf.closed,
        jump_at=cdf.jump_at,
    )


def extreme_cdf_bands(band: CdfBand, k: int, which: str) -> CdfBand:
    """Band for the max (F^k) or min (1-(1-F)^k) of k i.i.d. draws.

    Levelwise monotone transforms of both sides at the same delta; the
    original band event certifies the result.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if which == "max":
        fn = lambda v: np.asarray(v, dtype=np.float64) ** k
    elif which == "min":
        fn = lambda v: 1.0 - (1.0 - np.asarray(v, dtype=np.float64)) ** k
    else:
        raise ValueError("which must be 'max' or 'min'")
    newL = BoundVector(
        L=np.minimum(np.maximum.accumulate(fn(band.L.L)), 1.0),
        n=band.L.n,
        delta=band.L.delta,
        method=band.L.method,
    )
    return CdfBand(
        lower=_transform_step(band.lower, fn),
        upper=_transform_step(band.upper, fn),
        delta=band.delta,
        method=band.method,
        order_stats=band.order_stats,
        L=newL,
    )


def mean_range_upper(band: CdfBand, k: int) -> float:
    """Mean-range bound for k i.i.d. draws, evaluated exactly as published.

    Implements the published display with its conservative substitutions
    (lower-inverse composed with itself; upper CDF power at the
    lower-inverse minus lower CDF power at the upper-inverse).  Reported as
    a "paper-formula bound": on the uniform k=2 fixture it evaluates to
    1/6 while direct simulation of the expected range gives 1/3, so
    reports carry the Monte Carlo value alongside without asserting an
    ordering between the two (see README).  Assumes a continuous loss
    distribution and a finite support bound; inner compositions clamp
    their argument into (0, 1].
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if math.isinf(band.upper_support()):
        raise DivergenceError(DIVERGE_MSG)
    edges, lo_vals, up_vals = _merged_inverse_values(band)
    seg = np.diff(edges)
    live = seg > 0.0
    g = lo_vals[live]  # lower-band inverse values (large side)
    h = up_vals[live]  # upper-band inverse values (small side)
    inner_g = np.clip(g, 1e-300, 1.0)
    outer = np.asarray([band.lower.inverse(float(p)) for p in inner_g])
    f_up_at_g = band.upper(g)
    f_lo_at_h = band.lower(h)
    integrand = outer * (f_up_at_g ** (k - 1) - f_lo_at_h**k)
    return float(k * np.dot(integrand, seg[live]))


@dataclass(frozen=True)
class GroupBounds:
    """Per-group enclosures of one functional plus group weights."""

    intervals: Dict[str, ValueInterval]
    weights: Dict[str, float]

    def __post_init__(self):
        if set(self.intervals) != set(self.weights):
            raise ValueError("intervals and weights must cover the same groups")
        if not self.intervals:
            raise ValueError("at least one group required")
        total = sum(self.weights.values())
        if any(w < 0 for w in self.weights.values()) or abs(total - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")

    def labels(self) -> List[str]:
        return sorted(self.intervals)


def group_diff_upper(a: ValueInterval, b: ValueInterval, xi: str = "abs") -> float:
    """Upper bound on |T(F_a) - T(F_b)| (or its square) from enclosures."""
    bound = max(abs(a.hi - b.lo), abs(a.lo - b.hi))
    if xi == "abs":
        return bound
    if xi == "square":
        return bound * bound
    raise ValueError("xi must be 'abs' or 'square'")


def max_pairwise_diff_upper(groups: GroupBounds, xi: str = "abs") -> float:
    """Upper bound on the largest pairwise group difference."""
    labels = groups.labels()
    if len(labels) < 2:
        raise ValueError("need at least two groups")
    return max(
        group_diff_upper(groups.intervals[g1], groups.intervals[g2], xi)
        for g1, g2 in itertools.combinations(labels, 2)
    )


def cvar_fairness_upper(groups: GroupBounds, alpha: float) -> float:
    """Upper bound on the CVaR dispersion of a functional across groups.

    The inner minimization over the threshold rho is convex piecewise
    linear with kinks only at the per-group upper endpoints, so the exact
    minimum is found by enumerating those candidates.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    labels = groups.labels()
    w = np.asarray([groups.weights[g] for g in labels])
    uppers = np.asarray([groups.intervals[g].hi for g in labels])
    lowers = np.asarray([groups.intervals[g].lo for g in labels])
    candidates = [
        float(rho + np.dot(w, np.maximum(uppers - rho, 0.0)) / (1.0 - alpha))
        for rho in uppers
    ]
    return min(candidates) - float(np.dot(w, lowers))


def risk_uncertainty_variance_upper(groups: GroupBounds) -> float:
    """Conservative upper bound on the across-group variance of a functional.

    For any fixed center m, Var <= E_g max((u_g-m)^2, (m-l_g)^2); taking the
    larger value over the two natural centers (mean of lowers, mean of
    uppers) keeps the bound an over-approximation for every selection of
    the true values inside their intervals.
    """
    labels = groups.labels()
    w = np.asarray([groups.weights[g] for g in labels])
    uppers = np.asarray([groups.intervals[g].hi for g in labels])
    lowers = np.asarray([groups.intervals[g].lo for g in labels])
    if np.any(lowers < 0.0):
        raise ValueError("variance bound requires nonnegative interval endpoints")
    bounds = []
    for m in (float(np.dot(w, lowers)), float(np.dot(w, uppers))):
        bounds.append(float(np.dot(w, np.maximum((uppers - m) ** 2, (m - lowers) ** 2))))
    return max(bounds)


@dataclass(frozen=True)
class MeasureBoundReport:
    """A named measure with its certified bound(s) and provenance."""

    measure: str
    params: Dict[str, float]
    bound_hi: float
    bound_lo: Optional[float] = None
    delta_effective: float = 0.0
    method: str = ""
    n: int = 0
    flags: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {"measure": self.measure, "params": self.params}
        if self.bound_lo is not None:
            out["bound_lo"] = self.bound_lo
        out.update(
            {
                "bound_hi": self.bound_hi,
                "delta_effective": self.delta_effective,
                "method": self.method,
                "n": self.n,
                "flags": list(self.flags),
            }
        )
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())
