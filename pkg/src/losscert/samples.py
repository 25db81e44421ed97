"""Core data types: loss samples, order statistics, step CDFs, weight functions.

Everything here is immutable after construction and safe to share across
threads; all operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

MONO_TOL = 1e-12


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LossSamples:
    """A finite multiset of real-valued losses with optional group labels.

    ``support_max`` declares a known upper bound B for the loss variable;
    several measures need it to close the upper tail of the band.
    """

    values: np.ndarray
    group: Optional[Tuple[str, ...]] = None
    support_max: Optional[float] = None
    nonneg: bool = False

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("no samples")
        if not np.all(np.isfinite(arr)):
            raise ValueError("losses must be finite")
        object.__setattr__(self, "values", arr)
        if self.group is not None:
            grp = tuple(str(g) for g in self.group)
            if len(grp) != arr.size:
                raise ValueError("group labels must match sample count")
            object.__setattr__(self, "group", grp)
        if self.nonneg and arr.min() < 0:
            raise ValueError("nonneg flag set but negative losses present")
        if self.support_max is not None and self.support_max < arr.max():
            raise ValueError("support_max below the largest observed loss")

    @property
    def n(self) -> int:
        return int(self.values.size)

    def by_group(self) -> dict:
        """Split into one LossSamples per group label (requires labels)."""
        if self.group is None:
            raise ValueError("samples carry no group labels")
        out = {}
        labels = np.asarray(self.group)
        for g in sorted(set(self.group)):
            mask = labels == g
            out[g] = LossSamples(
                self.values[mask],
                support_max=self.support_max,
                nonneg=self.nonneg,
            )
        return out


@dataclass(frozen=True)
class OrderStats:
    """Sorted loss values X_(1) <= ... <= X_(n)."""

    sorted: np.ndarray
    n: int

    def __post_init__(self):
        arr = _frozen_array(self.sorted)
        if arr.size != self.n or self.n == 0:
            raise ValueError("order statistics empty or count mismatch")
        if np.any(np.diff(arr) < 0):
            raise ValueError("order statistics must be nondecreasing")
        object.__setattr__(self, "sorted", arr)


def order_statistics(samples: LossSamples) -> OrderStats:
    """Sort the losses, keeping ties as repeated entries."""
    if samples.n == 0:
        raise ValueError("no samples")
    return OrderStats(sorted=np.sort(samples.values), n=samples.n)


@dataclass(frozen=True)
class StepCdf:
    """Right-continuous nondecreasing step function with range in [0, 1].

    ``levels[j]`` is the value on [breakpoints[j], breakpoints[j+1]); the
    value below the first breakpoint is ``level_before``.  A closed function
    reaches 1 at its final breakpoint.  An open function stays at its last
    level above the final breakpoint and jumps to 1 at ``jump_at`` (possibly
    +inf), modelling an unbounded upper tail.
    """

    breakpoints: np.ndarray
    levels: np.ndarray
    level_before: float = 0.0
    closed: bool = True
    jump_at: Optional[float] = None

    def __post_init__(self):
        bp = _frozen_array(self.breakpoints)
        lv = _frozen_array(self.levels)
        if bp.size == 0 or bp.size != lv.size:
            raise ValueError("breakpoints/levels must be nonempty and equal length")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if lv.min() < -MONO_TOL or lv.max() > 1 + MONO_TOL:
            raise ValueError("levels must lie in [0, 1]")
        if np.any(np.diff(lv) < -MONO_TOL):
            raise ValueError("levels must be nondecreasing")
        if self.level_before < -MONO_TOL or self.level_before > lv[0] + MONO_TOL:
            raise ValueError("level_before must be in [0, first level]")
        if self.closed:
            if abs(lv[-1] - 1.0) > MONO_TOL:
                raise ValueError("closed step CDF must end at level 1")
            if self.jump_at is not None:
                raise ValueError("closed step CDF carries no jump location")
        else:
            if self.jump_at is None:
                raise ValueError("open step CDF needs a jump location (may be inf)")
            if self.jump_at < bp[-1]:
                raise ValueError("jump location below last breakpoint")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "level_before", float(self.level_before))

    def __call__(self, x):
        """Evaluate the CDF at x (scalar or array)."""
        x = np.asarray(x, dtype=np.float64)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        vals = np.where(idx < 0, self.level_before, self.levels[np.maximum(idx, 0)])
        if not self.closed and np.isfinite(self.jump_at):
            vals = np.where(x >= self.jump_at, 1.0, vals)
        if vals.ndim == 0:
            return float(vals)
        return vals

    def inverse(self, p: float) -> float:
        """Generalized inverse inf{x : cdf(x) >= p} for p in (0, 1].

        Returns -inf when every x already reaches p, and the carried jump
        location (possibly +inf, the "inverse unbounded" signal) when p
        exceeds the last level of an open function.
        """
        if not (0.0 < p <= 1.0):
            raise ValueError("inverse requires p in (0, 1]")
        if p <= self.level_before + 0.0:
            return -math.inf
        j = int(np.searchsorted(self.levels, p, side="left"))
        if j < self.levels.size:
            return float(self.breakpoints[j])
        # only reachable for open functions (closed ones end at level 1)
        return float(self.jump_at)

    def upper_support(self) -> float:
        """Smallest x at which the function reaches 1 (inf if never)."""
        if self.closed:
            j = int(np.searchsorted(self.levels, 1.0, side="left"))
            return float(self.breakpoints[j])
        return float(self.jump_at)

    def inverse_segments(self, floor: float = -math.inf):
        """The inverse as a step function of p.

        Returns (edges, values): edges is an increasing array starting at 0
        and ending at 1; on (edges[k], edges[k+1]] the inverse equals
        values[k].  Values below the lowest level map to ``floor``; the
        terminal segment of an open function maps to its jump location.
        Zero-width segments (tied levels) are kept; their integrals vanish.
        """
        edges = [0.0]
        values = []
        if self.level_before > 0.0:
            edges.append(min(self.level_before, 1.0))
            values.append(floor)
        prev = self.level_before
        for x, lv in zip(self.breakpoints, self.levels):
            if lv > prev:
                edges.append(min(float(lv), 1.0))
                values.append(float(x))
                prev = lv
        if prev < 1.0:
            edges.append(1.0)
            values.append(float(self.jump_at) if not self.closed else float(self.breakpoints[-1]))
        return np.asarray(edges), np.asarray(values)


@dataclass(frozen=True)
class CdfBand:
    """A matched (lower, upper) pair of step CDFs sharing one band event.

    Both sides are built from the same bound vector L, so a single
    noncrossing event certifies every measure computed from the band.
    ``delta`` is the miscoverage budget; the exact_plugin test fixture
    carries delta = 0 and is excluded from coverage accounting.
    """

    lower: StepCdf
    upper: StepCdf
    delta: float
    method: str
    order_stats: OrderStats
    L: "object"  # BoundVector; typed loosely to keep module layering acyclic

    def __post_init__(self):
        if self.method != "exact_plugin" and not (0.0 < self.delta < 1.0):
            raise ValueError("delta must be in (0, 1) for statistical bands")
        if self.method == "exact_plugin" and self.delta != 0.0:
            raise ValueError("exact_plugin bands carry delta = 0")
        xs = np.unique(
            np.concatenate([self.lower.breakpoints, self.upper.breakpoints])
        )
        grid = np.concatenate([xs, 0.5 * (xs[:-1] + xs[1:])]) if xs.size > 1 else xs
        if np.any(self.lower(grid) > self.upper(grid) + MONO_TOL):
            raise ValueError("lower band exceeds upper band")

    @property
    def n(self) -> int:
        return self.order_stats.n

    def upper_support(self) -> float:
        """The x at which the lower band reaches 1 (B, possibly inf)."""
        return self.lower.upper_support()


@dataclass(frozen=True)
class WeightFunction:
    """A member of the quantile-weight catalog with exact segment integrals.

    Kinds: constant_one, cvar(beta), interval_uniform(beta_min, beta_max),
    linear (psi(p) = p), smoothed_median(beta, spread), piecewise_poly.
    The unit-mass requirement of a QBRM weight is enforced for constant_one,
    cvar and interval_uniform.  The smoothed median integrates to ~1 on
    [0, 1]: its Gaussian tails leak below 1e-10 of mass outside the unit
    interval for spread <= 0.1 and beta in [0.2, 0.8]; the leak is accepted,
    not renormalized.
    """

    kind: str
    beta: Optional[float] = None
    beta_min: Optional[float] = None
    beta_max: Optional[float] = None
    spread: Optional[float] = None
    segments: Optional[Tuple[Tuple[float, float, Tuple[float, ...]], ...]] = None

    @classmethod
    def constant_one(cls) -> "WeightFunction":
        return cls(kind="constant_one")

    @classmethod
    def cvar(cls, beta: float) -> "WeightFunction":
        if not (0.0 <= beta < 1.0):
            raise ValueError("cvar weight requires beta in [0, 1)")
        return cls(kind="cvar", beta=float(beta))

    @classmethod
    def interval_uniform(cls, beta_min: float, beta_max: float) -> "WeightFunction":
        if not (0.0 <= beta_min < beta_max <= 1.0):
            raise ValueError("interval weight requires 0 <= beta_min < beta_max <= 1")
        return cls(kind="interval_uniform", beta_min=float(beta_min), beta_max=float(beta_max))

    @classmethod
    def linear(cls) -> "WeightFunction":
        return cls(kind="linear")

    @classmethod
    def smoothed_median(cls, beta: float = 0.5, spread: float = 0.01) -> "WeightFunction":
        if not (0.0 < beta < 1.0) or spread <= 0:
            raise ValueError("smoothed median requires beta in (0,1) and spread > 0")
        return cls(kind="smoothed_median", beta=float(beta), spread=float(spread))

    @classmethod
    def piecewise_poly(cls, segments: Sequence[Tuple[float, float, Sequence[float]]]) -> "WeightFunction":
        segs = []
        prev_hi = 0.0
        for lo, hi, coeffs in segments:
            if not (0.0 <= lo < hi <= 1.0):
                raise ValueError("piecewise segment outside [0, 1] or empty")
            if lo < prev_hi - MONO_TOL:
                raise ValueError("piecewise segments must not overlap")
            segs.append((float(lo), float(hi), tuple(float(c) for c in coeffs)))
            prev_hi = hi
        return cls(kind="piecewise_poly", segments=tuple(segs))

    def __call__(self, p):
        p = np.asarray(p, dtype=np.float64)
        if self.kind == "constant_one":
            out = np.ones_like(p)
        elif self.kind == "cvar":
            out = np.where(p >= self.beta, 1.0 / (1.0 - self.beta), 0.0)
        elif self.kind == "interval_uniform":
            w = 1.0 / (self.beta_max - self.beta_min)
            out = np.where((p >= self.beta_min) & (p <= self.beta_max), w, 0.0)
        elif self.kind == "linear":
            out = p.copy()
        elif self.kind == "smoothed_median":
            out = np.exp(-((p - self.beta) ** 2) / self.spread**2) / (
                self.spread * math.sqrt(math.pi)
            )
        elif self.kind == "piecewise_poly":
            out = np.zeros_like(p)
            for lo, hi, coeffs in self.segments:
                mask = (p >= lo) & (p <= hi)
                out = np.where(mask, np.polynomial.polynomial.polyval(p, coeffs), out)
        else:
            raise ValueError(f"unknown weight kind: {self.kind}")
        if out.ndim == 0:
            return float(out)
        return out

    def integral(self, a: float, b: float) -> float:
        """Exact integral of the weight over [a, b] within [0, 1]."""
        if not (0.0 <= a <= b <= 1.0):
            raise ValueError("weight integral requires 0 <= a <= b <= 1")
        if self.kind == "constant_one":
            return b - a
        if self.kind == "cvar":
            lo = max(a, self.beta)
            return max(0.0, b - lo) / (1.0 - self.beta)
        if self.kind == "interval_uniform":
            lo = max(a, self.beta_min)
            hi = min(b, self.beta_max)
            return max(0.0, hi - lo) / (self.beta_max - self.beta_min)
        if self.kind == "linear":
            return 0.5 * (b * b - a * a)
        if self.kind == "smoothed_median":
            # antiderivative of the Gaussian kernel, no renormalization
            return 0.5 * (
                math.erf((b - self.beta) / self.spread) - math.erf((a - self.beta) / self.spread)
            )
        if self.kind == "piecewise_poly":
            total = 0.0
            for lo, hi, coeffs in self.segments:
                left = max(a, lo)
                right = min(b, hi)
                if right > left:
                    anti = np.polynomial.polynomial.polyint(coeffs)
                    total += float(
                        np.polynomial.polynomial.polyval(right, anti)
                        - np.polynomial.polynomial.polyval(left, anti)
                    )
            return total
        raise ValueError(f"unknown weight kind: {self.kind}")

    def cumulative(self, p):
        """Exact antiderivative int_0^p psi, vectorized (for segment sums)."""
        from scipy.special import erf  # vectorized counterpart of math.erf

        p = np.asarray(p, dtype=np.float64)
        if self.kind == "constant_one":
            return p.astype(np.float64)
        if self.kind == "cvar":
            return np.maximum(0.0, p - self.beta) / (1.0 - self.beta)
        if self.kind == "interval_uniform":
            return (np.clip(p, self.beta_min, self.beta_max) - self.beta_min) / (
                self.beta_max - self.beta_min
            )
        if self.kind == "linear":
            return 0.5 * p * p
        if self.kind == "smoothed_median":
            return 0.5 * (
                erf((p - self.beta) / self.spread) - erf((0.0 - self.beta) / self.spread)
            )
        if self.kind == "piecewise_poly":
            out = np.zeros_like(p)
            for lo, hi, coeffs in self.segments:
                anti = np.polynomial.polynomial.polyint(coeffs)
                upper = np.clip(p, lo, hi)
                out = out + np.where(
                    p > lo,
                    np.polynomial.polynomial.polyval(upper, anti)
                    - np.polynomial.polynomial.polyval(lo, anti),
                    0.0,
                )
            return out
        raise ValueError(f"unknown weight kind: {self.kind}")

    def is_nonnegative(self, grid: int = 513) -> bool:
        p = np.linspace(0.0, 1.0, grid)
        return bool(np.all(self(p) >= -1e-12))

    def positive_negative_parts(self) -> Tuple["WeightFunction", "WeightFunction"]:
        """Split a general-sign piecewise polynomial into psi+ and psi-.

        Segment roots are found exactly (numpy polynomial roots) so the two
        parts keep closed-form integrals.  Nonnegative catalog kinds return
        (self, zero).
        """
        zero = WeightFunction.piecewise_poly([(0.0, 1.0, (0.0,))])
        if self.kind != "piecewise_poly":
            if not self.is_nonnegative():
                raise ValueError("only piecewise_poly weights may take negative values")
            return self, zero
        pos_segs = []
        neg_segs = []
        for lo, hi, coeffs in self.segments:
            pts = [lo, hi]
            if len(coeffs) > 1 and any(c != 0.0 for c in coeffs[1:]):
                roots = np.polynomial.polynomial.polyroots(coeffs)
                for r in roots:
                    if abs(r.imag) < 1e-12 and lo < r.real < hi:
                        pts.append(float(r.real))
            pts = sorted(set(pts))
            for left, right in zip(pts[:-1], pts[1:]):
                mid = 0.5 * (left + right)
                val = float(np.polynomial.polynomial.polyval(mid, coeffs))
                if val >= 0.0:
                    pos_segs.append((left, right, coeffs))
                else:
                    neg_segs.append((left, right, tuple(-c for c in coeffs)))
        pos = WeightFunction.piecewise_poly(pos_segs) if pos_segs else zero
        neg = WeightFunction.piecewise_poly(neg_segs) if neg_segs else zero
        return pos, neg


def weight_integral(psi: WeightFunction, a: float, b: float) -> float:
    """Exact integral of a catalog weight over [a, b] in [0, 1]."""
    return psi.integral(a, b)


def step_inverse(cdf: StepCdf, p: float) -> float:
    """Generalized inverse of a step CDF; see StepCdf.inverse."""
    return cdf.inverse(p)
