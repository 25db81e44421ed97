"""Transform calculus on CDF bands.

Quantile-weighted integrals against the band inverses, envelopes for
absolute-value and polynomial transforms, bounded-variation decompositions
for general nonlinearities, and general-sign weight functions via their
positive/negative parts.

Orientation reminder: flipping a band pair swaps the roles of the sides,
so the LOWER band's inverse is the pointwise UPPER bound on the true
quantile function and vice versa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DivergenceError
from .samples import CdfBand, StepCdf, WeightFunction

DIVERGE_MSG = "upper bound diverges: supply support_max"


@dataclass(frozen=True)
class ValueInterval:
    """A certified [lo, hi] enclosure of a scalar functional."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError("interval must satisfy lo <= hi, not NaN")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _apply(xi: Callable, xs: np.ndarray) -> np.ndarray:
    """Evaluate a user transform on an array, tolerating scalar-only handles."""
    try:
        out = np.asarray(xi(xs), dtype=np.float64)
        if out.shape == xs.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.asarray([float(xi(float(v))) for v in xs], dtype=np.float64)


def inverse_weighted_integral(
    cdf: StepCdf,
    psi: WeightFunction,
    xi: Optional[Callable] = None,
    floor: float = 0.0,
    terminal: Optional[float] = None,
) -> float:
    """Exact int_0^1 psi(p) * xi(inverse(p)) dp for a step CDF.

    The inverse of a step CDF is itself a step function of p, so the
    integral is a finite sum of closed-form weight-segment integrals; no
    quadrature is involved.  ``floor`` substitutes for -inf on the leading
    segment (0 for nonnegative losses); ``terminal`` overrides the carried
    jump location on the trailing segment of an open CDF.  A trailing
    segment at +inf with positive weight mass raises DivergenceError unless
    xi stays finite there.
    """
    edges, values = cdf.inverse_segments(floor=floor)
    if terminal is not None and values.size and math.isinf(values[-1]):
        values = values.copy()
        values[-1] = terminal
    weights = np.diff(psi.cumulative(edges))
    live = weights > 0.0
    if not np.any(live):
        return 0.0
    xs = values[live]
    if np.any(np.isinf(xs)):
        if xi is None:
            raise DivergenceError(DIVERGE_MSG)
        finite_at_inf = np.isfinite(_apply(xi, np.asarray([math.inf])))[0]
        if not finite_at_inf:
            raise DivergenceError(DIVERGE_MSG)
    ys = xs if xi is None else _apply(xi, xs)
    return float(np.dot(ys, weights[live]))


def qbrm_upper(
    band: CdfBand,
    psi: WeightFunction,
    xi: Optional[Callable] = None,
    B: Optional[float] = None,
) -> float:
    """(1-delta) upper bound on int psi(p) xi(F^-(p)) dp, xi nondecreasing.

    Evaluates the weight against the lower band's inverse; the trailing
    mass above L_n lands on X_(n+1) = B (the declared support bound).
    """
    if not psi.is_nonnegative():
        raise ValueError("qbrm weights must be nonnegative; see signed_weight_bounds")
    return inverse_weighted_integral(band.lower, psi, xi, floor=0.0, terminal=B)


def qbrm_lower(band: CdfBand, psi: WeightFunction, xi: Optional[Callable] = None) -> float:
    """(1-delta) lower bound on int psi(p) xi(F^-(p)) dp for nonneg losses.

    Evaluates against the upper band's inverse, whose leading segment sits
    at the support floor 0; the upper completion is closed, so no support
    bound is needed.
    """
    if not psi.is_nonnegative():
        raise ValueError("qbrm weights must be nonnegative; see signed_weight_bounds")
    return inverse_weighted_integral(band.upper, psi, xi, floor=0.0)


def qbrm_interval(
    band: CdfBand,
    psi: WeightFunction,
    xi: Optional[Callable] = None,
    B: Optional[float] = None,
) -> ValueInterval:
    """Two-sided enclosure (qbrm_lower, qbrm_upper) from one band event."""
    return ValueInterval(qbrm_lower(band, psi, xi), qbrm_upper(band, psi, xi, B))


def transform_abs(interval: ValueInterval) -> ValueInterval:
    """Envelope of |s| over s in the interval."""
    lo = interval.lo * (interval.lo >= 0.0) - interval.hi * (interval.hi <= 0.0)
    hi = max(abs(interval.lo), abs(interval.hi))
    return ValueInterval(float(lo), float(hi))


def transform_polynomial(
    interval: ValueInterval, coeffs: Sequence[Tuple[int, float]]
) -> ValueInterval:
    """Envelope of sum_k alpha_k s^k over the interval.

    Terms are grouped by parity of k and sign of alpha_k: odd powers are
    monotone (endpoint evaluation); even powers route through the
    absolute-value envelope.  The result is an enclosure, not the exact
    range.
    """
    s_lo, s_hi = interval.lo, interval.hi
    abs_env = transform_abs(interval)
    upper = 0.0
    lower = 0.0
    for k, alpha in coeffs:
        if k < 0:
            raise ValueError("polynomial powers must be nonnegative")
        if k == 0:
            upper += alpha
            lower += alpha
        elif k % 2 == 1:
            if alpha >= 0.0:
                upper += alpha * s_hi**k
                lower += alpha * s_lo**k
            else:
                upper += alpha * s_lo**k
                lower += alpha * s_hi**k
        else:
            if alpha >= 0.0:
                upper += alpha * abs_env.hi**k
                lower += alpha * abs_env.lo**k
            else:
                upper += alpha * abs_env.lo**k
                lower += alpha * abs_env.hi**k
    return ValueInterval(float(lower), float(upper))


@dataclass(frozen=True)
class BvDecomposition:
    """A bounded-variation transform split as xi = f1 - f2, both increasing.

    f1 accumulates the total variation; f2 = f1 - xi.  ``domain`` is the
    loss interval [0, B] on which the split was constructed.
    """

    f1: Callable
    f2: Callable
    domain: Tuple[float, float]

    def __post_init__(self):
        lo, hi = self.domain
        if not (lo < hi) or not math.isfinite(hi):
            raise ValueError("decomposition needs a finite domain [lo, hi]")
        xs = np.linspace(lo, hi, 129)
        f1s = _apply(self.f1, xs)
        f2s = _apply(self.f2, xs)
        if np.any(np.diff(f1s) < -1e-9) or np.any(np.diff(f2s) < -1e-9):
            raise ValueError("f1 and f2 must be nondecreasing on the domain")

    def xi(self, x: float) -> float:
        return float(self.f1(x) - self.f2(x))

    @classmethod
    def from_pair(cls, f1: Callable, f2: Callable, domain: Tuple[float, float]):
        return cls(f1=f1, f2=f2, domain=domain)

    @classmethod
    def from_derivative(
        cls,
        xi: Callable,
        dxi: Callable,
        domain: Tuple[float, float],
        tol: float = 1e-8,
        scan: int = 1024,
    ) -> "BvDecomposition":
        """Build f1(x) = int_0^x |xi'| by adaptive quadrature.

        Sign changes of the derivative are located on a scan grid, refined
        by bracketing, and cached as quadrature breakpoints so each segment
        integrates a single-signed integrand.
        """
        lo, hi = domain
        xs = np.linspace(lo, hi, scan + 1)
        ds = _apply(dxi, xs)
        roots = []
        for k in range(scan):
            if ds[k] == 0.0 or ds[k] * ds[k + 1] < 0.0:
                if ds[k] == 0.0:
                    roots.append(xs[k])
                else:
                    roots.append(float(brentq(dxi, xs[k], xs[k + 1], xtol=1e-14)))
        pts = np.unique(np.asarray([lo] + roots + [hi]))
        cum = np.zeros(pts.size)
        for k in range(pts.size - 1):
            val, _ = quad(
                lambda u: abs(dxi(u)), pts[k], pts[k + 1], epsabs=tol, epsrel=tol, limit=200
            )
            cum[k + 1] = cum[k] + val

        def total_variation(x: float) -> float:
            x = min(max(x, lo), hi)
            j = int(np.searchsorted(pts, x, side="right")) - 1
            j = min(j, pts.size - 2)
            base = cum[j]
            if x > pts[j]:
                extra, _ = quad(
                    lambda u: abs(dxi(u)), pts[j], x, epsabs=tol, epsrel=tol, limit=200
                )
                base = base + extra
            return float(base)

        return cls(
            f1=total_variation, f2=lambda x: total_variation(x) - xi(x), domain=domain
        )


def transform_bv(band: CdfBand, decomposition: BvDecomposition) -> Callable:
    """Pointwise (1-delta) upper envelope of xi(F^-) for bounded-variation xi.

    Returns p -> f1(lower-inverse(p)) - f2(upper-inverse(p)); the lower
    band's inverse upper-bounds F^- and the upper band's inverse
    lower-bounds it, and both f's are increasing.
    """
    lo_dom = decomposition.domain[0]

    def envelope(p: float) -> float:
        x_hi = band.lower.inverse(p)
        if math.isinf(x_hi):
            raise DivergenceError(DIVERGE_MSG)
        x_lo = max(band.upper.inverse(p), lo_dom)
        return float(decomposition.f1(x_hi) - decomposition.f2(x_lo))

    return envelope


def signed_weight_bounds(
    band: CdfBand,
    psi: WeightFunction,
    xi: Optional[Callable] = None,
    B: Optional[float] = None,
) -> ValueInterval:
    """Two-sided bound on int psi xi(F^-) for a general-sign weight.

    Splits psi = psi+ - psi- and combines the one-sided bounds:
    upper = upper(psi+) - lower(psi-), lower = lower(psi+) - upper(psi-).
    """
    psi_pos, psi_neg = psi.positive_negative_parts()
    up = qbrm_upper(band, psi_pos, xi, B) - qbrm_lower(band, psi_neg, xi)
    dn = qbrm_lower(band, psi_pos, xi) - qbrm_upper(band, psi_neg, xi, B)
    return ValueInterval(float(dn), float(up))
