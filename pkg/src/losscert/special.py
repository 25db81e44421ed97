"""Regularized incomplete beta function and its inverse, self-contained.

The band calibrations need Beta(i, n-i+1) CDFs and quantiles for every order
statistic at once, so both routines are vectorized over numpy arrays.  The
CDF uses the classic continued fraction (modified Lentz); the inverse is a
bracketed Newton iteration.  Accuracy target is 1e-12 on [0, 1].
"""

from __future__ import annotations

import math

import numpy as np

_TINY = 1e-300
_CF_EPS = 3e-16
_CF_MAX_ITER = 400

_logfact = np.zeros(1)


def log_factorial(k):
    """log(k!) for nonnegative integer k (scalar or array), from a cached table."""
    global _logfact
    karr = np.asarray(k, dtype=np.int64)
    if np.any(karr < 0):
        raise ValueError("log_factorial requires k >= 0")
    kmax = int(karr.max(initial=0))
    if kmax >= _logfact.size:
        size = max(kmax + 1, 2 * _logfact.size)
        _logfact = np.concatenate(
            ([0.0], np.cumsum(np.log(np.arange(1, size, dtype=np.float64))))
        )
    out = _logfact[karr]
    return float(out) if np.isscalar(k) or karr.ndim == 0 else out


def _lbeta(a, b):
    """log B(a, b); uses the factorial table when both arguments are integral."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.all(a == np.floor(a)) and np.all(b == np.floor(b)) and np.all(a >= 1) and np.all(b >= 1):
        ai = a.astype(np.int64)
        bi = b.astype(np.int64)
        return log_factorial(ai - 1) + log_factorial(bi - 1) - log_factorial(ai + bi - 1)
    lg = np.frompyfunc(math.lgamma, 1, 1)
    return (lg(a) + lg(b) - lg(a + b)).astype(np.float64)


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta (Lentz), elementwise."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = h * d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if m % 4 == 0 and np.all(np.abs(delta - 1.0) < _CF_EPS):
            break
    return h


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b), vectorized.

    a, b > 0 and x in [0, 1]; broadcasting applies.
    """
    a, b, x = np.broadcast_arrays(
        np.asarray(a, dtype=np.float64),
        np.asarray(b, dtype=np.float64),
        np.asarray(x, dtype=np.float64),
    )
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("betainc requires a > 0 and b > 0")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("betainc requires x in [0, 1]")
    out = np.empty_like(x)
    interior = (x > 0.0) & (x < 1.0)
    out[x <= 0.0] = 0.0
    out[x >= 1.0] = 1.0
    if np.any(interior):
        xa = x[interior]
        aa = a[interior]
        bb = b[interior]
        lnfront = aa * np.log(xa) + bb * np.log1p(-xa) - _lbeta(aa, bb)
        front = np.exp(lnfront)
        direct = xa < (aa + 1.0) / (aa + bb + 2.0)
        res = np.empty_like(xa)
        if np.any(direct):
            res[direct] = front[direct] * _betacf(aa[direct], bb[direct], xa[direct]) / aa[direct]
        flipped = ~direct
        if np.any(flipped):
            res[flipped] = 1.0 - front[flipped] * _betacf(
                bb[flipped], aa[flipped], 1.0 - xa[flipped]
            ) / bb[flipped]
        out[interior] = np.clip(res, 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def betaincinv(a, b, p):
    """Inverse of ``betainc`` in x: smallest x with I_x(a, b) >= p.

    Bracketed Newton; falls back to bisection whenever a Newton step leaves
    the current bracket.
    """
    a, b, p = np.broadcast_arrays(
        np.asarray(a, dtype=np.float64),
        np.asarray(b, dtype=np.float64),
        np.asarray(p, dtype=np.float64),
    )
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("betaincinv requires p in [0, 1]")
    shape = p.shape
    a = np.atleast_1d(a).ravel()
    b = np.atleast_1d(b).ravel()
    pf = np.atleast_1d(p).ravel()
    lnb = _lbeta(a, b)
    # matched-moment start, replaced by the exact leading-order tail
    # expansion where p is extreme (I_x ~ x^a / (a B(a,b)) as x -> 0)
    x = a / (a + b)
    pc = np.clip(pf, 1e-300, 1.0 - 1e-16)
    with np.errstate(over="ignore"):
        low_tail = np.exp((np.log(pc) + np.log(a) + lnb) / a)
        high_tail = 1.0 - np.exp((np.log1p(-pc) + np.log(b) + lnb) / b)
    x = np.where((pf < 0.05) & (low_tail < x), low_tail, x)
    x = np.where((pf > 0.95) & (high_tail > x), high_tail, x)
    x = np.clip(x, 1e-14, 1.0 - 1e-14)
    lo = np.zeros_like(pf)
    hi = np.ones_like(pf)
    active = np.arange(pf.size)
    for _ in range(120):
        aa, bb, pp = a[active], b[active], pf[active]
        xa, la, ha = x[active], lo[active], hi[active]
        f = betainc(aa, bb, xa) - pp
        la = np.where(f < 0.0, xa, la)
        ha = np.where(f > 0.0, xa, ha)
        xs = np.clip(xa, 1e-300, 1.0 - 1e-16)
        logpdf = (aa - 1.0) * np.log(xs) + (bb - 1.0) * np.log1p(-xs) - lnb[active]
        pdf = np.exp(logpdf)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / pdf
        xn = xa - step
        bad = ~np.isfinite(xn) | (xn <= la) | (xn >= ha)
        xn = np.where(bad, 0.5 * (la + ha), xn)
        f_scale = np.maximum(np.minimum(pp, 1.0 - pp), 1e-300)
        done_f = np.abs(f) < 1e-13 * f_scale
        xn = np.where(done_f, xa, xn)  # converged in f: stay at the evaluated point
        done = done_f | (np.abs(xn - xa) < 1e-15 + 1e-13 * np.abs(xn))
        x[active] = xn
        lo[active] = la
        hi[active] = ha
        active = active[~done]
        if active.size == 0:
            break
    x = np.where(pf <= 0.0, 0.0, x)
    x = np.where(pf >= 1.0, 1.0, x)
    x = x.reshape(shape)
    if x.ndim == 0:
        return float(x)
    return x
