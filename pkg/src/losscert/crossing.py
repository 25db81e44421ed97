"""Exact noncrossing probabilities of uniform order statistics.

Computes P(for all i: U_(i) >= L_i) for sorted bound vectors L, the exact
gradient of that probability, and the DKW / Berk-Jones / truncated
Berk-Jones calibrations that choose L to spend a miscoverage budget delta.

The probability equals n! times the iterated integral

    v(L_1, ..., L_n, 1) = int_{L_n}^1 dx_n ... int_{L_1}^{x_2} dx_1 .

Writing V_j(x) for the inner j-fold volume, V_j is on [L_j, 1] a degree-j
polynomial whose Taylor coefficients at L_j are values of lower-order V's,
hence nonnegative.  Advancing all V_j values from one boundary to the next
is therefore a convolution with the exp-series kernel d^k/k!, with every
term nonnegative: the recursion is free of cancellation.  We carry the
vector in the scaled basis A[i] = V_i(t) * n^i * exp(-S) with a running
log-scale S, which keeps the entries inside float64 range for any n; the
kernel (n d)^k / k! is built in log space and trimmed to its numerically
relevant window.  Relative accuracy is ~1e-12 at n = 200 and ~1e-11 at
n = 2000 (validated against exact rational arithmetic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from .errors import CalibrationError
from .special import betaincinv


@dataclass(frozen=True)
class BoundVector:
    """A sorted vector 0 <= L_1 <= ... <= L_n <= 1 with its budget delta."""

    L: np.ndarray
    n: int
    delta: Optional[float] = None
    method: str = "custom"

    def __post_init__(self):
        arr = np.asarray(self.L, dtype=np.float64).copy()
        arr.setflags(write=False)
        if arr.ndim != 1 or arr.size == 0 or arr.size != self.n:
            raise ValueError("bound vector empty or length mismatch")
        if arr[0] < 0.0 or arr[-1] > 1.0 or np.any(np.diff(arr) < 0):
            raise ValueError("bound vector must be sorted within [0, 1]")
        if self.delta is not None and not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        object.__setattr__(self, "L", arr)


def _validate_levels(L: np.ndarray) -> np.ndarray:
    arr = np.asarray(L, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("bound vector must be a nonempty 1-d array")
    if arr[0] < 0.0 or arr[-1] > 1.0 or np.any(np.diff(arr) < 0):
        raise ValueError("bound vector must be sorted within [0, 1]")
    return arr


def _levels_of(L) -> np.ndarray:
    if isinstance(L, BoundVector):
        return L.L
    return _validate_levels(L)


_LF = np.zeros(1)


def _lf_table(size: int) -> np.ndarray:
    """Cached cumulative log-factorial table [log 0!, ..., log (size-1)!]."""
    global _LF
    if size > _LF.size:
        grow = max(size, 2 * _LF.size)
        _LF = np.concatenate(
            ([0.0], np.cumsum(np.log(np.arange(1, grow, dtype=np.float64))))
        )
    return _LF


def _kernel(nd: float, max_tap: int) -> Tuple[np.ndarray, int, float]:
    """Trimmed exp-series kernel (nd)^k / k!, max-normalized.

    Returns (kern, k_lo, log_shift) with kern[j] = (nd)^(k_lo+j)/(k_lo+j)!
    scaled by exp(-log_shift).  Taps with relative weight below ~1e-31 of
    the peak are dropped; the window always contains the mode because
    nd <= n = max_tap.
    """
    if nd <= 0.0:
        return np.ones(1), 0, 0.0
    half = 16.0 * math.sqrt(nd) + 120.0
    k_lo = max(0, int(nd - half))
    k_hi = min(max_tap, int(nd + half) + 1)
    lf = _lf_table(k_hi + 2)
    ks = np.arange(k_lo, k_hi + 1, dtype=np.float64)
    logk = ks * math.log(nd) - lf[k_lo : k_hi + 1]
    shift = float(logk.max())
    kern = np.exp(logk - shift)
    return kern, k_lo, shift


def _convolve_step(vec: np.ndarray, scale: float, d: float, n: int) -> Tuple[np.ndarray, float]:
    """Advance the scaled volume vector across a gap of width d >= 0."""
    if d <= 0.0:
        return vec, scale
    kern, k_lo, shift = _kernel(n * d, n)
    full = np.convolve(vec, kern)
    out = np.zeros_like(vec)
    out[k_lo:] = full[: vec.size - k_lo]
    scale += shift
    peak = out.max()
    if peak > 0.0 and (peak > 1e100 or peak < 1e-100):
        out = out / peak
        scale += math.log(peak)
    return out, scale


def _lower_pass(L: np.ndarray, collect_prefixes: bool = False):
    """Forward pass over the boundaries L_1 .. L_n, then up to 1.

    Returns (log_prob, log_prefixes) where log_prefixes[i-1] is the log of
    the (i-1)-point subproblem probability evaluated at L_i, i.e.
    log((i-1)! * V_{i-1}(L_i)); only filled when requested.
    """
    n = L.size
    logn = math.log(n)
    lf = _lf_table(n + 1)
    A = np.zeros(n + 1)
    A[0] = 1.0
    S = 0.0
    prefixes = np.full(n, -math.inf) if collect_prefixes else None
    t_prev = 0.0
    for j in range(1, n + 1):
        A, S = _convolve_step(A, S, float(L[j - 1]) - t_prev, n)
        t_prev = float(L[j - 1])
        if collect_prefixes:
            a = A[j - 1]
            if a > 0.0:
                prefixes[j - 1] = math.log(a) + S + lf[j - 1] - (j - 1) * logn
        A[j:] = 0.0
        if A[: j].max() == 0.0:
            return -math.inf, prefixes
    A, S = _convolve_step(A, S, 1.0 - t_prev, n)
    if A[n] <= 0.0:
        return -math.inf, prefixes
    log_p = math.log(A[n]) + S + lf[n] - n * logn
    return log_p, prefixes


def _upper_pass(M: np.ndarray) -> np.ndarray:
    """All prefix upper-boundary probabilities of one sorted vector M.

    Returns log_q of length n+1 with log_q[m] = log P(for all s <= m:
    U_(s) <= M_s) for m i.i.d. uniform points; log_q[0] = 0.
    """
    n = M.size
    logn = math.log(n)
    lf = _lf_table(n + 1)
    B = np.zeros(n + 1)
    B[0] = 1.0
    S = 0.0
    log_q = np.full(n + 1, -math.inf)
    log_q[0] = 0.0
    t_prev = 0.0
    for j in range(1, n + 1):
        B, S = _convolve_step(B, S, float(M[j - 1]) - t_prev, n)
        t_prev = float(M[j - 1])
        b = B[j]
        if b > 0.0:
            log_q[j] = math.log(b) + S + lf[j] - j * logn
        B[j - 1] = 0.0
        if B.max() == 0.0:
            break
    return log_q


def noncrossing_log_probability(L) -> float:
    """log P(for all i: U_(i) >= L_i); -inf when the probability underflows."""
    levels = _levels_of(L)
    log_p, _ = _lower_pass(levels)
    return min(log_p, 0.0)


def noncrossing_probability(L) -> float:
    """Exact P(for all i: U_(i) >= L_i) for a sorted bound vector."""
    return math.exp(noncrossing_log_probability(L))


def noncrossing_gradient(L) -> np.ndarray:
    """Exact gradient dP/dL_i, each component <= 0.

    Uses the factorization of the derivative of the iterated integral into
    the product of the leading sub-integral evaluated at L_i and the
    trailing sub-integral evaluated at 1; both families come out of one
    forward pass each (empty sub-integrals count as 1).
    """
    levels = _levels_of(L)
    n = levels.size
    _, log_pref = _lower_pass(levels, collect_prefixes=True)
    log_q = _upper_pass(1.0 - levels[::-1])
    lf = _lf_table(n + 1)
    i = np.arange(1, n + 1)
    log_mag = lf[n] - lf[i - 1] - lf[n - i] + log_pref + log_q[n - i]
    return -np.exp(log_mag)


def noncrossing_probability_and_gradient(L) -> Tuple[float, np.ndarray]:
    """The probability and its exact gradient in two passes (optimizer hot path)."""
    levels = _levels_of(L)
    n = levels.size
    log_p, log_pref = _lower_pass(levels, collect_prefixes=True)
    log_q = _upper_pass(1.0 - levels[::-1])
    lf = _lf_table(n + 1)
    i = np.arange(1, n + 1)
    log_mag = lf[n] - lf[i - 1] - lf[n - i] + log_pref + log_q[n - i]
    return math.exp(min(log_p, 0.0)), -np.exp(log_mag)


def calibrate_dkw(n: int, delta: float) -> BoundVector:
    """One-sided DKW bound vector: L_i = max(0, i/n - sqrt(ln(2/delta)/(2n)))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    radius = math.sqrt(math.log(2.0 / delta) / (2.0 * n))
    idx = np.arange(1, n + 1, dtype=np.float64)
    L = np.maximum(0.0, idx / n - radius)
    return BoundVector(L=L, n=n, delta=delta, method="dkw")


def _bj_levels(n: int, s: float, window: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Beta-quantile levels at tail level s, optionally truncated to a window.

    The i-th level is the s-quantile of Beta(i, n-i+1), the law of U_(i).
    With a window (i_min, i_max), levels below the window are 0 and levels
    above it repeat the window's top level (free of probability cost since
    U_(i) >= U_(i_max) always).
    """
    idx = np.arange(1, n + 1, dtype=np.float64)
    if window is None:
        L = np.atleast_1d(np.asarray(betaincinv(idx, n - idx + 1.0, s), dtype=np.float64))
    else:
        i_min, i_max = window
        L = np.zeros(n)
        sub = np.arange(i_min, i_max + 1, dtype=np.float64)
        L[i_min - 1 : i_max] = betaincinv(sub, n - sub + 1.0, s)
        L[i_max:] = L[i_max - 1]
    # the exact levels are increasing in i; iron out 1-ulp solver wiggles
    return np.minimum(np.maximum.accumulate(L), 1.0)


def _calibrate_tail_level(
    n: int,
    delta: float,
    tol: float,
    window: Optional[Tuple[int, int]],
    method: str,
) -> BoundVector:
    target = 1.0 - delta
    s_lo, p_lo = 0.0, 1.0  # s = 0 gives L = 0 and probability 1
    s_hi = 1.0
    for _ in range(200):
        if p_lo <= target + tol:
            L = _bj_levels(n, s_lo, window) if s_lo > 0.0 else np.zeros(n)
            return BoundVector(L=L, n=n, delta=delta, method=method)
        s_mid = 0.5 * (s_lo + s_hi)
        p_mid = noncrossing_probability(_bj_levels(n, s_mid, window))
        if p_mid >= target:
            s_lo, p_lo = s_mid, p_mid
        else:
            s_hi = s_mid
    raise CalibrationError("calibration did not converge")


@lru_cache(maxsize=128)
def calibrate_berk_jones(n: int, delta: float, tol: float = 1e-9) -> BoundVector:
    """Berk-Jones bound vector: equalized Beta tail levels across all i.

    Finds s* by bisection so that the noncrossing probability of
    L_i(s*) = BetaInv(s*; i, n-i+1) lands in [1-delta, 1-delta+tol];
    never returns a vector with probability below 1-delta.  Results are
    cached (the vectors are immutable and safe to share).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _calibrate_tail_level(n, delta, tol, None, "berk_jones")


@lru_cache(maxsize=128)
def calibrate_truncated_bj(
    n: int, delta: float, beta_min: float, beta_max: float, tol: float = 1e-9
) -> BoundVector:
    """Berk-Jones constraints focused on order statistics with i/n in a window.

    Below the window L_i = 0; above it L_i repeats the window top.  The
    freed probability budget makes the in-window levels strictly tighter
    than the full Berk-Jones levels at the same delta.
    """
    if not (0.0 <= beta_min < beta_max <= 1.0):
        raise ValueError("need 0 <= beta_min < beta_max <= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    i_min = max(1, math.ceil(beta_min * n - 1e-12))
    i_max = min(n, math.floor(beta_max * n + 1e-12))
    if i_min > i_max:
        raise ValueError("truncation window contains no order statistics")
    return _calibrate_tail_level(n, delta, tol, (i_min, i_max), "truncated_bj")


def mc_noncrossing_oracle(
    L, trials: int, seed: int, block_size: int = 65536
) -> Tuple[float, float]:
    """Monte Carlo estimate of the noncrossing probability.

    Simulates sorted uniform samples in deterministic seed-split blocks
    (order-independent reduction, so blocks may run in any order) and
    returns (estimate, binomial standard error).
    """
    levels = _levels_of(L)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = levels.size
    n_blocks = (trials + block_size - 1) // block_size
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    hits = 0
    remaining = trials
    for child in children:
        m = min(block_size, remaining)
        remaining -= m
        rng = np.random.default_rng(child)
        u = np.sort(rng.random((m, n)), axis=1)
        hits += int(np.sum(np.all(u >= levels, axis=1)))
    est = hits / trials
    se = math.sqrt(est * (1.0 - est) / trials)
    return est, se
