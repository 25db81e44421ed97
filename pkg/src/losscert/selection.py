"""Hypothesis selection with multiple-testing corrections.

Builds one band per (hypothesis, group) at the Bonferroni-corrected budget,
evaluates a composite objective bound per hypothesis (reusing each band for
every term it touches, so one band event certifies them all), and selects
the hypothesis with the smallest certified objective.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bands import build_band, exact_plugin_band, var_bounds
from .errors import DivergenceError
from .functionals import ValueInterval, qbrm_interval, qbrm_lower, qbrm_upper
from .measures import (
    GroupBounds,
    atkinson_upper,
    gini_upper,
    max_pairwise_diff_upper,
)
from .samples import CdfBand, LossSamples, WeightFunction, order_statistics

POPULATION = "population"

_QBRM_MEASURES = {"mean", "qbrm", "cvar", "smoothed_median"}
_SCOPES = {"population", "expectation_over_groups", "max_pairwise_group_diff"}


@dataclass(frozen=True)
class ObjectiveTerm:
    """One term of a selection objective: coefficient * scope(measure)."""

    measure: str
    coefficient: float = 1.0
    scope: str = POPULATION
    beta: Optional[float] = None
    eps: Optional[float] = None
    spread: Optional[float] = None
    psi: Optional[WeightFunction] = None

    def __post_init__(self):
        if self.coefficient < 0 or not math.isfinite(self.coefficient):
            raise ValueError("term coefficients must be finite and nonnegative")
        if self.scope not in _SCOPES:
            raise ValueError(f"unknown scope: {self.scope}")
        known = _QBRM_MEASURES | {"gini", "atkinson", "var"}
        if self.measure not in known:
            raise ValueError(f"unknown measure: {self.measure}")
        if self.measure in ("gini", "atkinson") and self.scope == "max_pairwise_group_diff":
            raise ValueError(f"{self.measure} has no two-sided form for diff scopes")

    def weight(self) -> WeightFunction:
        if self.measure == "mean":
            return WeightFunction.constant_one()
        if self.measure == "cvar":
            if self.beta is None:
                raise ValueError("cvar term needs beta")
            return WeightFunction.cvar(self.beta)
        if self.measure == "smoothed_median":
            return WeightFunction.smoothed_median(
                self.beta if self.beta is not None else 0.5,
                self.spread if self.spread is not None else 0.01,
            )
        if self.measure == "qbrm":
            if self.psi is None:
                raise ValueError("qbrm term needs a weight function")
            return self.psi
        raise ValueError(f"{self.measure} is not a quantile-weighted measure")

    def label(self) -> str:
        bits = [self.measure]
        for name in ("beta", "eps", "spread"):
            v = getattr(self, name)
            if v is not None:
                bits.append(f"{name}={v:g}")
        return "(".join([bits[0], ",".join(bits[1:])]) + ")" if len(bits) > 1 else bits[0]


@dataclass(frozen=True)
class ObjectiveSpec:
    terms: Tuple[ObjectiveTerm, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("objective needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True)
class HypothesisLossTable:
    """Shared examples with one loss column per hypothesis."""

    losses: np.ndarray  # (n_examples, n_hypotheses)
    labels: Tuple[str, ...]
    group: Optional[Tuple[str, ...]] = None
    support_max: Optional[float] = None
    nonneg: bool = True

    def __post_init__(self):
        arr = np.asarray(self.losses, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("hypothesis table must be a nonempty 2-d array")
        if len(self.labels) != arr.shape[1]:
            raise ValueError("one label per hypothesis column required")
        if self.group is not None and len(self.group) != arr.shape[0]:
            raise ValueError("group labels must match example count")
        if not np.all(np.isfinite(arr)):
            raise ValueError("losses must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "losses", arr)
        object.__setattr__(self, "labels", tuple(str(v) for v in self.labels))

    def column(self, j: int) -> LossSamples:
        return LossSamples(
            self.losses[:, j],
            group=self.group,
            support_max=self.support_max,
            nonneg=self.nonneg,
        )

    def num_groups(self) -> int:
        return len(set(self.group)) if self.group is not None else 1


def corrected_delta(delta: float, num_hypotheses: int, num_groups: int) -> float:
    """Bonferroni budget per (hypothesis, group) band."""
    if num_hypotheses < 1 or num_groups < 1:
        raise ValueError("counts must be >= 1")
    return delta / (num_hypotheses * num_groups)


def _term_upper(term: ObjectiveTerm, band: CdfBand) -> float:
    if term.measure in _QBRM_MEASURES:
        return qbrm_upper(band, term.weight())
    if term.measure == "gini":
        return gini_upper(band)
    if term.measure == "atkinson":
        if term.eps is None:
            raise ValueError("atkinson term needs eps")
        return atkinson_upper(band, term.eps)
    if term.measure == "var":
        if term.beta is None:
            raise ValueError("var term needs beta")
        return var_bounds(band, term.beta)[1]
    raise ValueError(f"unknown measure: {term.measure}")


def _term_interval(term: ObjectiveTerm, band: CdfBand) -> ValueInterval:
    if term.measure in _QBRM_MEASURES:
        return qbrm_interval(band, term.weight())
    if term.measure == "var":
        lo, hi = var_bounds(band, term.beta)
        return ValueInterval(lo, hi)
    raise ValueError(f"{term.measure} has no two-sided form for diff scopes")


def evaluate_objective(
    spec: ObjectiveSpec,
    per_group_bands: Dict[str, CdfBand],
    group_weights: Optional[Dict[str, float]] = None,
) -> Tuple[float, List[dict]]:
    """Certified upper bound on the composite objective, with a breakdown.

    Population terms read the single population band; group-expectation
    terms average per-group uppers; max-pairwise terms combine per-group
    two-sided intervals.  Raises with the term named when a band cannot
    support it (e.g. a missing support bound).
    """
    if not per_group_bands:
        raise ValueError("no bands supplied")
    if group_weights is None:
        group_weights = {g: 1.0 / len(per_group_bands) for g in per_group_bands}
    total = 0.0
    breakdown = []
    for term in spec.terms:
        try:
            if term.scope == "population":
                if POPULATION in per_group_bands:
                    band = per_group_bands[POPULATION]
                elif len(per_group_bands) == 1:
                    band = next(iter(per_group_bands.values()))
                else:
                    raise ValueError("population scope needs a population band")
                value = _term_upper(term, band)
            elif term.scope == "expectation_over_groups":
                value = sum(
                    group_weights[g] * _term_upper(term, b)
                    for g, b in per_group_bands.items()
                    if g != POPULATION
                )
            else:  # max_pairwise_group_diff
                intervals = {
                    g: _term_interval(term, b)
                    for g, b in per_group_bands.items()
                    if g != POPULATION
                }
                weights = {g: 1.0 / len(intervals) for g in intervals}
                value = max_pairwise_diff_upper(GroupBounds(intervals, weights), "abs")
        except DivergenceError as exc:
            raise DivergenceError(f"term '{term.label()}': {exc}") from exc
        total += term.coefficient * value
        breakdown.append(
            {
                "measure": term.label(),
                "scope": term.scope,
                "coefficient": term.coefficient,
                "upper": value,
            }
        )
    return total, breakdown


def empirical_band(samples: LossSamples) -> CdfBand:
    """The empirical CDF as an exact-plugin band (plug-in evaluations)."""
    stats = order_statistics(samples)
    xs = stats.sorted
    levels = np.arange(1, stats.n + 1, dtype=np.float64) / stats.n
    keep = np.concatenate([xs[1:] != xs[:-1], [True]])
    return exact_plugin_band(xs[keep], levels[keep])


def empirical_measure(samples: LossSamples, term: ObjectiveTerm) -> float:
    """Plug-in value of one term measure using the empirical CDF as the band."""
    if samples.n == 0:
        raise ValueError("no samples")
    return _term_upper(term, empirical_band(samples))


def _empirical_objective(spec: ObjectiveSpec, samples: LossSamples) -> List[dict]:
    rows = []
    grouped = samples.by_group() if samples.group is not None else {}
    for term in spec.terms:
        if term.scope == "population":
            value = empirical_measure(samples, term)
        elif term.scope == "expectation_over_groups":
            parts = grouped or {POPULATION: samples}
            value = float(
                np.mean([empirical_measure(s, term) for s in parts.values()])
            )
        else:
            parts = grouped or {POPULATION: samples}
            vals = {g: empirical_measure(s, term) for g, s in parts.items()}
            keys = sorted(vals)
            value = max(
                abs(vals[a] - vals[b]) for i, a in enumerate(keys) for b in keys[i + 1 :]
            ) if len(keys) > 1 else 0.0
        rows.append({"measure": term.label(), "scope": term.scope, "value": value})
    return rows


def select_hypothesis(
    table: HypothesisLossTable,
    spec: ObjectiveSpec,
    delta: float,
    method: str = "berk_jones",
    **band_options,
) -> dict:
    """Pick the hypothesis with the smallest certified objective bound.

    Builds bands once per (hypothesis, group) at the corrected budget and
    reuses them across terms.  A failing hypothesis (e.g. divergent bound)
    is marked infeasible and skipped, never poisoning the run.  Ties break
    toward the lower hypothesis index.
    """
    n_hyp = len(table.labels)
    delta_corr = corrected_delta(delta, n_hyp, table.num_groups())
    needs_population = any(t.scope == "population" for t in spec.terms)
    rows = []
    best_idx: Optional[int] = None
    best_total = math.inf
    for j, label in enumerate(table.labels):
        samples = table.column(j)
        row = {"label": label, "total_upper": None, "per_term": [], "empirical": [], "feasible": False}
        try:
            bands: Dict[str, CdfBand] = {}
            if table.group is not None:
                for g, s in samples.by_group().items():
                    bands[g] = build_band(s, method, delta_corr, **band_options)
            if needs_population or not bands:
                bands[POPULATION] = build_band(samples, method, delta_corr, **band_options)
            total, breakdown = evaluate_objective(spec, bands)
            row.update(total_upper=total, per_term=breakdown, feasible=True)
            row["empirical"] = _empirical_objective(spec, samples)
            if total < best_total:
                best_total = total
                best_idx = j
        except (ValueError, DivergenceError) as exc:
            row["error"] = str(exc)
        rows.append(row)
    return {
        "selected": table.labels[best_idx] if best_idx is not None else None,
        "delta": delta,
        "delta_corrected": delta_corr,
        "method": method,
        "hypotheses": rows,
    }


def selection_report_json(report: dict) -> str:
    return json.dumps(report)
