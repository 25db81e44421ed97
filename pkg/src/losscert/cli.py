"""Command-line surface.

Subcommands: band, measure, optimize, select, coverage, lorenz.  Anything
structured comes from a JSON config file (--config); flags exist only for
paths, seed, delta and method, and override the config.  Exit codes:
0 success, 2 validation error, 3 divergence (unbounded upper tail).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional

import numpy as np

from . import measures as M
from .bands import band_from_json, band_to_json, build_band, var_bounds
from .coverage import parse_dist_spec, simulate_coverage
from .errors import DivergenceError, SchemaError
from .functionals import qbrm_lower, qbrm_upper
from .ingest import atomic_write, ingest
from .lossmetrics import compute_losses
from .optimizer import (
    OptimizerConfig,
    QbrmObjective,
    SumObjective,
    noncrossing_probability,
    split_optimize_apply,
)
from .samples import LossSamples, WeightFunction, order_statistics
from .selection import (
    HypothesisLossTable,
    ObjectiveSpec,
    ObjectiveTerm,
    empirical_band,
    select_hypothesis,
)

DEFAULT_DELTA = 0.05  # before statistical corrections for multiple tests


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        with open(args.config, encoding="utf-8") as handle:
            cfg = json.load(handle)
    for key in ("input", "output", "method", "delta", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg.setdefault("delta", DEFAULT_DELTA)
    return cfg


def _load_samples(cfg: dict) -> LossSamples:
    source = cfg["input"]
    if isinstance(source, str):
        source = {"path": source}
    if "predictions" in source:
        return compute_losses(
            source["predictions"],
            source["metric"],
            k=source.get("k"),
            alpha=source.get("alpha", 0.5),
        )
    loaded = ingest(
        source["path"],
        source.get("format", "csv"),
        support_max=source.get("support_max", cfg.get("support_max")),
        nonneg=source.get("nonneg", True),
    )
    if not isinstance(loaded, LossSamples):
        raise SchemaError("expected a losses file, found a hypothesis table")
    return loaded


def weight_from_dict(spec: dict) -> WeightFunction:
    kind = spec["kind"]
    if kind == "constant_one":
        return WeightFunction.constant_one()
    if kind == "cvar":
        return WeightFunction.cvar(float(spec["beta"]))
    if kind == "interval_uniform":
        return WeightFunction.interval_uniform(float(spec["beta_min"]), float(spec["beta_max"]))
    if kind == "linear":
        return WeightFunction.linear()
    if kind == "smoothed_median":
        return WeightFunction.smoothed_median(
            float(spec.get("beta", 0.5)), float(spec.get("spread", 0.01))
        )
    if kind == "piecewise_poly":
        return WeightFunction.piecewise_poly(
            [(float(lo), float(hi), tuple(c)) for lo, hi, c in spec["segments"]]
        )
    raise SchemaError(f"unknown weight kind: {kind}")


def _terms_from_config(cfg: dict) -> ObjectiveSpec:
    terms = []
    for t in cfg["objective"]["terms"]:
        psi = weight_from_dict(t["psi"]) if "psi" in t else None
        terms.append(
            ObjectiveTerm(
                measure=t["measure"],
                coefficient=float(t.get("coefficient", 1.0)),
                scope=t.get("scope", "population"),
                beta=t.get("beta"),
                eps=t.get("eps"),
                spread=t.get("spread"),
                psi=psi,
            )
        )
    return ObjectiveSpec(terms=tuple(terms))


def _band_options(cfg: dict) -> dict:
    opts = cfg.get("options", {})
    return {k: opts[k] for k in ("tol", "beta_min", "beta_max") if k in opts}


def cmd_band(args) -> int:
    cfg = _load_config(args)
    samples = _load_samples(cfg)
    band = build_band(samples, cfg.get("method", "berk_jones"), cfg["delta"], **_band_options(cfg))
    atomic_write(cfg["output"], band_to_json(band) + "\n")
    return 0


def _measure_record(band, spec: dict) -> dict:
    name = spec["measure"]
    params = {k: v for k, v in spec.items() if k != "measure"}
    flags = []
    bound_lo = None
    if name == "gini":
        hi = M.gini_upper(band)
    elif name == "extended_gini":
        hi = M.extended_gini_upper(band, float(spec["nu"]))
    elif name == "atkinson":
        hi = M.atkinson_upper(band, float(spec["eps"]), spec.get("x_min"))
    elif name == "hoover":
        hi = M.hoover_upper(band)
    elif name == "generalized_entropy":
        hi = M.generalized_entropy_upper(band, float(spec["alpha"]), spec.get("x_min"))
    elif name == "mean_range":
        hi = M.mean_range_upper(band, int(spec["k"]))
        flags.append("paper_formula_bound")
    elif name == "var":
        bound_lo, hi = var_bounds(band, float(spec["beta"]))
    elif name in ("mean", "cvar", "smoothed_median", "qbrm"):
        if name == "mean":
            psi = WeightFunction.constant_one()
        elif name == "cvar":
            psi = WeightFunction.cvar(float(spec["beta"]))
        elif name == "smoothed_median":
            psi = WeightFunction.smoothed_median(
                float(spec.get("beta", 0.5)), float(spec.get("spread", 0.01))
            )
        else:
            psi = weight_from_dict(spec["psi"])
            params = {"psi": spec["psi"]}
        hi = qbrm_upper(band, psi)
        bound_lo = qbrm_lower(band, psi)
    else:
        raise SchemaError(f"unknown measure: {name}")
    if name in ("gini", "extended_gini", "hoover") and M._mean_of_upper_inverse(band) <= 0.0:
        flags.append("degenerate_denominator")
    report = M.MeasureBoundReport(
        measure=name,
        params=params,
        bound_hi=float(hi),
        bound_lo=None if bound_lo is None else float(bound_lo),
        delta_effective=band.delta,
        method=band.method,
        n=band.n,
        flags=tuple(flags),
    )
    return report.to_dict()


def cmd_measure(args) -> int:
    cfg = _load_config(args)
    if "band" in cfg:
        with open(cfg["band"], encoding="utf-8") as handle:
            band = band_from_json(handle.read())
    else:
        samples = _load_samples(cfg)
        band = build_band(
            samples, cfg.get("method", "berk_jones"), cfg["delta"], **_band_options(cfg)
        )
    records = [_measure_record(band, spec) for spec in cfg["measures"]]
    atomic_write(cfg["output"], json.dumps(records) + "\n")
    return 0


def cmd_optimize(args) -> int:
    cfg = _load_config(args)
    samples = _load_samples(cfg)
    opts = dict(cfg.get("optimizer", {}))
    if "seed" in cfg:
        opts["rng_seed"] = int(cfg["seed"])
    config = OptimizerConfig(**opts)
    spec = _terms_from_config(cfg)

    def builder(stats, support_max):
        parts = [
            QbrmObjective(t.weight(), stats, support_max, coefficient=t.coefficient)
            for t in spec.terms
        ]
        return SumObjective(parts)

    trained, final_bound = split_optimize_apply(samples, builder, cfg["delta"], config)
    report = {
        "final_bound": final_bound,
        "gamma_star": trained.gamma_star,
        "delta": cfg["delta"],
        "n": samples.n,
        "m_train": trained.L_hat.n,
        "objective": trained.objective_spec,
        "probability": noncrossing_probability(trained.L_hat),
        "L_hat": [float(v) for v in trained.L_hat.L],
    }
    atomic_write(cfg["output"], json.dumps(report) + "\n")
    if cfg.get("log"):
        atomic_write(cfg["log"], trained.log_jsonl() + "\n")
    return 0


def cmd_select(args) -> int:
    cfg = _load_config(args)
    source = cfg["input"] if isinstance(cfg["input"], dict) else {"path": cfg["input"]}
    table = ingest(
        source["path"],
        source.get("format", "csv"),
        support_max=source.get("support_max", cfg.get("support_max")),
        nonneg=source.get("nonneg", True),
    )
    if not isinstance(table, HypothesisLossTable):
        raise SchemaError("expected a hypothesis table with h_<label> columns")
    report = select_hypothesis(
        table,
        _terms_from_config(cfg),
        cfg["delta"],
        cfg.get("method", "berk_jones"),
        **_band_options(cfg),
    )
    atomic_write(cfg["output"], json.dumps(report) + "\n")
    return 0


def cmd_coverage(args) -> int:
    cfg = _load_config(args)
    dist = parse_dist_spec(cfg["dist"])
    report = simulate_coverage(
        dist,
        cfg.get("method", "berk_jones"),
        cfg["delta"],
        int(cfg["n"]),
        int(cfg["trials"]),
        int(cfg.get("seed", 0)),
        **_band_options(cfg),
    )
    atomic_write(cfg["output"], json.dumps(report) + "\n")
    return 0


def cmd_lorenz(args) -> int:
    cfg = _load_config(args)
    samples = _load_samples(cfg)
    band = build_band(samples, cfg.get("method", "berk_jones"), cfg["delta"], **_band_options(cfg))
    t_spec = cfg.get("t_grid", 101)
    t_grid = np.linspace(0.0, 1.0, int(t_spec)) if isinstance(t_spec, int) else np.asarray(t_spec)
    intervals = M.lorenz_band(band, t_grid)
    emp_band = empirical_band(samples)
    empirical = M.lorenz_band(emp_band, t_grid)
    lines = ["t,lower,upper,empirical"]
    for t, iv, emp in zip(t_grid, intervals, empirical):
        lines.append(f"{float(t)!r},{iv.lo!r},{iv.hi!r},{emp.hi!r}")
    atomic_write(cfg["output"], "\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="losscert",
        description="Distribution-free loss-CDF bands and certified dispersion bounds",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in (
        ("band", cmd_band),
        ("measure", cmd_measure),
        ("optimize", cmd_optimize),
        ("select", cmd_select),
        ("coverage", cmd_coverage),
        ("lorenz", cmd_lorenz),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--input", help="input data path")
        p.add_argument("--output", help="output path")
        p.add_argument("--method", help="band method (dkw|berk_jones|truncated_bj)")
        p.add_argument("--delta", type=float, help="miscoverage budget")
        p.add_argument("--seed", type=int, help="rng seed")
        p.set_defaults(handler=handler)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SchemaError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
