"""File ingestion and emission for the CLI.

CSV schemas (UTF-8, header required):
  losses:            loss[,group]
  hypothesis tables: example_id[,group],h_<label>[,h_<label>...]

JSONL mirrors the same shapes: {"loss": ..., "group": ...} per line, or
{"example_id": ..., "group": ..., "h_<label>": ...}.

NaN/inf values are rejected with 1-based data row numbers.  Writers are
deterministic (repr-format floats), so write -> read -> write is
byte-stable.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import SchemaError
from .samples import LossSamples
from .selection import HypothesisLossTable


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise SchemaError(f"row {row}: column '{column}' is not numeric: {text!r}") from exc
    if not math.isfinite(value):
        raise SchemaError(f"row {row}: column '{column}' is not finite: {text!r}")
    return value


def atomic_write(path: str, text: str) -> None:
    """Write via a temp file plus rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_losscert_")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows_from_path(path: str, fmt: str) -> Tuple[List[str], List[dict]]:
    """Normalized (fieldnames, rows) from a CSV or JSONL file."""
    if fmt == "csv":
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None:
                raise SchemaError("missing header row")
            fields = [f.strip() for f in reader.fieldnames]
            rows = [dict(zip(fields, (v if v is not None else "" for v in r.values()))) for r in reader]
        return fields, rows
    if fmt == "jsonl":
        rows = []
        fields: List[str] = []
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"row {lineno}: invalid JSON") from exc
                rows.append(obj)
                for key in obj:
                    if key not in fields:
                        fields.append(key)
        return fields, rows
    raise SchemaError(f"unknown format: {fmt}")


def ingest(
    path: str,
    fmt: str = "csv",
    support_max: Optional[float] = None,
    nonneg: bool = True,
) -> Union[LossSamples, HypothesisLossTable]:
    """Load losses or a hypothesis table, validating the schema.

    A 'loss' column yields LossSamples; 'h_<label>' columns yield a
    HypothesisLossTable.  Bad rows are reported by number.
    """
    fields, rows = _rows_from_path(path, fmt)
    if not rows:
        raise SchemaError("no data rows")
    hyp_columns = [f for f in fields if f.startswith("h_")]
    has_group = "group" in fields
    if "loss" in fields:
        values, groups = [], []
        for i, row in enumerate(rows, start=1):
            raw = row.get("loss", "")
            values.append(
                _parse_float(str(raw), i, "loss") if not isinstance(raw, float) else _finite(raw, i, "loss")
            )
            if has_group:
                groups.append(str(row.get("group", "")))
        return LossSamples(
            np.asarray(values),
            group=tuple(groups) if has_group else None,
            support_max=support_max,
            nonneg=nonneg,
        )
    if hyp_columns:
        labels = [c[2:] for c in hyp_columns]
        data = np.empty((len(rows), len(hyp_columns)))
        groups = []
        for i, row in enumerate(rows, start=1):
            for j, col in enumerate(hyp_columns):
                raw = row.get(col, "")
                data[i - 1, j] = (
                    _parse_float(str(raw), i, col) if not isinstance(raw, float) else _finite(raw, i, col)
                )
            if has_group:
                groups.append(str(row.get("group", "")))
        return HypothesisLossTable(
            losses=data,
            labels=tuple(labels),
            group=tuple(groups) if has_group else None,
            support_max=support_max,
            nonneg=nonneg,
        )
    raise SchemaError("expected a 'loss' column or 'h_<label>' columns")


def _finite(value: float, row: int, column: str) -> float:
    if not math.isfinite(value):
        raise SchemaError(f"row {row}: column '{column}' is not finite: {value!r}")
    return float(value)


def write_losses_csv(samples: LossSamples, path: str) -> None:
    """Deterministic losses CSV (round-trips byte-stably through ingest)."""
    lines = ["loss,group" if samples.group is not None else "loss"]
    for i, v in enumerate(samples.values):
        if samples.group is not None:
            lines.append(f"{float(v)!r},{samples.group[i]}")
        else:
            lines.append(f"{float(v)!r}")
    atomic_write(path, "\n".join(lines) + "\n")
