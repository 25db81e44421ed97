"""Per-example loss computation from prediction files.

Each metric produces one loss per example (never an average), so the
downstream band machinery applies directly.

Schemas:
  brier (CSV):             confidence,outcome       outcome in {0, 1}
  balanced_accuracy (JSONL): {"label": int, "prediction_set": [ints]}, class count k
  prec_recall (JSONL):       {"recommended": [...], "test": [...]}, mixing alpha
"""

from __future__ import annotations

import csv
import json
from typing import Optional

import numpy as np

from .errors import SchemaError
from .samples import LossSamples


def brier_losses(path: str) -> LossSamples:
    """(confidence - outcome)^2 per example; losses lie in [0, 1]."""
    values = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"confidence", "outcome"} <= set(reader.fieldnames):
            raise SchemaError("brier file needs 'confidence' and 'outcome' columns")
        for i, row in enumerate(reader, start=1):
            try:
                f = float(row["confidence"])
                o = float(row["outcome"])
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"row {i}: non-numeric entry") from exc
            if o not in (0.0, 1.0):
                raise SchemaError(f"row {i}: outcome must be 0 or 1, got {row['outcome']!r}")
            if not (0.0 <= f <= 1.0):
                raise SchemaError(f"row {i}: confidence must lie in [0, 1]")
            values.append((f - o) ** 2)
    if not values:
        raise SchemaError("no data rows")
    return LossSamples(np.asarray(values), support_max=1.0, nonneg=True)


def balanced_accuracy_losses(path: str, k: int) -> LossSamples:
    """1 - (sensitivity + specificity)/2 for prediction sets over k classes."""
    if k < 2:
        raise SchemaError("class count k must be >= 2")
    values = []
    with open(path, encoding="utf-8") as handle:
        for i, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                label = int(row["label"])
                pred = set(int(v) for v in row["prediction_set"])
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise SchemaError(f"row {i}: bad balanced-accuracy record") from exc
            sens = 1.0 if label in pred else 0.0
            false_positives = len(pred - {label})
            spec = (k - 1 - false_positives) / (k - 1)
            if spec < 0:
                raise SchemaError(f"row {i}: prediction set larger than class count")
            values.append(1.0 - 0.5 * (sens + spec))
    if not values:
        raise SchemaError("no data rows")
    return LossSamples(np.asarray(values), support_max=1.0, nonneg=True)


def precision_recall_losses(path: str, alpha: float = 0.5) -> LossSamples:
    """alpha * recall-loss^2 + (1-alpha) * precision-loss^2 per user."""
    if not (0.0 <= alpha <= 1.0):
        raise SchemaError("alpha must lie in [0, 1]")
    values = []
    with open(path, encoding="utf-8") as handle:
        for i, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                recommended = set(row["recommended"])
                test = set(row["test"])
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise SchemaError(f"row {i}: bad precision-recall record") from exc
            if not recommended or not test:
                raise SchemaError(f"row {i}: empty recommendation or test set")
            hits = len(recommended & test)
            l_r = 1.0 - hits / len(test)
            l_p = 1.0 - hits / len(recommended)
            values.append(alpha * l_r**2 + (1.0 - alpha) * l_p**2)
    if not values:
        raise SchemaError("no data rows")
    return LossSamples(np.asarray(values), support_max=1.0, nonneg=True)


def compute_losses(
    path: str, metric: str, k: Optional[int] = None, alpha: float = 0.5
) -> LossSamples:
    """Dispatch on the loss metric name."""
    if metric == "brier":
        return brier_losses(path)
    if metric == "balanced_accuracy":
        if k is None:
            raise SchemaError("balanced_accuracy needs the class count k")
        return balanced_accuracy_losses(path, k)
    if metric == "prec_recall":
        return precision_recall_losses(path, alpha)
    raise SchemaError(f"unknown loss metric: {metric}")
