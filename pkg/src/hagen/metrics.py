"""Binarization and F1 scoring for occurrence forecasts.

Micro-F1 pools true/false positives and negatives over every (region,
category, slot) cell; Macro-F1 averages per-category F1 with zero-support
categories scored 0 and flagged rather than silently skipped.
"""

from __future__ import annotations

import csv
import datetime
import json
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DataError


def binarize(probs, threshold=0.5):
    """Probabilities to hard labels: 1 where prob >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must be in (0, 1), got {threshold}")
    p = np.asarray(probs, dtype=np.float64)
    if ((p < 0.0) | (p > 1.0)).any():
        raise DataError("probabilities must lie in [0, 1]")
    return (p >= threshold).astype(np.uint8)


@dataclass
class CategoryScore:
    category: int
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass
class MetricsReport:
    """Micro / macro F1 plus per-category counts."""

    micro_f1: float
    macro_f1: float
    per_category: list
    zero_support: list

    def to_dict(self):
        return {
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "per_category": [
                {"category_id": s.category, "f1": s.f1, "tp": s.tp, "fp": s.fp, "fn": s.fn}
                for s in self.per_category
            ],
            "zero_support": list(self.zero_support),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def write_per_category_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["category_id", "f1", "tp", "fp", "fn"])
            for s in self.per_category:
                writer.writerow([s.category, repr(s.f1), s.tp, s.fp, s.fn])


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def f1_scores(pred, truth, category_axis=1):
    """Score binary predictions against binary truth.

    Both arrays must share a shape with the category axis at `category_axis`
    (default layout (N, C) or (N, C, T)).  Categories with no positives in
    either array get F1 = 0 and are listed in zero_support.
    """
    p = np.asarray(pred)
    y = np.asarray(truth)
    if p.shape != y.shape:
        raise DataError(f"prediction shape {p.shape} != truth shape {y.shape}")
    for name, arr in (("predictions", p), ("truth", y)):
        if not np.isin(arr, (0, 1)).all():
            raise DataError(f"{name} must be binary 0/1")
    p = p.astype(np.int64)
    y = y.astype(np.int64)
    axes = tuple(i for i in range(p.ndim) if i != category_axis)

    tp = (p & y).sum(axis=axes)
    fp = (p & (1 - y)).sum(axis=axes)
    fn = ((1 - p) & y).sum(axis=axes)

    per_category = []
    zero_support = []
    for cat in range(p.shape[category_axis]):
        score = CategoryScore(cat, _f1(tp[cat], fp[cat], fn[cat]),
                              int(tp[cat]), int(fp[cat]), int(fn[cat]))
        per_category.append(score)
        if tp[cat] + fp[cat] + fn[cat] == 0:
            zero_support.append(cat)

    micro = _f1(int(tp.sum()), int(fp.sum()), int(fn.sum()))
    macro = float(np.mean([s.f1 for s in per_category]))
    return MetricsReport(micro_f1=micro, macro_f1=macro,
                         per_category=per_category, zero_support=zero_support)


def slot_months(slot_indices, origin_timestamp, slot_duration_hours):
    """Calendar month label ("YYYY-MM") for each slot index."""
    try:
        origin = datetime.datetime.fromisoformat(origin_timestamp)
    except (TypeError, ValueError):
        raise DataError(
            f"origin timestamp {origin_timestamp!r} is not ISO-8601"
        ) from None
    out = []
    for t in np.asarray(slot_indices):
        moment = origin + datetime.timedelta(hours=float(t) * slot_duration_hours)
        out.append(f"{moment.year:04d}-{moment.month:02d}")
    return out


def monthly_f1(pred, truth, slot_indices, origin_timestamp, slot_duration_hours):
    """Per-calendar-month scoring of (S, N, C) predictions.

    Slots are grouped by the month their start falls in; each group is scored
    independently.  Returns an ordered list of (month, MetricsReport).
    """
    p = np.asarray(pred)
    y = np.asarray(truth)
    months = slot_months(slot_indices, origin_timestamp, slot_duration_hours)
    if len(months) != p.shape[0]:
        raise DataError(
            f"{len(months)} slot labels for {p.shape[0]} prediction slices"
        )
    seen = []
    for m in months:
        if m not in seen:
            seen.append(m)
    out = []
    for m in seen:
        idx = [i for i, label in enumerate(months) if label == m]
        out.append((m, f1_scores(p[idx], y[idx], category_axis=2)))
    return out
