"""Accuracy, instance-level strict micro-F1, and report arithmetic."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal
from typing import Collection, Hashable, Mapping, Sequence

from ragbench.errors import InvalidInputError


def accuracy(preds: Sequence[Hashable | None], golds: Sequence[Hashable]) -> float:
    """Fraction of exact matches; a ``None`` prediction is always wrong."""
    if len(preds) != len(golds):
        raise InvalidInputError(f"{len(preds)} predictions for {len(golds)} gold answers")
    if not golds:
        return 0.0
    return sum(1 for p, g in zip(preds, golds) if p is not None and p == g) / len(golds)


def micro_f1(preds: Mapping[str, Collection], golds: Mapping[str, Collection]) -> dict[str, float]:
    """Strict micro-averaged P/R/F1 over per-sample entity sets keyed by sample id."""
    if preds.keys() != golds.keys():
        missing = sorted(golds.keys() - preds.keys())[:5]
        extra = sorted(preds.keys() - golds.keys())[:5]
        raise InvalidInputError(f"prediction/gold ids misaligned (missing {missing}, extra {extra})")
    tp = n_pred = n_gold = 0
    for sid, gold in golds.items():
        pred_set, gold_set = set(preds[sid]), set(gold)
        tp += len(pred_set & gold_set)
        n_pred += len(pred_set)
        n_gold += len(gold_set)
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def round1(x: float) -> float:
    """One decimal, half away from zero, on the shortest decimal repr of ``x``."""
    return float(Decimal(repr(x)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def mean(values: Sequence[float]) -> float:
    if not values:
        raise InvalidInputError("mean of no values")
    return sum(values) / len(values)


def relative_change(new: float, old: float) -> float:
    if old == 0:
        raise InvalidInputError("relative change against zero baseline")
    return round1(100.0 * (new - old) / old)
