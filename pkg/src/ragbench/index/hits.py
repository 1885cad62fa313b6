from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class ScoredHit:
    chunk_id: str
    score: float
    origin: str  # "sparse" | "dense" | "fused"


def rank(scores: Iterable[tuple[str, float]], n: int, origin: str) -> list[ScoredHit]:
    """Top-``n`` by score descending, ties broken by ascending chunk id."""
    ordered = sorted(scores, key=lambda kv: (-kv[1], kv[0]))
    return [ScoredHit(cid, float(s), origin) for cid, s in ordered[:n]]
