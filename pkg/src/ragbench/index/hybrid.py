"""Weighted fusion of sparse and dense result lists."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ragbench.errors import InvalidInputError
from ragbench.index.dense import DenseIndex, dense_search
from ragbench.index.hits import ScoredHit, rank
from ragbench.index.sparse import SparseIndex, bm25_search

DENSE_WEIGHT = 0.75
SPARSE_WEIGHT = 0.25
CANDIDATE_FACTOR = 4


def minmax(hits: Sequence[ScoredHit]) -> dict[str, float]:
    """Scale scores to [0, 1]; a constant (or single-element) list maps to 1.0."""
    if not hits:
        return {}
    scores = [h.score for h in hits]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return {h.chunk_id: 1.0 for h in hits}
    return {h.chunk_id: (h.score - lo) / (hi - lo) for h in hits}


def fuse(sparse_hits: Sequence[ScoredHit], dense_hits: Sequence[ScoredHit], k: int,
         dense_weight: float = DENSE_WEIGHT, sparse_weight: float = SPARSE_WEIGHT) -> list[ScoredHit]:
    s = minmax(sparse_hits)
    d = minmax(dense_hits)
    fused = {cid: dense_weight * d.get(cid, 0.0) + sparse_weight * s.get(cid, 0.0)
             for cid in s.keys() | d.keys()}
    return rank(fused.items(), k, "fused")


def hybrid_search(query: str, query_vec: np.ndarray, sparse_idx: SparseIndex, dense_idx: DenseIndex,
                  k: int, candidate_factor: int = CANDIDATE_FACTOR) -> list[ScoredHit]:
    if k <= 0:
        raise InvalidInputError(f"k must be positive, got {k}")
    if candidate_factor <= 0:
        raise InvalidInputError("candidate_factor must be positive")
    if sparse_idx.chunk_ids != dense_idx.chunk_ids:
        raise InvalidInputError("sparse and dense indexes cover different chunk sets")
    pool = candidate_factor * k
    return fuse(bm25_search(query, sparse_idx, pool), dense_search(query_vec, dense_idx, pool), k)
