"""Sparse (BM25), dense (exact / HNSW) and hybrid retrieval indexes."""

from ragbench.index.dense import (
    EXACT,
    HNSW,
    DenseIndex,
    HNSWParams,
    build_dense,
    dense_search,
    load_dense,
    save_dense,
)
from ragbench.index.hits import ScoredHit
from ragbench.index.hybrid import fuse, hybrid_search, minmax
from ragbench.index.sparse import SparseIndex, bm25_search, build_sparse, load_sparse, save_sparse

__all__ = [
    "EXACT",
    "HNSW",
    "DenseIndex",
    "HNSWParams",
    "ScoredHit",
    "SparseIndex",
    "bm25_search",
    "build_dense",
    "build_sparse",
    "dense_search",
    "fuse",
    "hybrid_search",
    "load_dense",
    "load_sparse",
    "minmax",
    "save_dense",
    "save_sparse",
]
