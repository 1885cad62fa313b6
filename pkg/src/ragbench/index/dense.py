"""Dense vector index: flat exact search or an HNSW graph.

Binary layout (little-endian)::

    u32 dim | u64 count | u8 mode (0 exact, 1 hnsw)
    count x { u32 id_len | id_len bytes UTF-8 | dim x f32 }
    hnsw only:
    u32 M | u32 ef_construction | u32 ef_search | i64 entry
    count x { u32 level | (level + 1) x { u32 n | n x u32 neighbor } }
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ragbench.corpus import Chunk
from ragbench.errors import InvalidInputError, ParseError
from ragbench.index.hits import ScoredHit, rank
from ragbench.index.hnsw import HNSWGraph

EXACT = "exact"
HNSW = "hnsw"
_MODE_CODES = {EXACT: 0, HNSW: 1}
EMBED_BATCH = 64


@dataclass(frozen=True)
class HNSWParams:
    M: int = 16
    ef_construction: int = 200
    ef_search: int = 128


@dataclass
class DenseIndex:
    ids: list[str]
    vectors: np.ndarray  # (count, dim), unit rows, float32-representable
    mode: str = EXACT
    params: HNSWParams = field(default_factory=HNSWParams)
    graph: HNSWGraph | None = None

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1]) if self.vectors.ndim == 2 else 0

    @property
    def chunk_ids(self) -> frozenset[str]:
        return frozenset(self.ids)

    def __len__(self) -> int:
        return len(self.ids)


def _f32(mat: np.ndarray) -> np.ndarray:
    # round through float32 so an index reloaded from disk scores identically
    return np.asarray(mat, dtype=np.float32).astype(np.float64)


def from_vectors(ids: Sequence[str], vectors: np.ndarray, mode: str = EXACT,
                 params: HNSWParams | None = None, seed: int = 0) -> DenseIndex:
    if mode not in _MODE_CODES:
        raise InvalidInputError(f"unknown dense mode {mode!r}")
    params = params or HNSWParams()
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(ids) != len(vectors):
        raise InvalidInputError("ids and vectors differ in length")
    if len(set(ids)) != len(ids):
        raise InvalidInputError("duplicate ids in dense index")
    if len(vectors):
        # cosine similarity is an inner product on unit rows
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise InvalidInputError("zero vector in dense index")
        vectors = _f32(vectors / norms)
    graph = None
    if mode == HNSW and len(ids):
        graph = HNSWGraph(vectors, params.M, params.ef_construction, seed=seed)
    return DenseIndex(list(ids), vectors, mode, params, graph)


def build_dense(chunks: Sequence[Chunk], embedder, mode: str = HNSW,
                params: HNSWParams | None = None, seed: int = 0,
                dim: int | None = None) -> DenseIndex:
    """Embed every chunk through ``embedder.embed_batch`` and index the vectors.

    Backend failures propagate unchanged.
    """
    if not chunks:
        d = dim or getattr(getattr(embedder, "config", None), "embedding_dim", 0)
        return DenseIndex([], np.zeros((0, d)), mode, params or HNSWParams())
    rows = []
    for start in range(0, len(chunks), EMBED_BATCH):
        batch = chunks[start:start + EMBED_BATCH]
        rows.append(np.asarray(embedder.embed_batch([c.text for c in batch]), dtype=np.float64))
    return from_vectors([c.id for c in chunks], np.vstack(rows), mode, params, seed)


def dense_search(query_vec: np.ndarray, idx: DenseIndex, n: int) -> list[ScoredHit]:
    if n <= 0:
        raise InvalidInputError(f"n must be positive, got {n}")
    q = np.asarray(query_vec, dtype=np.float64).ravel()
    if not len(idx):
        return []
    if q.shape[0] != idx.dim:
        raise InvalidInputError(f"query dimension {q.shape[0]} != index dimension {idx.dim}")
    norm = np.linalg.norm(q)
    if norm == 0:
        raise InvalidInputError("zero query vector")
    q = q / norm
    if idx.mode == HNSW and idx.graph is not None:
        found = idx.graph.search(q, n, idx.params.ef_search)
        return rank(((idx.ids[i], s) for i, s in found), n, "dense")
    scores = idx.vectors @ q
    return rank(zip(idx.ids, scores.tolist()), n, "dense")


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


def save_dense(idx: DenseIndex, path: str | Path) -> None:
    parts = [struct.pack("<IQB", idx.dim, len(idx.ids), _MODE_CODES[idx.mode])]
    vecs = idx.vectors.astype("<f4")
    for cid, row in zip(idx.ids, vecs):
        raw = cid.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(row.tobytes())
    if idx.mode == HNSW:
        p = idx.params
        entry = idx.graph.entry if idx.graph is not None else -1
        parts.append(struct.pack("<IIIq", p.M, p.ef_construction, p.ef_search, entry))
        if idx.graph is not None:
            for node, layers in enumerate(idx.graph.adjacency()):
                parts.append(struct.pack("<I", len(layers) - 1))
                for nbrs in layers:
                    parts.append(struct.pack(f"<I{len(nbrs)}I", len(nbrs), *nbrs))
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ParseError(f"truncated dense index at byte {self.pos}", path=self.path)
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def raw(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise ParseError(f"truncated dense index at byte {self.pos}", path=self.path)
        out = self.data[self.pos:self.pos + size]
        self.pos += size
        return out


def load_dense(path: str | Path) -> DenseIndex:
    r = _Reader(Path(path).read_bytes(), str(path))
    dim, count, code = r.take("<IQB")
    modes = {v: k for k, v in _MODE_CODES.items()}
    if code not in modes:
        raise ParseError(f"unknown mode code {code}", path=str(path))
    mode = modes[code]
    ids = []
    vecs = np.empty((count, dim), dtype=np.float64)
    for i in range(count):
        (n,) = r.take("<I")
        ids.append(r.raw(n).decode("utf-8"))
        vecs[i] = np.frombuffer(r.raw(4 * dim), dtype="<f4")
    params = HNSWParams()
    graph = None
    if mode == HNSW:
        M, efc, efs, entry = r.take("<IIIq")
        params = HNSWParams(M, efc, efs)
        if count:
            levels = []
            adjacency = []
            for _ in range(count):
                (level,) = r.take("<I")
                levels.append(level)
                layers = []
                for _ in range(level + 1):
                    (n,) = r.take("<I")
                    layers.append(list(r.take(f"<{n}I")) if n else [])
                adjacency.append(layers)
            graph = HNSWGraph.from_adjacency(vecs, np.array(levels), adjacency, entry, M, efc)
    if r.pos != len(r.data):
        raise ParseError("trailing bytes after dense index", path=str(path))
    return DenseIndex(ids, vecs, mode, params, graph)
