"""Query augmentation and top-k retrieval with small2big parent expansion."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

from ragbench.corpus import ChunkSet
from ragbench.errors import BackendError, ConfigError, DataIntegrityError, InvalidInputError
from ragbench.index import DenseIndex, ScoredHit, SparseIndex, bm25_search, dense_search, hybrid_search
from ragbench.index.hybrid import CANDIDATE_FACTOR
from ragbench.prompts import DEFAULT_TEMPLATES, Augmentation, Templates

log = logging.getLogger(__name__)


class IndexKind(str, Enum):
    SPARSE = "sparse"
    DENSE = "dense"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 8
    augmentation: Augmentation = Augmentation.PSEUDO_RESPONSE
    index_kind: IndexKind = IndexKind.HYBRID
    expand_small2big: bool = True
    candidate_factor: int = CANDIDATE_FACTOR

    def __post_init__(self):
        object.__setattr__(self, "augmentation", Augmentation(self.augmentation))
        object.__setattr__(self, "index_kind", IndexKind(self.index_kind))
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.candidate_factor < 1:
            raise ConfigError("candidate_factor must be >= 1")


@dataclass(frozen=True)
class RetrievedDoc:
    chunk_id: str
    text: str
    score: float
    rank: int


@dataclass
class IndexSet:
    """Everything retrieval needs for one chunking strategy."""

    chunks: ChunkSet
    sparse: SparseIndex | None = None
    dense: DenseIndex | None = None

    def __post_init__(self):
        self._by_id = self.chunks.by_id()

    def chunk_text(self, chunk_id: str) -> str:
        return self._by_id[chunk_id].text

    def parent_of(self, chunk_id: str):
        chunk = self._by_id[chunk_id]
        if chunk.parent_id is None or chunk.parent_id not in self.chunks.parents:
            raise DataIntegrityError(f"chunk {chunk_id!r} has no resolvable parent (parent_id={chunk.parent_id!r})")
        return self.chunks.parents[chunk.parent_id]


def augment_query(query: str, strategy: Augmentation | str, llm,
                  templates: Templates = DEFAULT_TEMPLATES,
                  warnings: list[str] | None = None) -> str:
    """Build the search text. Backend failures degrade to the vanilla query and
    append a note to ``warnings``."""
    if not query:
        raise InvalidInputError("query must be non-empty")
    strategy = Augmentation(strategy)
    if strategy is Augmentation.VANILLA:
        return query
    template = templates.rewrite if strategy is Augmentation.REWRITE else templates.pseudo_response
    try:
        out = llm.generate(template.format(query=query)).text
    except BackendError as exc:
        msg = f"query augmentation '{strategy.value}' failed ({exc}); fell back to the vanilla query"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
        return query
    if strategy is Augmentation.REWRITE:
        lines = [ln.strip() for ln in out.splitlines() if ln.strip()]
        return "\n".join([query, *lines])
    out = out.strip()
    return f"{query}\n{out}" if out else query


def _search(search_text: str, n: int, cfg: RetrievalConfig, indexes: IndexSet, embedder) -> list[ScoredHit]:
    kind = cfg.index_kind
    if kind in (IndexKind.SPARSE, IndexKind.HYBRID) and indexes.sparse is None:
        raise ConfigError(f"{kind.value} retrieval needs a sparse index")
    if kind in (IndexKind.DENSE, IndexKind.HYBRID):
        if indexes.dense is None:
            raise ConfigError(f"{kind.value} retrieval needs a dense index")
        if embedder is None:
            raise ConfigError(f"{kind.value} retrieval needs an embedder")
    if kind is IndexKind.SPARSE:
        return bm25_search(search_text, indexes.sparse, n)
    qvec = embedder.embed_batch([search_text])[0]
    if kind is IndexKind.DENSE:
        return dense_search(qvec, indexes.dense, n)
    return hybrid_search(search_text, qvec, indexes.sparse, indexes.dense, n, cfg.candidate_factor)


def _to_docs(scored: list[tuple[str, str, float]], k: int) -> list[RetrievedDoc]:
    scored = sorted(scored, key=lambda t: (-t[2], t[0]))[:k]
    return [RetrievedDoc(cid, text, score, i) for i, (cid, text, score) in enumerate(scored, start=1)]


def retrieve(search_text: str, cfg: RetrievalConfig, indexes: IndexSet, embedder=None) -> list[RetrievedDoc]:
    if not cfg.expand_small2big:
        hits = _search(search_text, cfg.k, cfg, indexes, embedder)
        return _to_docs([(h.chunk_id, indexes.chunk_text(h.chunk_id), h.score) for h in hits], cfg.k)

    # widen the small-chunk search until k distinct parents turn up or hits run out
    n = cfg.k * cfg.candidate_factor
    while True:
        hits = _search(search_text, n, cfg, indexes, embedder)
        best: dict[str, tuple[str, float]] = {}
        for h in hits:
            parent = indexes.parent_of(h.chunk_id)
            if parent.id not in best or h.score > best[parent.id][1]:
                best[parent.id] = (parent.text, h.score)
        if len(best) >= cfg.k or len(hits) < n:
            break
        n *= 2
    return _to_docs([(pid, text, score) for pid, (text, score) in best.items()], cfg.k)
