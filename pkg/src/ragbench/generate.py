"""End-to-end answering: classify -> augment -> retrieve -> prompt -> generate."""

from __future__ import annotations

import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from ragbench.backend import Backend, BackendConfig, GenerationResult, make_backend
from ragbench.corpus import ChunkingConfig, ChunkSet, Document, chunk_corpus
from ragbench.errors import BackendError, ConfigError, PipelineError
from ragbench.index import HNSW, DenseIndex, HNSWParams, SparseIndex, build_dense, build_sparse
from ragbench.prompts import (
    DEFAULT_CHAR_BUDGET,
    DEFAULT_TEMPLATES,
    Augmentation,
    Prompting,
    Templates,
    build_prompt,
)
from ragbench.qclass import QueryClassifier
from ragbench.retrieve import IndexKind, IndexSet, RetrievalConfig, RetrievedDoc, augment_query, retrieve

__all__ = [
    "Components",
    "GenerationTrace",
    "PipelineConfig",
    "answer_query",
    "build_prompt",
]


@dataclass(frozen=True)
class PipelineConfig:
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    embedder: BackendConfig = field(default_factory=lambda: BackendConfig(kind="mock", model_name="bge-base"))
    use_query_classification: bool = True
    prompting: Prompting = Prompting.COT_REFINE
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    use_rag: bool = True
    char_budget: int = DEFAULT_CHAR_BUDGET
    preset_name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "prompting", Prompting(self.prompting))

    @property
    def index_kind(self) -> IndexKind:
        return self.retrieval.index_kind

    @property
    def augmentation(self) -> Augmentation:
        return self.retrieval.augmentation

    @property
    def uses_embedder(self) -> bool:
        return self.use_rag and self.index_kind is not IndexKind.SPARSE

    def describe(self) -> dict:
        return {
            "preset": self.preset_name,
            "use_rag": self.use_rag,
            "chunking": self.chunking.strategy.value,
            "chunk_size": self.chunking.chunk_size,
            "index_kind": self.index_kind.value,
            "embedder": self.embedder.model_name if self.uses_embedder else None,
            "query_classification": self.use_query_classification,
            "augmentation": self.augmentation.value,
            "prompting": self.prompting.value,
            "k": self.retrieval.k,
        }


@dataclass
class GenerationTrace:
    query: str
    classified_need_rag: bool | None = None
    search_text: str = ""
    retrieved: list[RetrievedDoc] = field(default_factory=list)
    no_rag_response: str | None = None
    final_response: str = ""
    latency_s: float = 0.0
    backend_latency_s: float = 0.0
    generate_calls: int = 0
    warnings: list[str] = field(default_factory=list)
    rag_path: bool = False

    def to_json(self) -> dict:
        return asdict(self)


class _Metered:
    """Counts generate calls and sums their reported latency."""

    def __init__(self, backend: Backend, trace: GenerationTrace):
        self._backend = backend
        self._trace = trace

    def generate(self, prompt: str) -> GenerationResult:
        self._trace.generate_calls += 1
        result = self._backend.generate(prompt)
        self._trace.backend_latency_s += result.latency_s
        return result


class Components:
    """Backends, classifier and lazily built, cached indexes shared across runs.

    Chunk sets and sparse indexes are keyed by chunking config; dense indexes
    by chunking config plus embedder name. Entries may be pre-loaded (from
    disk); anything missing is built from ``documents`` or reported as a
    configuration error when no documents were given.
    """

    def __init__(self, llm: Backend, *, documents: Sequence[Document] | None = None,
                 classifier: QueryClassifier | None = None,
                 embedders: Mapping[str, Backend] | None = None,
                 templates: Templates = DEFAULT_TEMPLATES,
                 dense_mode: str = HNSW, hnsw_params: HNSWParams | None = None, seed: int = 0):
        self.llm = llm
        self.documents = list(documents) if documents is not None else None
        self.classifier = classifier
        self.embedders: dict[str, Backend] = dict(embedders or {})
        self.templates = templates
        self.dense_mode = dense_mode
        self.hnsw_params = hnsw_params or HNSWParams()
        self.seed = seed
        self.chunk_sets: dict[ChunkingConfig, ChunkSet] = {}
        self.sparse: dict[ChunkingConfig, SparseIndex] = {}
        self.dense: dict[tuple[ChunkingConfig, str], DenseIndex] = {}
        self._index_sets: dict[tuple, IndexSet] = {}
        self._lock = threading.RLock()

    def embedder(self, cfg: BackendConfig) -> Backend:
        with self._lock:
            if cfg.model_name not in self.embedders:
                self.embedders[cfg.model_name] = make_backend(cfg)
            return self.embedders[cfg.model_name]

    def _need_documents(self, what: str) -> list[Document]:
        if self.documents is None:
            raise ConfigError(f"missing {what} and no corpus available to build it")
        return self.documents

    def chunk_set(self, chunking: ChunkingConfig) -> ChunkSet:
        with self._lock:
            if chunking not in self.chunk_sets:
                docs = self._need_documents(f"{chunking.strategy.value} chunk store")
                self.chunk_sets[chunking] = chunk_corpus(docs, chunking)
            return self.chunk_sets[chunking]

    def sparse_index(self, chunking: ChunkingConfig) -> SparseIndex:
        with self._lock:
            if chunking not in self.sparse:
                self._need_documents(f"{chunking.strategy.value} sparse index")
                self.sparse[chunking] = build_sparse(self.chunk_set(chunking).retrieval)
            return self.sparse[chunking]

    def dense_index(self, chunking: ChunkingConfig, embedder_cfg: BackendConfig) -> DenseIndex:
        key = (chunking, embedder_cfg.model_name)
        with self._lock:
            if key not in self.dense:
                self._need_documents(f"{chunking.strategy.value}/{embedder_cfg.model_name} dense index")
                self.dense[key] = build_dense(self.chunk_set(chunking).retrieval, self.embedder(embedder_cfg),
                                              self.dense_mode, self.hnsw_params, self.seed)
            return self.dense[key]

    def index_set(self, cfg: PipelineConfig) -> IndexSet:
        key = (cfg.chunking, cfg.index_kind, cfg.embedder.model_name)
        with self._lock:
            if key not in self._index_sets:
                kind = cfg.index_kind
                sparse = self.sparse_index(cfg.chunking) if kind is not IndexKind.DENSE else None
                dense = self.dense_index(cfg.chunking, cfg.embedder) if kind is not IndexKind.SPARSE else None
                self._index_sets[key] = IndexSet(self.chunk_set(cfg.chunking), sparse, dense)
            return self._index_sets[key]

    def prepare(self, cfg: PipelineConfig) -> None:
        """Build (or verify) every artifact ``cfg`` needs, so timing excludes it."""
        if cfg.use_rag and cfg.use_query_classification and self.classifier is None:
            raise ConfigError("query classification enabled but no classifier loaded")
        if cfg.use_rag:
            self.index_set(cfg)
            if cfg.uses_embedder:
                self.embedder(cfg.embedder)


def answer_query(query: str, cfg: PipelineConfig, components: Components) -> GenerationTrace:
    trace = GenerationTrace(query=query)
    llm = _Metered(components.llm, trace)
    templates = components.templates
    start = time.perf_counter()
    try:
        rag = cfg.use_rag
        if rag and cfg.use_query_classification:
            if components.classifier is None:
                raise ConfigError("query classification enabled but no classifier loaded")
            need, _prob = components.classifier.classify(query)
            trace.classified_need_rag = bool(need)
            rag = bool(need)

        if not rag:
            strategy = Prompting.COT if cfg.prompting is Prompting.COT_REFINE else cfg.prompting
            trace.search_text = query
            prompt = build_prompt(query, [], strategy, templates=templates, char_budget=cfg.char_budget)
            trace.final_response = llm.generate(prompt).text
            return trace

        trace.rag_path = True
        indexes = components.index_set(cfg)
        embedder = components.embedder(cfg.embedder) if cfg.uses_embedder else None
        trace.search_text = augment_query(query, cfg.augmentation, llm, templates, trace.warnings)
        trace.retrieved = retrieve(trace.search_text, cfg.retrieval, indexes, embedder)
        prior = None
        if cfg.prompting is Prompting.COT_REFINE:
            first = build_prompt(query, [], Prompting.COT, templates=templates, char_budget=cfg.char_budget)
            prior = llm.generate(first).text
            trace.no_rag_response = prior
        prompt = build_prompt(query, trace.retrieved, cfg.prompting, prior, templates=templates,
                              char_budget=cfg.char_budget)
        trace.final_response = llm.generate(prompt).text
        return trace
    except BackendError as exc:
        raise PipelineError(f"generation failed: {exc}", trace) from exc
    finally:
        trace.latency_s = time.perf_counter() - start
