"""On-disk layout of the index directory.

    <index_dir>/<strategy>-<chunk_size>/
        chunks.jsonl          retrieval units
        parents.jsonl         large chunks (small2big only)
        sparse/               BM25 statistics and posting shards
        dense-<embedder>.bin  vectors (+ HNSW graph)
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from ragbench.corpus import ChunkingConfig, ChunkSet, ChunkStrategy, read_chunks, write_chunks
from ragbench.errors import ConfigError
from ragbench.generate import Components, PipelineConfig
from ragbench.index import load_dense, load_sparse, save_dense, save_sparse
from ragbench.retrieve import IndexKind


class MissingArtifactError(ConfigError):
    """A prerequisite file produced by an earlier command is absent."""


def chunk_dir(index_dir: Path, chunking: ChunkingConfig) -> Path:
    return Path(index_dir) / f"{chunking.strategy.value}-{chunking.chunk_size}"


def dense_path(index_dir: Path, chunking: ChunkingConfig, embedder: str) -> Path:
    return chunk_dir(index_dir, chunking) / f"dense-{embedder}.bin"


def requirements(cfgs: Iterable[PipelineConfig]) -> dict[ChunkingConfig, dict]:
    """Per chunking config: whether a sparse index is needed and which embedders."""
    need: dict[ChunkingConfig, dict] = {}
    for cfg in cfgs:
        if not cfg.use_rag:
            continue
        entry = need.setdefault(cfg.chunking, {"sparse": False, "dense": set()})
        if cfg.index_kind is not IndexKind.DENSE:
            entry["sparse"] = True
        if cfg.index_kind is not IndexKind.SPARSE:
            entry["dense"].add(cfg.embedder.model_name)
    return need


def build_artifacts(components: Components, cfgs: Iterable[PipelineConfig], index_dir: Path) -> list[str]:
    """Build and persist everything ``cfgs`` need. Returns summary lines."""
    cfgs = list(cfgs)
    embedder_cfgs = {c.embedder.model_name: c.embedder for c in cfgs}
    summary = []
    for chunking, need in sorted(requirements(cfgs).items(), key=lambda kv: str(chunk_dir(index_dir, kv[0]))):
        out = chunk_dir(index_dir, chunking)
        out.mkdir(parents=True, exist_ok=True)
        chunks = components.chunk_set(chunking)
        write_chunks(chunks.retrieval, out / "chunks.jsonl")
        line = f"{out.name}: {len(chunks.retrieval)} chunks"
        if chunking.strategy is ChunkStrategy.SMALL2BIG:
            write_chunks(chunks.parents.values(), out / "parents.jsonl")
            line += f", {len(chunks.parents)} parents"
        if need["sparse"]:
            sparse = components.sparse_index(chunking)
            save_sparse(sparse, out / "sparse")
            line += f", sparse {len(sparse.postings)} terms"
        for name in sorted(need["dense"]):
            dense = components.dense_index(chunking, embedder_cfgs[name])
            save_dense(dense, out / f"dense-{name}.bin")
            line += f", dense[{name}] {len(dense)}x{dense.dim}"
        summary.append(line)
    return summary


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"missing {what}: {path} (run `ragbench index` first)")
    return path


def load_artifacts(components: Components, cfgs: Iterable[PipelineConfig], index_dir: Path) -> None:
    """Populate ``components`` caches from disk for every config in ``cfgs``."""
    for chunking, need in requirements(cfgs).items():
        d = chunk_dir(index_dir, chunking)
        if chunking not in components.chunk_sets:
            retrieval = read_chunks(_require(d / "chunks.jsonl", f"{d.name} chunk store"))
            parents = {}
            if chunking.strategy is ChunkStrategy.SMALL2BIG:
                parents = {c.id: c for c in read_chunks(_require(d / "parents.jsonl", f"{d.name} large-chunk store"))}
            components.chunk_sets[chunking] = ChunkSet(chunking.strategy, retrieval, parents)
        if need["sparse"] and chunking not in components.sparse:
            components.sparse[chunking] = load_sparse(_require(d / "sparse" / "stats.json", f"{d.name} sparse index").parent)
        for name in need["dense"]:
            if (chunking, name) not in components.dense:
                path = _require(d / f"dense-{name}.bin", f"{d.name} dense index for {name}")
                components.dense[(chunking, name)] = load_dense(path)
