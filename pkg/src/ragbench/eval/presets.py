"""The best-practice configuration and its one-change ablations."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from ragbench.backend import BackendConfig
from ragbench.corpus import ChunkingConfig, ChunkStrategy
from ragbench.errors import ConfigError
from ragbench.generate import PipelineConfig
from ragbench.prompts import Augmentation, Prompting
from ragbench.retrieve import IndexKind, RetrievalConfig

BP_RAG = "BP-RAG"
NO_RAG = "No RAG"

DEFAULT_EMBEDDERS: dict[str, BackendConfig] = {
    "bge-base": BackendConfig(kind="mock", model_name="bge-base", seed=101),
    "medcpt": BackendConfig(kind="mock", model_name="medcpt", seed=202),
    "gte-base": BackendConfig(kind="mock", model_name="gte-base", seed=303),
}


@dataclass(frozen=True)
class Preset:
    name: str
    setting: str
    config: PipelineConfig


def best_practice(chunk_size: int = 256, k: int = 8,
                  embedders: Mapping[str, BackendConfig] | None = None) -> PipelineConfig:
    embedders = embedders or DEFAULT_EMBEDDERS
    return PipelineConfig(
        chunking=ChunkingConfig(ChunkStrategy.SMALL2BIG, chunk_size),
        embedder=embedders["bge-base"],
        use_query_classification=True,
        prompting=Prompting.COT_REFINE,
        retrieval=RetrievalConfig(k=k, augmentation=Augmentation.PSEUDO_RESPONSE,
                                  index_kind=IndexKind.HYBRID, expand_small2big=True),
        preset_name=BP_RAG,
    )


def _chunking(cfg: PipelineConfig, strategy: ChunkStrategy) -> PipelineConfig:
    return replace(cfg, chunking=replace(cfg.chunking, strategy=strategy),
                   retrieval=replace(cfg.retrieval, expand_small2big=strategy is ChunkStrategy.SMALL2BIG))


def _retrieval(cfg: PipelineConfig, **changes) -> PipelineConfig:
    return replace(cfg, retrieval=replace(cfg.retrieval, **changes))


def catalog(base: PipelineConfig | None = None,
            embedders: Mapping[str, BackendConfig] | None = None) -> dict[str, Preset]:
    """All thirteen rows, in table order. ``base`` plays the BP-RAG role."""
    embedders = dict(embedders or DEFAULT_EMBEDDERS)
    for name in ("bge-base", "medcpt", "gte-base"):
        if name not in embedders:
            raise ConfigError(f"embedder {name!r} not configured")
    bp = replace(base or best_practice(embedders=embedders), preset_name=BP_RAG)
    rows = [
        (BP_RAG, "BP-RAG", bp),
        (NO_RAG, "-", replace(bp, use_rag=False)),
        ("RAG_1", "+ vanilla chunking", _chunking(bp, ChunkStrategy.VANILLA)),
        ("RAG_2", "+ sliding-window chunking", _chunking(bp, ChunkStrategy.SLIDING_WINDOW)),
        ("RAG_3", "+ sparse indexing", _retrieval(bp, index_kind=IndexKind.SPARSE)),
        ("RAG_4", "+ dense indexing", _retrieval(bp, index_kind=IndexKind.DENSE)),
        ("RAG_5", "+ MedCPT", replace(bp, embedder=embedders["medcpt"])),
        ("RAG_6", "+ GTE-base", replace(bp, embedder=embedders["gte-base"])),
        ("RAG_7", "- query classification", replace(bp, use_query_classification=False)),
        ("RAG_8", "+ query rewriting", _retrieval(bp, augmentation=Augmentation.REWRITE)),
        ("RAG_9", "+ vanilla query", _retrieval(bp, augmentation=Augmentation.VANILLA)),
        ("RAG_10", "+ COT", replace(bp, prompting=Prompting.COT)),
        ("RAG_11", "+ direct answering", replace(bp, prompting=Prompting.DIRECT_ANSWER)),
    ]
    return {name: Preset(name, setting, replace(cfg, preset_name=name)) for name, setting, cfg in rows}


def select(names: list[str] | str, presets: Mapping[str, Preset]) -> list[Preset]:
    if names == "all" or names == ["all"]:
        return list(presets.values())
    if isinstance(names, str):
        names = [names]
    unknown = [n for n in names if n not in presets]
    if unknown:
        raise ConfigError(f"unknown preset(s) {unknown}; known: {', '.join(presets)}")
    return [presets[n] for n in names]
