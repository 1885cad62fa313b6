"""Run configuration files (YAML) with strict key checking.

Relative paths are resolved against the directory holding the config file.
Unknown keys anywhere are rejected so a typo cannot silently change an
ablation. See README.md for the full schema.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from ragbench.backend import BackendConfig
from ragbench.corpus import ChunkingConfig, ChunkStrategy
from ragbench.errors import ConfigError, InvalidInputError
from ragbench.eval.presets import BP_RAG, DEFAULT_EMBEDDERS, Preset, catalog
from ragbench.generate import PipelineConfig
from ragbench.index import HNSWParams
from ragbench.prompts import DEFAULT_TEMPLATES, Augmentation, Prompting, Templates
from ragbench.qclass import DEFAULT_SPLIT, SplitSpec, TrainConfig
from ragbench.retrieve import IndexKind, RetrievalConfig

_TOP = {"seed", "parallelism", "paths", "backends", "pipeline", "training", "templates"}
_PATHS = {"corpus", "datasets", "label_pairs", "labeled", "index_dir", "model_dir", "output_dir"}
_BACKENDS = {"llm", "embedders", "classifier_embedder"}
_BACKEND = {"kind", "model_name", "endpoint", "timeout_ms", "max_retries", "beam_width",
            "max_new_tokens", "seed", "embedding_dim", "delay_ms", "responses"}
_PIPELINE = {"preset", "chunking", "chunk_size", "index_kind", "embedder", "use_query_classification",
             "augmentation", "prompting", "k", "candidate_factor", "char_budget", "dense_mode", "hnsw"}
_HNSW = {"M", "ef_construction", "ef_search"}
_TRAINING = {"learning_rate", "weight_decay", "max_epochs", "eval_every", "threshold", "split"}
_TASK_KEYS = {"mcq", "yes_no_maybe", "ner"}


def derive_seed(seed: int, component: str) -> int:
    """Stable per-component seed fanned out from the single run seed."""
    digest = hashlib.sha256(f"{seed}:{component}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little") & 0x7FFFFFFF


def _check_keys(section: str, obj: Any, allowed: set[str]) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{section}: expected a mapping")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {', '.join(unknown)}")
    return dict(obj)


@dataclass
class Paths:
    corpus: Path | None = None
    datasets: dict[str, Path] = field(default_factory=dict)
    label_pairs: Path | None = None
    labeled: Path | None = None
    index_dir: Path = Path("index")
    model_dir: Path = Path("model")
    output_dir: Path = Path("reports")

    @property
    def labeled_path(self) -> Path:
        return self.labeled or self.model_dir / "labeled.jsonl"

    @property
    def classifier_path(self) -> Path:
        return self.model_dir / "classifier.json"


@dataclass
class RunConfig:
    source: Path | None
    seed: int
    parallelism: int
    paths: Paths
    llm: BackendConfig
    embedders: dict[str, BackendConfig]
    classifier_embedder: str
    pipeline: PipelineConfig
    base_preset: str
    dense_mode: str
    hnsw: HNSWParams
    training: TrainConfig
    split: SplitSpec
    templates: Templates

    def presets(self) -> dict[str, Preset]:
        return catalog(replace(self.pipeline, preset_name=BP_RAG), self.embedders)

    def with_seed(self, seed: int) -> "RunConfig":
        return load_config_dict(self._raw, self.source, seed_override=seed)

    _raw: dict = field(default_factory=dict, repr=False)


def _backend(section: str, obj: Any, base_dir: Path, default_name: str, seed: int) -> BackendConfig:
    obj = _check_keys(section, obj, _BACKEND)
    if "responses" in obj:
        obj["responses_path"] = str(base_dir / obj.pop("responses"))
    obj.setdefault("model_name", default_name)
    obj.setdefault("seed", derive_seed(seed, f"{section}:{obj['model_name']}"))
    try:
        return BackendConfig(**obj)
    except TypeError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _enum(section: str, enum_cls, value):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"{section}: {value!r} is not one of {allowed}") from None


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return load_config_dict(raw or {}, path, seed_override)


def load_config_dict(raw: Mapping, source: Path | None = None, seed_override: int | None = None) -> RunConfig:
    raw = _check_keys("config", raw, _TOP)
    base_dir = source.parent if source is not None else Path.cwd()
    seed = int(raw.get("seed", 0)) if seed_override is None else seed_override
    parallelism = int(raw.get("parallelism", 1))
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")

    p = _check_keys("paths", raw.get("paths"), _PATHS)
    datasets = _check_keys("paths.datasets", p.get("datasets"), _TASK_KEYS)

    def rel(value):
        return None if value is None else (base_dir / value)

    paths = Paths(
        corpus=rel(p.get("corpus")),
        datasets={k: rel(v) for k, v in datasets.items()},
        label_pairs=rel(p.get("label_pairs")),
        labeled=rel(p.get("labeled")),
        index_dir=rel(p.get("index_dir", "index")),
        model_dir=rel(p.get("model_dir", "model")),
        output_dir=rel(p.get("output_dir", "reports")),
    )

    b = _check_keys("backends", raw.get("backends"), _BACKENDS)
    llm = _backend("backends.llm", b.get("llm"), base_dir, "llama-2-13b-chat", seed)
    emb_raw = b.get("embedders")
    if emb_raw is None:
        embedders = {name: replace(cfg, seed=derive_seed(seed, f"embedder:{name}"))
                     for name, cfg in DEFAULT_EMBEDDERS.items()}
    else:
        if not isinstance(emb_raw, Mapping) or not emb_raw:
            raise ConfigError("backends.embedders: expected a non-empty mapping")
        embedders = {name: _backend(f"backends.embedders.{name}", cfg, base_dir, name, seed)
                     for name, cfg in emb_raw.items()}
    cls_emb = b.get("classifier_embedder", "bge-base")
    if cls_emb not in embedders:
        raise ConfigError(f"backends.classifier_embedder: {cls_emb!r} is not a configured embedder")

    pl = _check_keys("pipeline", raw.get("pipeline"), _PIPELINE)
    h = _check_keys("pipeline.hnsw", pl.get("hnsw"), _HNSW)
    hnsw = HNSWParams(**{k: int(v) for k, v in h.items()})
    dense_mode = pl.get("dense_mode", "hnsw")
    if dense_mode not in ("exact", "hnsw"):
        raise ConfigError(f"pipeline.dense_mode: {dense_mode!r} is not one of exact, hnsw")
    base_preset = pl.get("preset", BP_RAG)
    embedder_name = pl.get("embedder", "bge-base")
    if embedder_name not in embedders:
        raise ConfigError(f"pipeline.embedder: {embedder_name!r} is not a configured embedder")
    try:
        chunking = ChunkingConfig(_enum("pipeline.chunking", ChunkStrategy, pl.get("chunking", "small2big")),
                                  int(pl.get("chunk_size", 256)))
        retrieval = RetrievalConfig(
            k=int(pl.get("k", 8)),
            augmentation=_enum("pipeline.augmentation", Augmentation, pl.get("augmentation", "pseudo_response")),
            index_kind=_enum("pipeline.index_kind", IndexKind, pl.get("index_kind", "hybrid")),
            expand_small2big=chunking.strategy is ChunkStrategy.SMALL2BIG,
            candidate_factor=int(pl.get("candidate_factor", 4)),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"pipeline: {exc}") from None
    pipeline = PipelineConfig(
        chunking=chunking,
        embedder=embedders[embedder_name],
        use_query_classification=bool(pl.get("use_query_classification", True)),
        prompting=_enum("pipeline.prompting", Prompting, pl.get("prompting", "cot_refine")),
        retrieval=retrieval,
        char_budget=int(pl.get("char_budget", 24_000)),
        preset_name=None,
    )

    t = _check_keys("training", raw.get("training"), _TRAINING)
    split_raw = t.pop("split", None)
    try:
        if split_raw is None:
            split = SplitSpec(*DEFAULT_SPLIT, seed=derive_seed(seed, "split"))
        else:
            if not isinstance(split_raw, (list, tuple)) or len(split_raw) != 3:
                raise ConfigError("training.split: expected [train, dev, test] proportions")
            total = float(sum(split_raw))
            split = SplitSpec(*(float(x) / total for x in split_raw), seed=derive_seed(seed, "split"))
        training = TrainConfig(**t)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(f"training: {exc}") from None

    tmpl = raw.get("templates") or {}
    if not isinstance(tmpl, Mapping):
        raise ConfigError("templates: expected a mapping")
    templates = DEFAULT_TEMPLATES.with_overrides(tmpl)

    cfg = RunConfig(source, seed, parallelism, paths, llm, embedders, cls_emb, pipeline, base_preset,
                    dense_mode, hnsw, training, split, templates)
    cfg._raw = dict(raw)
    if base_preset not in cfg.presets():
        raise ConfigError(f"pipeline.preset: unknown preset {base_preset!r}")
    return cfg
