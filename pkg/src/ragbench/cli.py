"""``ragbench`` command-line entry point.

Exit codes: 0 success, 1 runtime or input-data failure, 2 configuration
problem or missing prerequisite (argparse also exits 2 on unknown flags).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import yaml

from ragbench import __version__
from ragbench.backend import make_backend
from ragbench.config import RunConfig, derive_seed, load_config
from ragbench.corpus import ChunkStrategy, ingest
from ragbench.errors import ConfigError, ParseError, PipelineError, RagBenchError
from ragbench.eval import format_table, load_datasets, reports_json, run_eval, select
from ragbench.eval.presets import Preset
from ragbench.generate import Components, PipelineConfig, answer_query
from ragbench.prompts import Augmentation
from ragbench.qclass import (
    ClassifierModel,
    LinearClassifier,
    evaluate_classifier,
    label_dataset,
    read_labeled,
    split_dataset,
    train_classifier,
    write_labeled,
)
from ragbench.retrieve import IndexKind, retrieve
from ragbench.store import build_artifacts, load_artifacts
from ragbench.synthetic import eval_fixture

log = logging.getLogger("ragbench")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _require_path(path: Path | None, field: str) -> Path:
    if path is None:
        raise ConfigError(f"{field} is not set in the config")
    if not path.exists():
        raise ConfigError(f"{field}: file not found: {path}")
    return path


def _pipeline(cfg: RunConfig, args) -> PipelineConfig:
    """The base preset from the config with CLI overrides applied."""
    pipe = cfg.presets()[cfg.base_preset].config
    strategy = getattr(args, "strategy", None)
    if strategy:
        pipe = replace(pipe, chunking=replace(pipe.chunking, strategy=ChunkStrategy(strategy)),
                       retrieval=replace(pipe.retrieval, expand_small2big=strategy == ChunkStrategy.SMALL2BIG.value))
    kind = getattr(args, "index_kind", None)
    if kind:
        pipe = replace(pipe, retrieval=replace(pipe.retrieval, index_kind=IndexKind(kind)))
    return pipe


def _presets(cfg: RunConfig, args) -> list[Preset]:
    if args.preset:
        return select(args.preset, cfg.presets())
    return [Preset(cfg.base_preset, "", _pipeline(cfg, args))]


def _components(cfg: RunConfig, documents=None, classifier=None) -> Components:
    embedders = {name: make_backend(b) for name, b in cfg.embedders.items()}
    return Components(make_backend(cfg.llm), documents=documents, classifier=classifier, embedders=embedders,
                      templates=cfg.templates, dense_mode=cfg.dense_mode, hnsw_params=cfg.hnsw,
                      seed=derive_seed(cfg.seed, "hnsw"))


def _classifier(cfg: RunConfig, presets: Sequence[PipelineConfig]):
    if not any(p.use_rag and p.use_query_classification for p in presets):
        return None
    path = cfg.paths.classifier_path
    if not path.exists():
        raise ConfigError(f"missing classifier model: {path} (run `ragbench train` first)")
    model = ClassifierModel.load(path)
    return LinearClassifier(model, make_backend(cfg.embedders[cfg.classifier_embedder]))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_index(cfg: RunConfig, args) -> int:
    corpus = _require_path(cfg.paths.corpus, "paths.corpus")
    docs = ingest(corpus)
    configs = [p.config for p in _presets(cfg, args)]
    if args.strategy or args.index_kind:
        configs = [_pipeline(cfg, args)]
    components = _components(cfg, documents=docs)
    summary = build_artifacts(components, configs, cfg.paths.index_dir)
    print(f"indexed {len(docs)} documents into {cfg.paths.index_dir}")
    for line in summary:
        print(f"  {line}")
    return EXIT_OK


def cmd_label(cfg: RunConfig, args) -> int:
    pairs_path = _require_path(cfg.paths.label_pairs, "paths.label_pairs")
    pairs = []
    with pairs_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pairs.append((str(obj["query"]), str(obj["response"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"bad labeling record ({exc})", line=lineno, path=str(pairs_path)) from None

    base = _pipeline(cfg, args)
    label_cfg = replace(base, retrieval=replace(base.retrieval, index_kind=IndexKind.HYBRID,
                                                augmentation=Augmentation.VANILLA))
    components = _components(cfg)
    load_artifacts(components, [label_cfg], cfg.paths.index_dir)
    indexes = components.index_set(label_cfg)
    embedder = components.embedder(label_cfg.embedder)

    def retriever(query: str, k: int):
        return retrieve(query, replace(label_cfg.retrieval, k=k), indexes, embedder)

    result = label_dataset(pairs, retriever, components.llm, k=label_cfg.retrieval.k,
                           workers=cfg.parallelism)
    out = cfg.paths.labeled_path
    out.parent.mkdir(parents=True, exist_ok=True)
    write_labeled(result.labeled, out)
    print(f"labeled {len(result.labeled)} queries ({result.failed} failed) -> {out}")
    print(f"positive rate: {100 * result.positive_rate:.1f}%")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    labeled_path = cfg.paths.labeled_path
    if not labeled_path.exists():
        raise ConfigError(f"missing labeled dataset: {labeled_path} (run `ragbench label` first)")
    samples = read_labeled(labeled_path)
    train, dev, test = split_dataset(samples, cfg.split)
    embedder = make_backend(cfg.embedders[cfg.classifier_embedder])
    model = train_classifier(train, dev, embedder, cfg.training)
    cfg.paths.model_dir.mkdir(parents=True, exist_ok=True)
    model.save(cfg.paths.classifier_path)
    metrics = {"sizes": {"train": len(train), "dev": len(dev), "test": len(test)}}
    if dev:
        metrics["dev"] = evaluate_classifier(model, dev, embedder)
    if test:
        metrics["test"] = evaluate_classifier(model, test, embedder)
    (cfg.paths.model_dir / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n",
                                                     encoding="utf-8")
    print(f"classifier -> {cfg.paths.classifier_path}")
    for split in ("dev", "test"):
        if split in metrics:
            m = metrics[split]
            print(f"{split}: acc {100 * m['acc']:.1f}  f1 {100 * m['f1']:.1f}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    if not cfg.paths.datasets:
        raise ConfigError("paths.datasets is not set in the config")
    for task, path in cfg.paths.datasets.items():
        _require_path(path, f"paths.datasets.{task}")
    datasets = load_datasets(cfg.paths.datasets)
    presets = _presets(cfg, args)
    configs = [p.config for p in presets]
    components = _components(cfg, classifier=_classifier(cfg, configs))
    load_artifacts(components, configs, cfg.paths.index_dir)
    for c in configs:
        components.prepare(c)

    out = cfg.paths.output_dir
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for preset in presets:
        try:
            report = run_eval(preset.config, datasets, components, cfg.parallelism, setting=preset.setting)
        except ConfigError:
            raise
        except RagBenchError as exc:
            partial = out / "reports.partial.json"
            partial.write_text(reports_json(reports), encoding="utf-8")
            print(f"error: preset {preset.name} failed: {exc}", file=sys.stderr)
            print(f"partial results: {partial}", file=sys.stderr)
            return EXIT_RUNTIME
        reports.append(report)
        with (out / f"samples-{_slug(preset.name)}.jsonl").open("w", encoding="utf-8") as fh:
            for rec in report.sample_records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    table = format_table(reports)
    (out / "reports.json").write_text(reports_json(reports), encoding="utf-8")
    (out / "table.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    print(f"report: {out / 'reports.json'}\ntable: {out / 'table.txt'}")
    return EXIT_OK


def cmd_query(cfg: RunConfig, args) -> int:
    presets = _presets(cfg, args)
    if len(presets) != 1:
        raise ConfigError("query takes a single preset")
    pipe = presets[0].config
    components = _components(cfg, classifier=_classifier(cfg, [pipe]))
    load_artifacts(components, [pipe], cfg.paths.index_dir)
    try:
        trace = answer_query(args.question, pipe, components)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if args.trace and exc.trace is not None:
            print(json.dumps(exc.trace.to_json(), indent=2))
        return EXIT_RUNTIME
    print(trace.final_response)
    if args.trace:
        print(json.dumps(trace.to_json(), indent=2))
    return EXIT_OK


def cmd_demo(args) -> int:
    """Write a synthetic corpus, task files and a matching config."""
    target = Path(args.directory)
    fixture = eval_fixture(per_task=args.per_task, seed=args.seed or 0)
    paths = fixture.write(target / "data")
    config = {
        "seed": args.seed or 0,
        "parallelism": 1,
        "paths": {
            "corpus": "data/corpus.jsonl",
            "datasets": {t: f"data/{paths[t].name}" for t in ("mcq", "yes_no_maybe", "ner")},
            "label_pairs": "data/label_pairs.jsonl",
            "index_dir": "index",
            "model_dir": "model",
            "output_dir": "reports",
        },
        "backends": {"llm": {"kind": "mock", "model_name": "mock-llm"}},
        "pipeline": {"preset": "BP-RAG", "chunk_size": 128, "k": 4},
    }
    (target / "ragbench.yaml").write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    print(f"demo workspace written to {target} (config: {target / 'ragbench.yaml'})")
    return EXIT_OK


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragbench", description="RAG pipeline engine and benchmark grid.")
    parser.add_argument("--version", action="version", version=f"ragbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--parallelism", type=int, help="override the config worker count")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    strategies = [s.value for s in ChunkStrategy]
    kinds = [k.value for k in IndexKind]

    p = sub.add_parser("index", parents=[common], help="chunk the corpus and build indexes")
    p.add_argument("--preset", help="build what this preset needs ('all' for the whole grid)")
    p.add_argument("--strategy", choices=strategies, help="override the chunking strategy")
    p.add_argument("--index-kind", choices=kinds, help="override the index kind")

    p = sub.add_parser("label", parents=[common], help="label (query, response) pairs by log-likelihood gain")
    p.add_argument("--strategy", choices=strategies, help="chunking strategy of the indexes to search")

    sub.add_parser("train", parents=[common], help="train the query classifier on labeled data")

    p = sub.add_parser("eval", parents=[common], help="run presets over the evaluation datasets")
    p.add_argument("--preset", default=None, help="preset name, or 'all' for the 13-row grid")

    p = sub.add_parser("query", parents=[common], help="answer one question")
    p.add_argument("--question", required=True)
    p.add_argument("--preset", default=None, help="preset to answer with (default: the config's)")
    p.add_argument("--strategy", choices=strategies)
    p.add_argument("--index-kind", choices=kinds)
    p.add_argument("--trace", action="store_true", help="also print the generation trace as JSON")

    p = sub.add_parser("demo", help="write a synthetic workspace with a ready-to-use config")
    p.add_argument("directory")
    p.add_argument("--per-task", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    return parser


_COMMANDS = {"index": cmd_index, "label": cmd_label, "train": cmd_train, "eval": cmd_eval, "query": cmd_query}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "demo":
            return cmd_demo(args)
        cfg = load_config(args.config, seed_override=args.seed)
        if args.parallelism is not None:
            if args.parallelism < 1:
                raise ConfigError("--parallelism must be >= 1")
            cfg.parallelism = args.parallelism
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RagBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
