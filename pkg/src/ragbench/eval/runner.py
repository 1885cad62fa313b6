"""Run presets over evaluation datasets and tabulate the results."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Sequence

from ragbench.errors import ConfigError, PipelineError, RagBenchError
from ragbench.eval.data import MCQ, NER, TASKS, YNM, EvalSample
from ragbench.eval.metrics import accuracy, mean, micro_f1, round1
from ragbench.eval.parsing import parse_mcq_answer, parse_ner_json, parse_ynm
from ragbench.eval.presets import Preset
from ragbench.generate import Components, GenerationTrace, PipelineConfig, answer_query

log = logging.getLogger(__name__)

TASK_COLUMNS = {MCQ: "MCQ", YNM: "YNM", NER: "NER"}


@dataclass
class SampleResult:
    id: str
    task: str
    response: str | None
    prediction: Any
    latency_s: float
    generate_calls: int
    rag_path: bool
    error: str | None = None


@dataclass
class EvalReport:
    config: str
    per_task: dict[str, float]
    avg_score: float
    avg_latency_s: float
    n_samples: dict[str, int]
    setting: str = ""
    samples: list[SampleResult] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "per_task": self.per_task,
            "avg_score": self.avg_score,
            "avg_latency_s": self.avg_latency_s,
            "n_samples": self.n_samples,
        }

    def sample_records(self) -> list[dict]:
        return [asdict(s) for s in self.samples]


def _predict(sample: EvalSample, response: str | None):
    if response is None:
        return [] if sample.task == NER else None
    if sample.task == MCQ:
        return parse_mcq_answer(response, sample.letters)
    if sample.task == YNM:
        return parse_ynm(response)
    return parse_ner_json(response)


def task_score(task: str, samples: Sequence[EvalSample], predictions: Sequence) -> float:
    """Percent: accuracy for choice tasks, strict micro-F1 for entity extraction."""
    if task == NER:
        preds = {s.id: p for s, p in zip(samples, predictions)}
        golds = {s.id: s.gold for s in samples}
        return 100.0 * micro_f1(preds, golds)["f1"]
    return 100.0 * accuracy(list(predictions), [s.gold for s in samples])


def _answer(sample: EvalSample, cfg: PipelineConfig, components: Components) -> SampleResult:
    try:
        trace = answer_query(sample.query, cfg, components)
        error = None
    except PipelineError as exc:
        trace = exc.trace or GenerationTrace(query=sample.query)
        error = str(exc)
        log.warning("sample %s failed under %s: %s", sample.id, cfg.preset_name, exc)
    except ConfigError:
        raise
    except RagBenchError as exc:
        trace = GenerationTrace(query=sample.query)
        error = str(exc)
        log.warning("sample %s failed under %s: %s", sample.id, cfg.preset_name, exc)
    response = None if error else trace.final_response
    prediction = _predict(sample, response)
    return SampleResult(sample.id, sample.task, response, prediction, trace.latency_s,
                        trace.generate_calls, trace.rag_path, error)


def run_eval(cfg: PipelineConfig, datasets: Mapping[str, Sequence[EvalSample]], components: Components,
             parallelism: int = 1, setting: str = "") -> EvalReport:
    components.prepare(cfg)
    tasks = [t for t in TASKS if datasets.get(t)] + sorted(set(datasets) - set(TASKS))
    samples = [s for t in tasks for s in datasets[t]]
    if not samples:
        raise ConfigError("no evaluation samples")
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(lambda s: _answer(s, cfg, components), samples))
    else:
        results = [_answer(s, cfg, components) for s in samples]

    per_task: dict[str, float] = {}
    n_samples: dict[str, int] = {}
    for task in tasks:
        pairs = [(s, r) for s, r in zip(samples, results) if s.task == task]
        per_task[task] = task_score(task, [s for s, _ in pairs], [r.prediction for _, r in pairs])
        n_samples[task] = len(pairs)
    total_latency = sum(r.latency_s for r in results)
    return EvalReport(
        config=cfg.preset_name or "custom",
        per_task=per_task,
        avg_score=mean(list(per_task.values())),
        avg_latency_s=total_latency / len(results),
        n_samples=n_samples,
        setting=setting,
        samples=results,
    )


def grid_run(presets: Sequence[Preset], datasets: Mapping[str, Sequence[EvalSample]],
             components: Components, parallelism: int = 1) -> list[EvalReport]:
    """One report per preset, in the given order. Indexes are shared through ``components``."""
    return [run_eval(p.config, datasets, components, parallelism, setting=p.setting) for p in presets]


def format_table(reports: Sequence[EvalReport], tasks: Sequence[str] = TASKS) -> str:
    """Aligned text table: method, setting, one column per task, average score and latency."""
    header = ["Method", "RAG Setting", *(TASK_COLUMNS.get(t, t) for t in tasks), "Avg score", "Avg latency"]
    rows = [header]
    for r in reports:
        scores = [f"{round1(r.per_task[t]):.1f}" if t in r.per_task else "-" for t in tasks]
        rows.append([r.config, r.setting or "-", *scores, f"{round1(r.avg_score):.1f}",
                     f"{round1(r.avg_latency_s):.1f}"])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]

    def fmt(row):
        cells = [row[0].ljust(widths[0]), row[1].ljust(widths[1])]
        cells += [c.rjust(w) for c, w in zip(row[2:], widths[2:])]
        return " | ".join(cells).rstrip()

    rule = "-+-".join("-" * w for w in widths)
    lines = [fmt(rows[0]), rule, *(fmt(r) for r in rows[1:])]
    return "\n".join(lines) + "\n"


def reports_json(reports: Sequence[EvalReport]) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True) + "\n"
