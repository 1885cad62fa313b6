"""Evaluation harness: datasets, answer parsing, metrics, presets and grid runs."""

from ragbench.eval.data import MCQ, NER, TASKS, YNM, EvalSample, load_dataset, load_datasets
from ragbench.eval.metrics import accuracy, mean, micro_f1, relative_change, round1
from ragbench.eval.parsing import EntityInstance, parse_mcq_answer, parse_ner_json, parse_ynm
from ragbench.eval.presets import BP_RAG, NO_RAG, DEFAULT_EMBEDDERS, Preset, best_practice, catalog, select
from ragbench.eval.runner import EvalReport, SampleResult, format_table, grid_run, reports_json, run_eval

__all__ = [
    "BP_RAG",
    "DEFAULT_EMBEDDERS",
    "MCQ",
    "NER",
    "NO_RAG",
    "TASKS",
    "YNM",
    "EntityInstance",
    "EvalReport",
    "EvalSample",
    "Preset",
    "SampleResult",
    "accuracy",
    "best_practice",
    "catalog",
    "format_table",
    "grid_run",
    "load_dataset",
    "load_datasets",
    "mean",
    "micro_f1",
    "parse_mcq_answer",
    "parse_ner_json",
    "parse_ynm",
    "relative_change",
    "reports_json",
    "round1",
    "run_eval",
    "select",
]
