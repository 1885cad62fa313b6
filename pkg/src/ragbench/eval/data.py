"""Evaluation datasets: multiple choice, yes/no/maybe, and entity extraction."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

from ragbench.errors import ConflictError, ParseError
from ragbench.eval.parsing import YNM_LABELS, EntityInstance

MCQ = "mcq"
YNM = "yes_no_maybe"
NER = "ner"
TASKS = (MCQ, YNM, NER)

NER_INSTRUCTION = (
    "Extract every named entity from the text. Output a JSON list of objects of the form "
    '[{"mention": "<exact text span>", "type": "<entity type>"}] and nothing else.'
)
YNM_INSTRUCTION = "Answer with yes, no, or maybe."


@dataclass(frozen=True)
class EvalSample:
    id: str
    task: str
    query: str
    gold: Any  # option letter | "yes"/"no"/"maybe" | tuple[EntityInstance, ...]
    options: tuple[tuple[str, str], ...] = ()

    @property
    def letters(self) -> list[str]:
        return [letter for letter, _ in self.options]


def mcq_query(question: str, options: list[tuple[str, str]]) -> str:
    lines = [question, *(f"{letter}. {text}" for letter, text in options)]
    return "\n".join(lines)


def ynm_query(question: str) -> str:
    return f"{question}\n{YNM_INSTRUCTION}"


def ner_query(text: str) -> str:
    return f"{NER_INSTRUCTION}\nText: {text}"


def _mcq(obj: dict) -> EvalSample:
    options = [(str(o["letter"]).strip().upper(), str(o["text"])) for o in obj["options"]]
    letters = [letter for letter, _ in options]
    if len(options) < 2 or len(set(letters)) != len(letters):
        raise ValueError("need at least two options with distinct letters")
    answer = str(obj["answer"]).strip().upper()
    if answer not in letters:
        raise ValueError(f"answer {answer!r} is not an option letter")
    return EvalSample(str(obj["id"]), MCQ, mcq_query(obj["question"], options), answer, tuple(options))


def _ynm(obj: dict) -> EvalSample:
    answer = str(obj["answer"]).strip().lower()
    if answer not in YNM_LABELS:
        raise ValueError(f"answer must be one of {YNM_LABELS}, got {answer!r}")
    return EvalSample(str(obj["id"]), YNM, ynm_query(obj["question"]), answer)


def _ner(obj: dict) -> EvalSample:
    ents = tuple(dict.fromkeys(EntityInstance(e["mention"], e["type"]) for e in obj["entities"]))
    return EvalSample(str(obj["id"]), NER, ner_query(obj["text"]), ents)


_PARSERS: Mapping[str, Callable[[dict], EvalSample]] = {MCQ: _mcq, YNM: _ynm, NER: _ner}


def load_dataset(task: str, path: str | Path) -> list[EvalSample]:
    if task not in _PARSERS:
        raise ValueError(f"unknown task {task!r}")
    parse = _PARSERS[task]
    samples: list[EvalSample] = []
    seen: set[str] = set()
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                sample = parse(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad {task} record ({exc})", line=lineno, path=str(path)) from None
            if sample.id in seen:
                raise ConflictError(f"{path}:{lineno}: duplicate sample id {sample.id!r}")
            seen.add(sample.id)
            samples.append(sample)
    return samples


def load_datasets(paths: Mapping[str, str | Path]) -> dict[str, list[EvalSample]]:
    return {task: load_dataset(task, p) for task, p in paths.items()}
