"""Prompt templates and prompt assembly."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Mapping, Sequence

from ragbench.errors import ConfigError, InvalidInputError

DEFAULT_CHAR_BUDGET = 24_000


class Prompting(str, Enum):
    DIRECT_ANSWER = "direct_answer"
    COT = "cot"
    COT_REFINE = "cot_refine"


class Augmentation(str, Enum):
    VANILLA = "vanilla"
    REWRITE = "rewrite"
    PSEUDO_RESPONSE = "pseudo_response"


@dataclass(frozen=True)
class Templates:
    doc_header: str = "[{rank}] {text}\n"
    direct_answer: str = (
        "{docs}Answer the question directly with only the final answer.\n"
        "Question: {query}\nAnswer:"
    )
    cot: str = (
        "{docs}Think step by step, show intermediate reasoning, then give the final answer.\n"
        "Question: {query}\nReasoning:"
    )
    cot_refine: str = (
        "{docs}Your previous answer was:\n{prior}\n"
        "Reflect on this answer, use the documents above to correct any errors, "
        "and write an improved final answer.\n"
        "Question: {query}\nImproved answer:"
    )
    rewrite: str = (
        "Rewrite the question into 1-3 focused sub-questions for a search engine, one per line.\n"
        "Question: {query}\nSub-questions:"
    )
    pseudo_response: str = (
        "Answer the question briefly using your own knowledge.\n"
        "Question: {query}\nAnswer:"
    )

    def with_overrides(self, overrides: Mapping[str, str]) -> "Templates":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"unknown template(s): {', '.join(sorted(unknown))}")
        return replace(self, **overrides)


DEFAULT_TEMPLATES = Templates()


def _doc_text(doc) -> str:
    return doc if isinstance(doc, str) else doc.text


def format_docs(docs: Sequence, templates: Templates = DEFAULT_TEMPLATES) -> str:
    return "".join(templates.doc_header.format(rank=i, text=_doc_text(d))
                   for i, d in enumerate(docs, start=1))


def build_prompt(query: str, docs: Sequence, strategy: Prompting | str,
                 prior_response: str | None = None,
                 templates: Templates = DEFAULT_TEMPLATES,
                 char_budget: int | None = DEFAULT_CHAR_BUDGET) -> str:
    """Documents first as numbered blocks, then the strategy instruction and the query.

    When the prompt exceeds ``char_budget`` characters, the lowest-ranked
    documents are dropped until it fits (or none remain).
    """
    strategy = Prompting(strategy)
    if strategy is Prompting.COT_REFINE and prior_response is None:
        raise InvalidInputError("cot_refine prompting requires a prior response")
    template = getattr(templates, strategy.value)
    docs = list(docs)
    while True:
        prompt = template.format(docs=format_docs(docs, templates), query=query,
                                 prior=prior_response or "")
        if char_budget is None or len(prompt) <= char_budget or not docs:
            return prompt
        docs.pop()
