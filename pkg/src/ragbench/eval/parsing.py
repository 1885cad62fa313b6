"""Turn free-form model output into scorable answers."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable

_ANSWER_IS = re.compile(r"(?i:answer\s*(?:is|:))\s*\(?([A-Za-z])\)?(?![A-Za-z0-9])")
_STANDALONE_LETTER = re.compile(r"(?<![A-Za-z0-9])([A-Z])(?![A-Za-z0-9])")
_YNM = re.compile(r"\b(yes|no|maybe)\b", re.IGNORECASE)
_ANSWER_WORD = re.compile(r"\banswer", re.IGNORECASE)

YNM_LABELS = ("yes", "no", "maybe")


@dataclass(frozen=True, order=True)
class EntityInstance:
    mention: str
    type: str

    def __post_init__(self):
        if not self.mention or not self.type:
            raise ValueError("entity mention and type must be non-empty")


def _closes(text: str, pos: int) -> bool:
    rest = text[pos:].lstrip(" ")
    return not rest or rest[0] in ".,;:!?)]\n"


def parse_mcq_answer(text: str, options: Iterable[str]) -> str | None:
    """Return an option letter, or None when nothing usable is found.

    ``answer is X`` / ``Answer: X`` wins; otherwise the last standalone
    capital letter that names an option.
    """
    letters = {o.upper() for o in options}
    if not letters:
        raise ValueError("options must be non-empty")
    for m in _ANSWER_IS.finditer(text):
        letter = m.group(1).upper()
        # lowercase only when closed by punctuation, so "the answer is a bit..." is skipped
        if m.group(1).islower() and not _closes(text, m.end()):
            continue
        if letter in letters:
            return letter
    last = None
    for m in _STANDALONE_LETTER.finditer(text):
        if m.group(1) in letters:
            last = m.group(1)
    return last


def parse_ynm(text: str) -> str | None:
    anchors = list(_ANSWER_WORD.finditer(text))
    if anchors:
        m = _YNM.search(text, anchors[-1].end())
        if m:
            return m.group(1).lower()
    found = _YNM.findall(text)
    return found[-1].lower() if found else None


def _balanced_array(text: str, start: int) -> str | None:
    """The JSON array starting at ``text[start] == '['``, if brackets balance."""
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1] if ch == "]" else None
            if depth < 0:
                return None
    return None


def parse_ner_json(text: str) -> list[EntityInstance]:
    """Entities from the first balanced JSON array; any failure yields []."""
    candidate = None
    for m in re.finditer(r"\[", text):
        candidate = _balanced_array(text, m.start())
        if candidate is not None:
            break
    if candidate is None:
        return []
    try:
        data = json.loads(candidate)
    except json.JSONDecodeError:
        return []
    if not isinstance(data, list):
        return []
    out: dict[EntityInstance, None] = {}
    for item in data:
        if not isinstance(item, dict):
            return []
        mention, etype = item.get("mention"), item.get("type")
        if not isinstance(mention, str) or not isinstance(etype, str) or not mention or not etype:
            return []
        out[EntityInstance(mention, etype)] = None
    return list(out)
