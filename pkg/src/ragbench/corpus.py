"""Document ingestion, tokenization, sentence splitting and chunking.

Chunks are always built from whole sentences. A chunk's text is the slice of
the source document running from its first sentence to its last, so the
original inter-sentence whitespace is preserved and a chunk built from a
subset of another chunk's sentences is a substring of it.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from ragbench.errors import ConflictError, InvalidInputError, ParseError

# Alphanumeric runs, or any single non-space non-alphanumeric character.
_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_")
_BOUNDARY_RE = re.compile(r"[.!?;](?=\s)")
_ABBREVIATIONS = frozenset({"Dr.", "Mr.", "Mrs.", "Ms.", "Fig.", "e.g.", "i.e."})
_INITIAL_RE = re.compile(r"[A-Z]\.")


class ChunkStrategy(str, Enum):
    VANILLA = "vanilla"
    SMALL2BIG = "small2big"
    SLIDING_WINDOW = "sliding_window"


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    text: str
    source: str


@dataclass(frozen=True)
class ChunkingConfig:
    strategy: ChunkStrategy = ChunkStrategy.SMALL2BIG
    chunk_size: int = 256

    def __post_init__(self):
        object.__setattr__(self, "strategy", ChunkStrategy(self.strategy))
        if self.chunk_size <= 0 or self.chunk_size % 4:
            raise InvalidInputError(
                f"chunk_size must be a positive multiple of 4, got {self.chunk_size}"
            )

    @property
    def small_size(self) -> int:
        return self.chunk_size // 2

    @property
    def large_size(self) -> int:
        return self.chunk_size

    @property
    def overlap(self) -> int:
        return self.chunk_size // 4


@dataclass(frozen=True)
class Chunk:
    id: str
    doc_id: str
    seq_no: int
    text: str
    token_count: int
    strategy: str
    parent_id: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "doc_id": self.doc_id,
            "seq_no": self.seq_no,
            "text": self.text,
            "token_count": self.token_count,
            "parent_id": self.parent_id,
            "strategy": self.strategy,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Chunk":
        return cls(
            id=obj["id"],
            doc_id=obj["doc_id"],
            seq_no=int(obj["seq_no"]),
            text=obj["text"],
            token_count=int(obj["token_count"]),
            strategy=obj["strategy"],
            parent_id=obj.get("parent_id"),
        )


# --------------------------------------------------------------------------
# ingestion
# --------------------------------------------------------------------------

_DOC_FIELDS = ("id", "title", "text", "source")


def ingest(path: str | Path) -> list[Document]:
    """Read a JSON Lines corpus file. Blank lines are skipped."""
    path = Path(path)
    docs: list[Document] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", line=lineno, path=str(path)) from None
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", line=lineno, path=str(path))
            missing = [f for f in _DOC_FIELDS if f not in obj]
            if missing:
                raise ParseError(
                    f"missing field(s) {', '.join(missing)}", line=lineno, path=str(path)
                )
            if not all(isinstance(obj[f], str) for f in _DOC_FIELDS):
                raise ParseError("fields id/title/text/source must be strings", line=lineno, path=str(path))
            if not obj["text"].strip():
                raise ParseError("empty text", line=lineno, path=str(path))
            doc_id = obj["id"]
            if doc_id in seen:
                raise ConflictError(
                    f"{path}:{lineno}: duplicate document id {doc_id!r} (first seen on line {seen[doc_id]})"
                )
            seen[doc_id] = lineno
            docs.append(Document(**{f: obj[f] for f in _DOC_FIELDS}))
    return docs


def write_chunks(chunks: Iterable[Chunk], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for c in chunks:
            fh.write(json.dumps(c.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_chunks(path: str | Path) -> list[Chunk]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(Chunk.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad chunk record ({exc})", line=lineno, path=str(path)) from None
    return out


# --------------------------------------------------------------------------
# tokens and sentences
# --------------------------------------------------------------------------


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def tokenize_count(text: str) -> int:
    return sum(1 for _ in _TOKEN_RE.finditer(text))


def _is_abbreviation(text: str, end: int) -> bool:
    """True if the '.' ending at text[end - 1] closes a guarded abbreviation."""
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    word = text[start:end].lstrip("([{\"'")
    if word in _ABBREVIATIONS or _INITIAL_RE.fullmatch(word):
        return True
    if word == "al.":
        prev = text[:start].rstrip().rsplit(None, 1)
        return bool(prev) and prev[-1] == "et"
    return False


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Return (start, end) offsets of each sentence, whitespace excluded."""
    spans = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        end = m.end()
        if text[end - 1] == "." and _is_abbreviation(text, end):
            continue
        spans.append((start, end))
        start = end
    spans.append((start, len(text)))

    trimmed = []
    for s, e in spans:
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if s < e:
            trimmed.append((s, e))
    return trimmed


def split_sentences(text: str) -> list[str]:
    return [text[s:e] for s, e in sentence_spans(text)]


# --------------------------------------------------------------------------
# chunking
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Sentence:
    start: int
    end: int
    tokens: int


def _sentences(doc: Document) -> list[_Sentence]:
    return [_Sentence(s, e, tokenize_count(doc.text[s:e])) for s, e in sentence_spans(doc.text)]


def _pack(sentences: list[_Sentence], limit: int) -> list[list[_Sentence]]:
    """Greedy packing: append while the running total stays within ``limit``."""
    groups: list[list[_Sentence]] = []
    current: list[_Sentence] = []
    total = 0
    for s in sentences:
        if current and total + s.tokens > limit:
            groups.append(current)
            current, total = [], 0
        current.append(s)
        total += s.tokens
    if current:
        groups.append(current)
    return groups


def chunk_id(doc_id: str, tag: str, seq_no: int) -> str:
    return f"{doc_id}::{tag}::{seq_no:05d}"


def _make_chunk(doc: Document, group: list[_Sentence], tag: str, strategy: str,
                seq_no: int, parent_id: str | None = None) -> Chunk:
    text = doc.text[group[0].start:group[-1].end]
    return Chunk(
        id=chunk_id(doc.id, tag, seq_no),
        doc_id=doc.id,
        seq_no=seq_no,
        text=text,
        token_count=sum(s.tokens for s in group),
        strategy=strategy,
        parent_id=parent_id,
    )


def chunk_vanilla(doc: Document, cfg: ChunkingConfig) -> list[Chunk]:
    groups = _pack(_sentences(doc), cfg.chunk_size)
    tag = ChunkStrategy.VANILLA.value
    return [_make_chunk(doc, g, tag, tag, i) for i, g in enumerate(groups)]


def _sliding_groups(sentences: list[_Sentence], limit: int, overlap: int) -> list[list[_Sentence]]:
    groups: list[list[_Sentence]] = []
    i, n = 0, len(sentences)
    while i < n:
        window: list[_Sentence] = []
        total = 0
        if groups:
            # smallest trailing run of the previous window reaching the overlap length
            for s in reversed(groups[-1]):
                window.insert(0, s)
                total += s.tokens
                if total >= overlap:
                    break
            # drop carried sentences from the front until the next sentence fits
            while window and total + sentences[i].tokens > limit:
                total -= window.pop(0).tokens
        window.append(sentences[i])
        total += sentences[i].tokens
        i += 1
        while i < n and total + sentences[i].tokens <= limit:
            window.append(sentences[i])
            total += sentences[i].tokens
            i += 1
        groups.append(window)
    return groups


def chunk_sliding(doc: Document, cfg: ChunkingConfig) -> list[Chunk]:
    groups = _sliding_groups(_sentences(doc), cfg.chunk_size, cfg.overlap)
    tag = ChunkStrategy.SLIDING_WINDOW.value
    return [_make_chunk(doc, g, tag, tag, i) for i, g in enumerate(groups)]


SMALL_TAG = "small2big.small"
LARGE_TAG = "small2big.large"


def chunk_small2big(doc: Document, cfg: ChunkingConfig) -> tuple[list[Chunk], list[Chunk]]:
    """Return ``(small, large)``. Small chunks partition their parent's sentences."""
    strategy = ChunkStrategy.SMALL2BIG.value
    small: list[Chunk] = []
    large: list[Chunk] = []
    for li, big in enumerate(_pack(_sentences(doc), cfg.large_size)):
        parent = _make_chunk(doc, big, LARGE_TAG, strategy, li)
        large.append(parent)
        for group in _pack(big, cfg.small_size):
            small.append(_make_chunk(doc, group, SMALL_TAG, strategy, len(small), parent.id))
    return small, large


@dataclass
class ChunkSet:
    """Chunks of a whole corpus under one strategy.

    ``retrieval`` are the units that get indexed; ``parents`` is only populated
    for small2big and maps large-chunk id to the large chunk.
    """

    strategy: ChunkStrategy
    retrieval: list[Chunk]
    parents: dict[str, Chunk]

    def by_id(self) -> dict[str, Chunk]:
        return {c.id: c for c in self.retrieval}


def chunk_corpus(docs: Iterable[Document], cfg: ChunkingConfig) -> ChunkSet:
    retrieval: list[Chunk] = []
    parents: dict[str, Chunk] = {}
    for doc in docs:
        if cfg.strategy is ChunkStrategy.VANILLA:
            retrieval.extend(chunk_vanilla(doc, cfg))
        elif cfg.strategy is ChunkStrategy.SLIDING_WINDOW:
            retrieval.extend(chunk_sliding(doc, cfg))
        else:
            small, large = chunk_small2big(doc, cfg)
            retrieval.extend(small)
            parents.update((c.id, c) for c in large)
    return ChunkSet(cfg.strategy, retrieval, parents)


__all__ = [
    "Chunk",
    "ChunkSet",
    "ChunkStrategy",
    "ChunkingConfig",
    "Document",
    "chunk_corpus",
    "chunk_small2big",
    "chunk_sliding",
    "chunk_vanilla",
    "ingest",
    "read_chunks",
    "sentence_spans",
    "split_sentences",
    "tokenize",
    "tokenize_count",
    "write_chunks",
]
