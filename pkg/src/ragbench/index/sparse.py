"""Inverted index with Okapi BM25 scoring."""

from __future__ import annotations

import json
import math
import zlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ragbench.corpus import Chunk, tokenize
from ragbench.errors import ConflictError, InvalidInputError, ParseError
from ragbench.index.hits import ScoredHit, rank

K1 = 1.2
B = 0.75
POSTING_SHARDS = 16


def index_terms(text: str) -> list[str]:
    return [t.lower() for t in tokenize(text)]


@dataclass
class SparseIndex:
    N: int = 0
    avgdl: float = 0.0
    df: dict[str, int] = field(default_factory=dict)
    # term -> [(chunk_id, tf)] sorted by chunk_id
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doclen: dict[str, int] = field(default_factory=dict)

    @property
    def chunk_ids(self) -> frozenset[str]:
        return frozenset(self.doclen)

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        return math.log((self.N - df + 0.5) / (df + 0.5) + 1.0)


def build_sparse(chunks: Sequence[Chunk]) -> SparseIndex:
    idx = SparseIndex()
    postings: dict[str, list[tuple[str, int]]] = {}
    for chunk in chunks:
        if chunk.id in idx.doclen:
            raise ConflictError(f"duplicate chunk id {chunk.id!r}")
        terms = index_terms(chunk.text)
        idx.doclen[chunk.id] = len(terms)
        for term, tf in Counter(terms).items():
            postings.setdefault(term, []).append((chunk.id, tf))
    idx.N = len(idx.doclen)
    idx.avgdl = sum(idx.doclen.values()) / idx.N if idx.N else 0.0
    idx.postings = {t: sorted(p) for t, p in sorted(postings.items())}
    idx.df = {t: len(p) for t, p in idx.postings.items()}
    return idx


def bm25_scores(query: str, idx: SparseIndex, k1: float = K1, b: float = B) -> dict[str, float]:
    """Score every chunk sharing a term with the query. Repeated query terms add repeatedly."""
    scores: dict[str, float] = {}
    if idx.N == 0:
        return scores
    avgdl = idx.avgdl or 1.0
    for term, qtf in Counter(index_terms(query)).items():
        plist = idx.postings.get(term)
        if not plist:
            continue
        idf = idx.idf(term)
        for cid, tf in plist:
            norm = k1 * (1.0 - b + b * idx.doclen[cid] / avgdl)
            scores[cid] = scores.get(cid, 0.0) + qtf * idf * tf * (k1 + 1.0) / (tf + norm)
    return scores


def bm25_search(query: str, idx: SparseIndex, n: int) -> list[ScoredHit]:
    if n <= 0:
        raise InvalidInputError(f"n must be positive, got {n}")
    scores = bm25_scores(query, idx)
    return rank(((cid, s) for cid, s in scores.items() if s > 0.0), n, "sparse")


# --------------------------------------------------------------------------
# persistence: stats.json + postings/shard-XX.jsonl (terms sorted within shard)
# --------------------------------------------------------------------------


def _shard(term: str) -> int:
    return zlib.crc32(term.encode("utf-8")) % POSTING_SHARDS


def save_sparse(idx: SparseIndex, directory: str | Path) -> None:
    directory = Path(directory)
    (directory / "postings").mkdir(parents=True, exist_ok=True)
    header = {
        "format": "ragbench-sparse-1",
        "N": idx.N,
        "avgdl": idx.avgdl,
        "k1": K1,
        "b": B,
        "shards": POSTING_SHARDS,
        "doclen": dict(sorted(idx.doclen.items())),
    }
    (directory / "stats.json").write_text(json.dumps(header, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    shards: list[list[str]] = [[] for _ in range(POSTING_SHARDS)]
    for term in sorted(idx.postings):
        line = json.dumps({"term": term, "df": idx.df[term], "postings": idx.postings[term]},
                          ensure_ascii=False)
        shards[_shard(term)].append(line)
    for i, lines in enumerate(shards):
        (directory / "postings" / f"shard-{i:02d}.jsonl").write_text(
            "".join(line + "\n" for line in lines), encoding="utf-8")


def load_sparse(directory: str | Path) -> SparseIndex:
    directory = Path(directory)
    try:
        header = json.loads((directory / "stats.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read sparse index header: {exc}", path=str(directory)) from None
    idx = SparseIndex(N=header["N"], avgdl=header["avgdl"], doclen=dict(header["doclen"]))
    postings: dict[str, list[tuple[str, int]]] = {}
    for i in range(header["shards"]):
        path = directory / "postings" / f"shard-{i:02d}.jsonl"
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                try:
                    rec = json.loads(line)
                    postings[rec["term"]] = [(cid, int(tf)) for cid, tf in rec["postings"]]
                except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                    raise ParseError(f"bad posting record ({exc})", line=lineno, path=str(path)) from None
    idx.postings = dict(sorted(postings.items()))
    idx.df = {t: len(p) for t, p in idx.postings.items()}
    return idx
