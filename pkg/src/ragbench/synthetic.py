"""Seeded synthetic corpora and task data for tests and demo runs.

Words are drawn from a pronounceable pseudo-vocabulary so that lexical
overlap, and therefore retrieval, is controlled by construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from ragbench.corpus import Document

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"]
_VOWELS = ["a", "e", "i", "o", "u"]
_ENTITY_TYPES = ["PER", "ORG", "LOC", "CHEM"]


def make_vocab(size: int, rng: random.Random, syllables: int = 3) -> list[str]:
    words: set[str] = set()
    while len(words) < size:
        words.add("".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syllables)))
    return sorted(words)


def make_sentence(rng: random.Random, vocab: list[str], n_tokens: int) -> str:
    """A sentence of exactly ``n_tokens`` tokens (words plus the final period)."""
    words = [rng.choice(vocab) for _ in range(max(n_tokens - 1, 1))]
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def random_document(rng: random.Random, vocab: list[str], doc_id: str, n_sentences: int,
                    min_len: int = 3, max_len: int = 40, oversized: int = 0,
                    oversized_len: int = 300) -> Document:
    lengths = [rng.randint(min_len, max_len) for _ in range(n_sentences)]
    for _ in range(oversized):
        lengths[rng.randrange(len(lengths))] = oversized_len
    sentences = [make_sentence(rng, vocab, n) for n in lengths]
    sep = [" ", "  ", "\n", " "]
    text = sentences[0]
    for s in sentences[1:]:
        text += rng.choice(sep) + s
    return Document(doc_id, f"doc {doc_id}", text, "synthetic")


def random_corpus(n_docs: int, seed: int = 0, vocab_size: int = 400, sentences: tuple[int, int] = (3, 30),
                  **kwargs) -> list[Document]:
    rng = random.Random(seed)
    vocab = make_vocab(vocab_size, rng)
    return [random_document(rng, vocab, f"d{i:04d}", rng.randint(*sentences), **kwargs)
            for i in range(n_docs)]


def write_corpus(docs: list[Document], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.id, "title": d.title, "text": d.text, "source": d.source}) + "\n")


# --------------------------------------------------------------------------
# labeling set with an engineered "needs retrieval" rate
# --------------------------------------------------------------------------


@dataclass
class LabelingFixture:
    documents: list[Document]
    pairs: list[tuple[str, str]]
    expected_labels: list[int]

    @property
    def engineered_rate(self) -> float:
        return sum(self.expected_labels) / len(self.expected_labels)


def labeling_fixture(n_queries: int = 1000, positive_rate: float = 0.179, seed: int = 0,
                     filler_docs: int = 50) -> LabelingFixture:
    """Queries whose gold response only the corpus can supply (positives) mixed
    with queries that already contain their response or whose response occurs
    nowhere (negatives)."""
    rng = random.Random(seed)
    vocab = make_vocab(600, rng)
    n_pos = round(n_queries * positive_rate)
    flags = [1] * n_pos + [0] * (n_queries - n_pos)
    rng.shuffle(flags)
    docs: list[Document] = []
    pairs: list[tuple[str, str]] = []
    for i, flag in enumerate(flags):
        key, answer = f"key{i:05d}x", f"ans{i:05d}q"
        if flag:
            text = f"{key} {answer}."
            docs.append(Document(f"fact{i:05d}", "", text, "synthetic"))
            pairs.append((f"{key}?", answer))
        elif i % 2:
            pairs.append((f"{key} {answer}?", answer))
        else:
            pairs.append((f"{key}?", f"unseen{i:05d}z"))
    for j in range(filler_docs):
        docs.append(random_document(rng, vocab, f"fill{j:04d}", rng.randint(3, 10)))
    return LabelingFixture(docs, pairs, flags)


# --------------------------------------------------------------------------
# evaluation suite over a shared knowledge corpus
# --------------------------------------------------------------------------


@dataclass
class EvalFixture:
    documents: list[Document]
    mcq: list[dict]
    ynm: list[dict]
    ner: list[dict]
    label_pairs: list[tuple[str, str]]

    def write(self, directory: str | Path) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": directory / "corpus.jsonl",
            "mcq": directory / "mcq.jsonl",
            "yes_no_maybe": directory / "ynm.jsonl",
            "ner": directory / "ner.jsonl",
            "label_pairs": directory / "label_pairs.jsonl",
        }
        write_corpus(self.documents, paths["corpus"])
        for key, rows in (("mcq", self.mcq), ("yes_no_maybe", self.ynm), ("ner", self.ner)):
            with paths[key].open("w", encoding="utf-8") as fh:
                for row in rows:
                    fh.write(json.dumps(row) + "\n")
        with paths["label_pairs"].open("w", encoding="utf-8") as fh:
            for q, r in self.label_pairs:
                fh.write(json.dumps({"query": q, "response": r}) + "\n")
        return paths


def eval_fixture(per_task: int = 20, seed: int = 0, n_docs: int = 60, n_label: int = 200) -> EvalFixture:
    rng = random.Random(seed)
    vocab = make_vocab(500, rng)
    names = make_vocab(per_task * 6 + n_label, rng, syllables=2)
    docs = [random_document(rng, vocab, f"kb{i:04d}", rng.randint(4, 18), max_len=30) for i in range(n_docs)]
    fact_sentences: list[str] = []

    mcq = []
    for i in range(per_task):
        subject = names.pop()
        letters = ["A", "B", "C", "D"]
        opts = [rng.choice(vocab) for _ in letters]
        answer = rng.choice(letters)
        fact_sentences.append(f"The {subject} is known for {opts[letters.index(answer)]}.")
        mcq.append({
            "id": f"mcq{i:03d}",
            "question": f"What is the {subject} known for?",
            "options": [{"letter": L, "text": t} for L, t in zip(letters, opts)],
            "answer": answer,
        })

    ynm = []
    for i in range(per_task):
        subject = names.pop()
        answer = rng.choice(["yes", "no", "maybe"])
        fact_sentences.append(f"Studies of {subject} concluded {answer} regarding efficacy.")
        ynm.append({"id": f"ynm{i:03d}", "question": f"Is {subject} effective?", "answer": answer})

    ner = []
    for i in range(per_task):
        ents = []
        words = []
        for _ in range(rng.randint(1, 3)):
            mention = names.pop().capitalize()
            etype = rng.choice(_ENTITY_TYPES)
            ents.append({"mention": mention, "type": etype})
            fact_sentences.append(f"{mention} is a {etype.lower()} entity.")
            words += [rng.choice(vocab), mention]
        ner.append({"id": f"ner{i:03d}", "text": " ".join(words) + ".", "entities": ents})

    # scatter the fact sentences over the knowledge documents
    for j, fact in enumerate(fact_sentences):
        d = docs[j % len(docs)]
        docs[j % len(docs)] = Document(d.id, d.title, d.text + " " + fact, d.source)

    # phrasing separates the classes: "known for" facts sit in short documents
    # of their own, "effective" questions are answered by a word in the query
    label_pairs = []
    for i in range(n_label):
        subject = names.pop()
        if rng.random() < 0.5:
            value = rng.choice(vocab)
            docs.append(Document(f"lab{i:04d}", "", f"{subject} known for {value}.", "synthetic"))
            label_pairs.append((f"What is {subject} known for?", value))
        else:
            label_pairs.append((f"Is {subject} effective?", subject))
    return EvalFixture(docs, mcq, ynm, ner, label_pairs)
