"""Query classification: automatic "need RAG" labeling, dataset splitting,
and a logistic-regression classifier over query embeddings."""

from __future__ import annotations

import json
import logging
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from ragbench.errors import (
    BackendError,
    DegenerateDataError,
    InvalidInputError,
    LabelingError,
    ParseError,
)
from ragbench.prompts import Prompting, build_prompt
from ragbench.retrieve import RetrievedDoc

log = logging.getLogger(__name__)

NEED_RAG = 1
NO_RAG = 0

# 24k : 2k : 1.9k
DEFAULT_SPLIT = (24 / 27.9, 2 / 27.9, 1.9 / 27.9)


@dataclass(frozen=True)
class LabeledQuery:
    query: str
    response: str
    l0: float
    l1: float
    label: int
    doc_ids: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "LabeledQuery":
        return cls(query=obj["query"], response=obj["response"], l0=float(obj["l0"]),
                   l1=float(obj["l1"]), label=int(obj["label"]), doc_ids=list(obj.get("doc_ids", [])))


def label_from_gain(l0: float, l1: float) -> int:
    return NEED_RAG if l1 - l0 > 0 else NO_RAG


Retriever = Callable[[str, int], Sequence[RetrievedDoc]]


def label_query(query: str, response: str, retriever: Retriever, llm, k: int = 8) -> LabeledQuery:
    """Compare the response log-likelihood with and without retrieved documents."""
    try:
        docs = list(retriever(query, k))[:k]
        l0 = llm.log_likelihood(response, build_prompt(query, [], Prompting.DIRECT_ANSWER))
        l1 = llm.log_likelihood(response, build_prompt(query, docs, Prompting.DIRECT_ANSWER))
    except (BackendError, InvalidInputError) as exc:
        raise LabelingError(f"cannot label query {query[:60]!r}: {exc}") from exc
    return LabeledQuery(query, response, l0, l1, label_from_gain(l0, l1), [d.chunk_id for d in docs])


@dataclass
class LabelingResult:
    labeled: list[LabeledQuery]
    failed: int

    @property
    def positive_rate(self) -> float:
        return sum(q.label for q in self.labeled) / len(self.labeled) if self.labeled else 0.0


def label_dataset(pairs: Iterable[tuple[str, str]], retriever: Retriever, llm, k: int = 8,
                  workers: int = 1) -> LabelingResult:
    """Label every (query, response) pair; failures are skipped and counted."""
    pairs = list(pairs)

    def one(pair):
        try:
            return label_query(pair[0], pair[1], retriever, llm, k)
        except LabelingError as exc:
            log.warning("%s", exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]
    labeled = [r for r in results if r is not None]
    return LabelingResult(labeled, len(results) - len(labeled))


def write_labeled(samples: Iterable[LabeledQuery], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_labeled(path: str | Path) -> list[LabeledQuery]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(LabeledQuery.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad labeled record ({exc})", line=lineno, path=str(path)) from None
    return out


# --------------------------------------------------------------------------
# splitting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = DEFAULT_SPLIT[0]
    dev_frac: float = DEFAULT_SPLIT[1]
    test_frac: float = DEFAULT_SPLIT[2]
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.dev_frac, self.test_frac)
        if any(f <= 0 for f in fracs):
            raise InvalidInputError("split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise InvalidInputError(f"split fractions sum to {sum(fracs)}, expected 1")


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    # the epsilon keeps exact products such as 279 * 24/27.9 = 240 from flooring to 239
    n_train = math.floor(n * spec.train_frac + 1e-9)
    n_dev = math.floor(n * spec.dev_frac + 1e-9)
    return n_train, n_dev, n - n_train - n_dev


def split_dataset(samples: Sequence, spec: SplitSpec = SplitSpec()) -> tuple[list, list, list]:
    if not samples:
        raise InvalidInputError("cannot split an empty dataset")
    order = list(range(len(samples)))
    random.Random(spec.seed).shuffle(order)
    shuffled = [samples[i] for i in order]
    n_train, n_dev, _ = split_sizes(len(samples), spec)
    return shuffled[:n_train], shuffled[n_train:n_train + n_dev], shuffled[n_train + n_dev:]


# --------------------------------------------------------------------------
# classifier
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    weight_decay: float = 1e-4
    max_epochs: int = 500
    eval_every: int = 10
    threshold: float = 0.5


@dataclass
class ClassifierModel:
    weights: np.ndarray
    bias: float = 0.0
    threshold: float = 0.5
    history: list[dict] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not 0.0 < self.threshold < 1.0:
            raise InvalidInputError("threshold must lie in (0, 1)")

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    @classmethod
    def zeros(cls, dim: int, threshold: float = 0.5) -> "ClassifierModel":
        return cls(np.zeros(dim), 0.0, threshold)

    def probabilities(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if X.shape[1] != self.dim:
            raise InvalidInputError(f"embedding dimension {X.shape[1]} != model dimension {self.dim}")
        return sigmoid(X @ self.weights + self.bias)

    def save(self, path: str | Path) -> None:
        obj = {"dim": self.dim, "weights": self.weights.tolist(), "bias": self.bias,
               "threshold": self.threshold}
        Path(path).write_text(json.dumps(obj) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierModel":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
            model = cls(np.asarray(obj["weights"], dtype=np.float64), float(obj["bias"]),
                        float(obj["threshold"]))
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"cannot load classifier: {exc}", path=str(path)) from None
        if model.dim != int(obj["dim"]):
            raise ParseError("weights length does not match dim", path=str(path))
        return model


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def loss_and_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                  weight_decay: float) -> tuple[float, np.ndarray, float]:
    """Mean binary cross-entropy plus ``weight_decay / 2 * ||w||^2`` (bias not decayed)."""
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * weight_decay * (w @ w))
    err = sigmoid(z) - y
    grad_w = X.T @ err / len(y) + weight_decay * w
    grad_b = float(np.mean(err))
    return loss, grad_w, grad_b


def _accuracy(model: ClassifierModel, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((model.probabilities(X) >= model.threshold).astype(int) == y))


def embed_queries(queries: Sequence[str], embedder, batch: int = 64) -> np.ndarray:
    rows = [np.asarray(embedder.embed_batch(list(queries[i:i + batch])), dtype=np.float64)
            for i in range(0, len(queries), batch)]
    return np.vstack(rows)


def fit_logistic(X: np.ndarray, y: np.ndarray, X_dev: np.ndarray | None, y_dev: np.ndarray | None,
                 cfg: TrainConfig = TrainConfig()) -> ClassifierModel:
    """Full-batch gradient descent from zero; returns the best-dev-accuracy snapshot."""
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise DegenerateDataError("empty training set")
    if len(np.unique(y)) < 2:
        raise DegenerateDataError("training set contains a single class")
    if X_dev is None or len(X_dev) == 0:
        X_dev, y_dev = X, y
    y_dev = np.asarray(y_dev)
    w = np.zeros(X.shape[1])
    b = 0.0
    best: tuple[float, np.ndarray, float] | None = None
    best_epoch = 0
    history = []
    for epoch in range(cfg.max_epochs + 1):
        loss, gw, gb = loss_and_grad(w, b, X, y, cfg.weight_decay)
        if epoch % cfg.eval_every == 0 or epoch == cfg.max_epochs:
            snap = ClassifierModel(w.copy(), b, cfg.threshold)
            dev_acc = _accuracy(snap, X_dev, y_dev)
            history.append({"epoch": epoch, "loss": loss, "dev_acc": dev_acc})
            # the untrained start is logged but only competes when no step is taken
            if best is None or dev_acc > best[0] or (epoch > 0 and best_epoch == 0):
                best = (dev_acc, w.copy(), b)
                best_epoch = epoch
        if epoch == cfg.max_epochs:
            break
        w = w - cfg.learning_rate * gw
        b = b - cfg.learning_rate * gb
    model = ClassifierModel(best[1], best[2], cfg.threshold)
    model.history = history
    return model


def train_classifier(train: Sequence[LabeledQuery], dev: Sequence[LabeledQuery], embedder,
                     cfg: TrainConfig = TrainConfig()) -> ClassifierModel:
    if not train:
        raise DegenerateDataError("empty training set")
    X = embed_queries([s.query for s in train], embedder)
    y = np.array([s.label for s in train])
    X_dev = embed_queries([s.query for s in dev], embedder) if dev else None
    y_dev = np.array([s.label for s in dev]) if dev else None
    return fit_logistic(X, y, X_dev, y_dev, cfg)


class QueryClassifier(Protocol):
    def classify(self, query: str) -> tuple[bool, float]: ...


@dataclass
class LinearClassifier:
    model: ClassifierModel
    embedder: object

    def classify(self, query: str) -> tuple[bool, float]:
        vec = np.asarray(self.embedder.embed_batch([query])[0])
        prob = float(self.model.probabilities(vec)[0])
        return prob >= self.model.threshold, prob


@dataclass(frozen=True)
class ConstantClassifier:
    """Always returns the same decision; useful for ablations and tests."""

    need_rag: bool

    def classify(self, query: str) -> tuple[bool, float]:
        return self.need_rag, 1.0 if self.need_rag else 0.0


def classify(model: ClassifierModel, query: str, embedder) -> tuple[bool, float]:
    return LinearClassifier(model, embedder).classify(query)


def binary_metrics(preds: Sequence[int], golds: Sequence[int]) -> dict[str, float]:
    """Accuracy plus precision/recall/F1 of the positive class (empty denominators give 0)."""
    if len(preds) != len(golds):
        raise InvalidInputError("preds and golds differ in length")
    if not golds:
        raise InvalidInputError("empty evaluation set")
    tp = sum(1 for p, g in zip(preds, golds) if p == 1 and g == 1)
    fp = sum(1 for p, g in zip(preds, golds) if p == 1 and g == 0)
    fn = sum(1 for p, g in zip(preds, golds) if p == 0 and g == 1)
    acc = sum(1 for p, g in zip(preds, golds) if p == g) / len(golds)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"acc": acc, "precision": precision, "recall": recall, "f1": f1}


def evaluate_classifier(model: ClassifierModel, test: Sequence[LabeledQuery], embedder) -> dict[str, float]:
    if not test:
        raise InvalidInputError("empty test set")
    X = embed_queries([s.query for s in test], embedder)
    preds = (model.probabilities(X) >= model.threshold).astype(int).tolist()
    return binary_metrics(preds, [s.label for s in test])
