"""Model inference backends: generation, log-likelihood scoring, embeddings.

Two implementations share one surface:

* :class:`MockBackend` is a pure function of its config. Generation looks the
  prompt up in a prefix table and otherwise echoes the prompt tail with a
  seeded digest; log-likelihood and embeddings follow fixed token rules.
* :class:`HttpBackend` talks to an OpenAI-compatible server
  (``/v1/completions`` and ``/v1/embeddings``).

Use :func:`make_backend` to get the right one for a :class:`BackendConfig`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import httpx
import numpy as np

from ragbench.corpus import tokenize
from ragbench.errors import (
    BackendUnavailableError,
    ConfigError,
    InvalidInputError,
    UnsupportedOperationError,
)

log = logging.getLogger(__name__)

ENDPOINT_ENV = "RAGBENCH_BACKEND_ENDPOINT"
ECHO_TOKENS = 16
DEFAULT_EMBEDDING_DIM = 64


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"
    model_name: str = "mock"
    endpoint: str = ""
    timeout_ms: int = 30_000
    max_retries: int = 2
    beam_width: int = 3
    max_new_tokens: int = 256
    seed: int = 0
    # mock-only knobs
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    delay_ms: float = 0.0
    responses: Mapping[str, str] = field(default_factory=dict)
    responses_path: str | None = None

    def __post_init__(self):
        if self.kind not in ("http", "mock"):
            raise ConfigError(f"backend kind must be 'http' or 'mock', got {self.kind!r}")
        if self.beam_width < 1:
            raise ConfigError("beam_width must be >= 1")
        if self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be > 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.max_new_tokens <= 0:
            raise ConfigError("max_new_tokens must be > 0")
        if self.embedding_dim <= 0:
            raise ConfigError("embedding_dim must be > 0")
        if self.delay_ms < 0:
            raise ConfigError("delay_ms must be >= 0")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    latency_s: float


class Backend(Protocol):
    config: BackendConfig

    def generate(self, prompt: str) -> GenerationResult: ...

    def log_likelihood(self, continuation: str, context: str) -> float: ...

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def _check_prompt(prompt: str) -> None:
    if not prompt:
        raise InvalidInputError("prompt must be non-empty")


def _check_texts(texts: Sequence[str]) -> None:
    if isinstance(texts, str) or not texts:
        raise InvalidInputError("texts must be a non-empty list of strings")
    for i, t in enumerate(texts):
        if not t:
            raise InvalidInputError(f"texts[{i}] is empty")


def normalize_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise InvalidInputError("cannot normalize a zero embedding")
    return mat / norms


def load_response_table(path: str | Path) -> dict[str, str]:
    with Path(path).open(encoding="utf-8") as fh:
        table = json.load(fh)
    if not isinstance(table, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in table.items()
    ):
        raise ConfigError(f"{path}: response table must map strings to strings")
    return table


class MockBackend:
    """Deterministic stand-in for an inference server."""

    def __init__(self, config: BackendConfig):
        self.config = config
        table = dict(config.responses)
        if config.responses_path:
            table.update(load_response_table(config.responses_path))
        # longest key first so the most specific prefix wins
        self._table = sorted(table.items(), key=lambda kv: (-len(kv[0]), kv[0]))
        self._lock = threading.Lock()
        self._generate_calls = 0

    @property
    def generate_calls(self) -> int:
        return self._generate_calls

    def _delay(self) -> None:
        if self.config.delay_ms:
            time.sleep(self.config.delay_ms / 1000.0)

    def _lookup(self, prompt: str) -> str | None:
        for key, value in self._table:
            if prompt.startswith(key):
                return value
        return None

    def _echo(self, prompt: str) -> str:
        tail = tokenize(prompt)[-ECHO_TOKENS:]
        digest = hashlib.sha256(f"{self.config.seed}\x00{prompt}".encode("utf-8")).hexdigest()[:8]
        return " ".join(tail + [f"<{digest}>"])

    def generate(self, prompt: str) -> GenerationResult:
        _check_prompt(prompt)
        start = time.perf_counter()
        with self._lock:
            self._generate_calls += 1
        self._delay()
        text = self._lookup(prompt)
        if text is None:
            text = self._echo(prompt)
        return GenerationResult(text=text, latency_s=time.perf_counter() - start)

    def log_likelihood(self, continuation: str, context: str) -> float:
        """Each continuation token scores -0.1 if it occurs in the context, else -1.0."""
        if not continuation:
            raise InvalidInputError("continuation must be non-empty")
        self._delay()
        present = {t.lower() for t in tokenize(context)}
        return sum(-0.1 if t.lower() in present else -1.0 for t in tokenize(continuation))

    def _bucket(self, token: str) -> int:
        h = hashlib.blake2b(token.lower().encode("utf-8"), digest_size=8,
                            key=str(self.config.seed).encode("ascii"))
        return int.from_bytes(h.digest(), "little") % self.config.embedding_dim

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        _check_texts(texts)
        self._delay()
        out = np.zeros((len(texts), self.config.embedding_dim), dtype=np.float64)
        for row, text in enumerate(texts):
            tokens = tokenize(text)
            if not tokens:
                raise InvalidInputError(f"texts[{row}] has no tokens to embed")
            for tok in tokens:
                out[row, self._bucket(tok)] += 1.0
        return normalize_rows(out)


class HttpBackend:
    """Client for an OpenAI-compatible completion/embedding server."""

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None):
        endpoint = os.environ.get(ENDPOINT_ENV) or config.endpoint
        if not endpoint:
            raise ConfigError(f"http backend needs an endpoint (config or ${ENDPOINT_ENV})")
        self.config = config
        self.endpoint = endpoint.rstrip("/")
        self._client = httpx.Client(
            base_url=self.endpoint,
            timeout=config.timeout_ms / 1000.0,
            transport=transport,
        )
        self._sleep = time.sleep

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict) -> dict:
        delay = 0.25
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(delay)
                delay *= 2
            try:
                resp = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("POST %s failed (attempt %d): %s", path, attempt + 1, last_error)
                continue
            if 200 <= resp.status_code < 300:
                try:
                    return resp.json()
                except ValueError:
                    last_error = "response body is not JSON"
                    continue
            last_error = f"HTTP {resp.status_code}"
            log.warning("POST %s returned %s (attempt %d)", path, resp.status_code, attempt + 1)
        raise BackendUnavailableError(
            f"{self.endpoint}{path} unavailable after {self.config.max_retries + 1} attempt(s): {last_error}"
        )

    def generate(self, prompt: str) -> GenerationResult:
        _check_prompt(prompt)
        start = time.perf_counter()
        body = self._post("/v1/completions", {
            "model": self.config.model_name,
            "prompt": prompt,
            "max_tokens": self.config.max_new_tokens,
            "temperature": 0.0,
            "n": 1,
            "best_of": self.config.beam_width,
            "use_beam_search": self.config.beam_width > 1,
            "seed": self.config.seed,
        })
        try:
            text = body["choices"][0]["text"]
        except (KeyError, IndexError, TypeError):
            raise BackendUnavailableError("malformed completion response") from None
        return GenerationResult(text=text, latency_s=time.perf_counter() - start)

    def log_likelihood(self, continuation: str, context: str) -> float:
        """Natural-log sum over continuation tokens, via prompt echo with logprobs."""
        if not continuation:
            raise InvalidInputError("continuation must be non-empty")
        body = self._post("/v1/completions", {
            "model": self.config.model_name,
            "prompt": context + continuation,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
            "temperature": 0.0,
        })
        try:
            lp = body["choices"][0]["logprobs"]
            token_logprobs = lp["token_logprobs"]
            offsets = lp["text_offset"]
        except (KeyError, IndexError, TypeError):
            raise UnsupportedOperationError(
                f"{self.endpoint} does not echo token logprobs; log-likelihood unsupported"
            ) from None
        if token_logprobs is None or offsets is None:
            raise UnsupportedOperationError("server returned no token logprobs")
        boundary = len(context)
        total = 0.0
        for value, offset in zip(token_logprobs, offsets):
            if offset >= boundary and value is not None:
                total += float(value)
        return total

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        _check_texts(texts)
        body = self._post("/v1/embeddings", {"model": self.config.model_name, "input": list(texts)})
        try:
            data = sorted(body["data"], key=lambda d: d["index"])
            mat = np.asarray([d["embedding"] for d in data], dtype=np.float64)
        except (KeyError, TypeError, ValueError):
            raise BackendUnavailableError("malformed embedding response") from None
        if mat.ndim != 2 or mat.shape[0] != len(texts):
            raise BackendUnavailableError(
                f"expected {len(texts)} embeddings, got shape {mat.shape}"
            )
        return normalize_rows(mat)


def make_backend(config: BackendConfig, transport: httpx.BaseTransport | None = None) -> Backend:
    if config.kind == "mock":
        return MockBackend(config)
    return HttpBackend(config, transport=transport)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
