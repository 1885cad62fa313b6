"""Exit criteria for the package, one marked group per criterion.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
summary section that pytest prints at the end.
"""

import json
import random
import time
from dataclasses import replace

import numpy as np
import pytest

from chunk_checks import check
from oracles import bm25_bruteforce, cosine_ranking, fused_ranking, micro_f1_bruteforce
from ragbench.backend import BackendConfig, MockBackend
from ragbench.cli import main
from ragbench.corpus import Chunk, ChunkingConfig, ChunkStrategy, chunk_corpus
from ragbench.eval import (
    BP_RAG,
    MCQ,
    NER,
    NO_RAG,
    YNM,
    EntityInstance,
    accuracy,
    best_practice,
    catalog,
    load_datasets,
    mean,
    micro_f1,
    parse_ner_json,
    relative_change,
    round1,
    run_eval,
)
from ragbench.generate import Components
from ragbench.index import EXACT, HNSW, HNSWParams, build_dense, build_sparse, dense_search, hybrid_search
from ragbench.index.dense import from_vectors
from ragbench.index.sparse import bm25_scores
from ragbench.prompts import Augmentation, Prompting
from ragbench.qclass import (
    ConstantClassifier,
    TrainConfig,
    fit_logistic,
    label_dataset,
    label_from_gain,
    label_query,
    loss_and_grad,
)
from ragbench.retrieve import IndexKind, RetrievalConfig, RetrievedDoc, retrieve
from ragbench.synthetic import eval_fixture, labeling_fixture, make_sentence, make_vocab, random_document
from test_eval import MALFORMED_NER

pytestmark = pytest.mark.acceptance


def synthetic_chunks(n, seed, vocab_size=300):
    rng = random.Random(seed)
    vocab = make_vocab(vocab_size, rng)
    chunks = []
    for i in range(n):
        text = " ".join(make_sentence(rng, vocab, rng.randint(4, 20)) for _ in range(rng.randint(1, 6)))
        chunks.append(Chunk(f"c{i:04d}", f"d{i // 4}", i % 4, text, 0, "vanilla"))
    return chunks, vocab, rng


# ---------------------------------------------------------------- 1


@pytest.mark.criterion(1, "BM25 matches brute-force oracle")
def test_c1_bm25_oracle():
    start = time.perf_counter()
    chunks, vocab, rng = synthetic_chunks(200, seed=11)
    idx = build_sparse(chunks)
    docs = {c.id: c.text for c in chunks}
    worst = 0.0
    for _ in range(50):
        query = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 5)))
        got = bm25_scores(query, idx)
        want = bm25_bruteforce(query, docs)
        assert set(got) <= set(want)
        worst = max(worst, max(abs(got.get(cid, 0.0) - s) for cid, s in want.items()))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-6
    assert elapsed < 5.0


# ---------------------------------------------------------------- 2


@pytest.mark.criterion(2, "dense exact ranking and HNSW recall")
def test_c2_exact_equals_bruteforce():
    rng = np.random.default_rng(21)
    vecs = rng.standard_normal((1000, 48)).astype(np.float32)
    ids = [f"v{i:04d}" for i in range(1000)]
    idx = from_vectors(ids, vecs, EXACT)
    for q in rng.standard_normal((20, 48)).astype(np.float32):
        got = [h.chunk_id for h in dense_search(q, idx, 10)]
        want = [cid for _, cid in cosine_ranking(q, ids, vecs, 10)]
        assert got == want


@pytest.mark.criterion(2, "dense exact ranking and HNSW recall")
def test_c2_hnsw_recall():
    rng = np.random.default_rng(22)
    vecs = rng.standard_normal((10_000, 32))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    ids = [f"v{i:05d}" for i in range(10_000)]
    queries = rng.standard_normal((200, 32))
    start = time.perf_counter()
    ann = from_vectors(ids, vecs, HNSW, HNSWParams(), seed=3)
    found = [{h.chunk_id for h in dense_search(q, ann, 8)} for q in queries]
    elapsed = time.perf_counter() - start
    exact = from_vectors(ids, vecs, EXACT)
    hits = sum(len(f & {h.chunk_id for h in dense_search(q, exact, 8)}) for f, q in zip(found, queries))
    recall = hits / (8 * len(queries))
    print(f"HNSW recall@8 = {recall:.4f}, build+search {elapsed:.1f}s")
    assert recall >= 0.95
    assert elapsed < 60.0


# ---------------------------------------------------------------- 3


@pytest.mark.criterion(3, "hybrid fusion matches oracle")
def test_c3_hybrid_oracle():
    chunks, vocab, rng = synthetic_chunks(50, seed=31, vocab_size=80)
    embedder = MockBackend(BackendConfig(seed=5))
    sparse = build_sparse(chunks)
    dense = build_dense(chunks, embedder, EXACT)
    texts = {c.id: c.text for c in chunks}
    ids = [c.id for c in chunks]
    vectors = embedder.embed_batch([c.text for c in chunks])
    k = 8
    for _ in range(20):
        query = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 4)))
        qv = embedder.embed_batch([query])[0]
        got = hybrid_search(query, qv, sparse, dense, k)
        dense_pool = [(cid, s) for s, cid in cosine_ranking(qv, ids, vectors, 4 * k)]
        bm25 = sorted(((cid, s) for cid, s in bm25_bruteforce(query, texts).items() if s > 0),
                      key=lambda t: (-t[1], t[0]))[:4 * k]
        want = fused_ranking(dense_pool, bm25, k)
        assert [h.chunk_id for h in got] == [cid for cid, _ in want]


# ---------------------------------------------------------------- 4


@pytest.mark.criterion(4, "chunking invariants")
@pytest.mark.parametrize("strategy", list(ChunkStrategy))
def test_c4_chunking_invariants(strategy):
    rng = random.Random(41)
    vocab = make_vocab(400, rng)
    cfg = ChunkingConfig(strategy, 128)
    violations = []
    for i in range(100):
        doc = random_document(rng, vocab, f"doc{i:03d}", rng.randint(1, 40), max_len=cfg.chunk_size // 2,
                              oversized=rng.randint(0, 2), oversized_len=cfg.chunk_size + 30)
        cs = chunk_corpus([doc], cfg)
        violations += check(doc, cs.retrieval, strategy, cfg, cs.parents)
    assert violations == []


# ---------------------------------------------------------------- 5


def fixed_retriever(*texts):
    docs = [RetrievedDoc(f"c{i}", t, 1.0, i + 1) for i, t in enumerate(texts)]
    return lambda query, k: docs[:k]


@pytest.mark.criterion(5, "labeling rule and engineered positive rate")
def test_c5_label_rule_cases():
    llm = MockBackend(BackendConfig())
    gain = label_query("what causes it?", "uric acid", fixed_retriever("high uric acid"), llm)
    same = label_query("what causes it?", "uric acid", fixed_retriever("unrelated text"), llm)
    assert gain.l1 - gain.l0 > 0 and gain.label == 1
    assert same.l1 == same.l0 and same.label == 0
    assert label_from_gain(-2.0, -2.0) == 0
    assert label_from_gain(-2.0, -1.0) == 1
    assert label_from_gain(-1.0, -2.0) == 0


@pytest.mark.criterion(5, "labeling rule and engineered positive rate")
def test_c5_engineered_rate():
    fixture = labeling_fixture(1000, positive_rate=0.179, seed=51)
    start = time.perf_counter()
    cfg = best_practice(chunk_size=128, k=8)
    comp = Components(MockBackend(BackendConfig()), documents=fixture.documents, dense_mode=EXACT)
    indexes = comp.index_set(cfg)
    embedder = comp.embedder(cfg.embedder)
    rc = replace(cfg.retrieval, augmentation=Augmentation.VANILLA)
    result = label_dataset(fixture.pairs, lambda q, k: retrieve(q, replace(rc, k=k), indexes, embedder), comp.llm)
    elapsed = time.perf_counter() - start
    print(f"positive rate {100 * result.positive_rate:.1f}% vs engineered "
          f"{100 * fixture.engineered_rate:.1f}% in {elapsed:.1f}s")
    assert result.failed == 0
    assert abs(result.positive_rate - fixture.engineered_rate) <= 0.03
    assert abs(fixture.engineered_rate - 0.179) < 1e-9
    assert elapsed < 30.0


# ---------------------------------------------------------------- 6


def blobs(n=300, d=10, seed=61):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.standard_normal((n, d)) * 0.5
    X[:, 0] += 3.0 * y
    return X, y


@pytest.mark.criterion(6, "logistic classifier training")
def test_c6_gradient_check():
    X, y = blobs(50, 6)
    w, b, lam = np.random.default_rng(62).standard_normal(6), -0.2, 1e-3
    _, gw, gb = loss_and_grad(w, b, X, y, lam)
    eps = 1e-6
    for j in range(6):
        e = np.zeros(6)
        e[j] = eps
        num = (loss_and_grad(w + e, b, X, y, lam)[0] - loss_and_grad(w - e, b, X, y, lam)[0]) / (2 * eps)
        assert abs(num - gw[j]) <= 1e-5 * max(1.0, abs(num))
    num_b = (loss_and_grad(w, b + eps, X, y, lam)[0] - loss_and_grad(w, b - eps, X, y, lam)[0]) / (2 * eps)
    assert abs(num_b - gb) <= 1e-5 * max(1.0, abs(num_b))


@pytest.mark.criterion(6, "logistic classifier training")
def test_c6_separable_and_monotone():
    X, y = blobs()
    model = fit_logistic(X, y, None, None, TrainConfig(eval_every=1))
    assert np.mean((model.probabilities(X) >= 0.5) == y) >= 0.95
    losses = [h["loss"] for h in model.history]
    assert len(losses) > 2
    assert all(b <= a for a, b in zip(losses, losses[1:]))


# ---------------------------------------------------------------- 7


E = EntityInstance


@pytest.mark.criterion(7, "metric fixtures and malformed entity output")
def test_c7_metric_fixtures():
    assert accuracy(["A", "C", "B", None], ["A", "B", "B", "D"]) == 0.5
    assert accuracy(["yes", "no", "maybe"], ["yes", "no", "maybe"]) == 1.0
    golds = {"s1": [E("aspirin", "Drug"), E("gout", "Disease")], "s2": [E("Kobe", "Location")], "s3": []}
    preds = {"s1": [E("aspirin", "Drug"), E("gout", "Symptom")], "s2": [E("Kobe", "Location")],
             "s3": [E("x", "Y")]}
    # tp 2, predicted 4, gold 3
    m = micro_f1(preds, golds)
    assert m["precision"] == 2 / 4 and m["recall"] == 2 / 3
    assert m["f1"] == 2 * (2 / 4) * (2 / 3) / (2 / 4 + 2 / 3)
    assert micro_f1_bruteforce(preds, golds) == (m["precision"], m["recall"], m["f1"])


@pytest.mark.criterion(7, "metric fixtures and malformed entity output")
def test_c7_malformed_ner():
    assert len(MALFORMED_NER) == 10
    assert [parse_ner_json(t) for t in MALFORMED_NER] == [[]] * 10


# ---------------------------------------------------------------- 8

TABLE = {
    "BP-RAG": (59.7, 56.9, 25.8, 47.5),
    "No RAG": (49.3, 43.4, 20.6, 37.8),
    "RAG_1": (59.3, 55.9, 25.2, 46.7),
    "RAG_2": (59.7, 56.1, 25.4, 47.1),
    "RAG_3": (53.1, 47.3, 22.5, 40.9),
    "RAG_4": (58.9, 55.7, 25.3, 46.6),
    "RAG_5": (55.6, 57.1, 24.1, 45.6),
    "RAG_6": (59.3, 56.2, 25.7, 47.1),
    "RAG_7": (58.5, 55.8, 25.1, 46.5),
    "RAG_8": (57.4, 54.5, 23.8, 45.2),
    "RAG_9": (56.2, 51.6, 22.6, 43.5),
    "RAG_10": (58.2, 55.8, 24.4, 46.1),
    "RAG_11": (54.9, 51.7, 21.9, 42.8),
}


@pytest.mark.criterion(8, "report arithmetic on reference scores")
@pytest.mark.parametrize("row", list(TABLE))
def test_c8_average_column(row):
    # RAG_1 and RAG_3 are printed inconsistently with their own per-task
    # scores (off by 0.10 and 0.07), so those two rows stay red.
    *scores, avg = TABLE[row]
    assert abs(mean(scores) - avg) <= 0.05


@pytest.mark.criterion(8, "report arithmetic on reference scores")
def test_c8_relative_change():
    assert relative_change(14.3, 10.8) == 32.4
    assert abs(relative_change(TABLE[BP_RAG][3], TABLE[NO_RAG][3]) - 25.6) <= 0.2
    assert list(TABLE) == list(catalog())
    assert round1(mean(TABLE[BP_RAG][:3])) == 47.5


# ---------------------------------------------------------------- 9


def expected_calls(cfg, rag_path):
    if not rag_path:
        return 1
    extra = cfg.augmentation in (Augmentation.PSEUDO_RESPONSE, Augmentation.REWRITE)
    return extra + (2 if cfg.prompting is Prompting.COT_REFINE else 1)


def full_run(root):
    cfg = root / "ragbench.yaml"
    assert main(["demo", str(root), "--per-task", "20", "--seed", "0"]) == 0
    for argv in (["index", "--preset", "all"], ["label"], ["train"], ["eval", "--preset", "all"]):
        assert main([argv[0], "--config", str(cfg), *argv[1:]]) == 0
    return (root / "reports" / "table.txt").read_bytes()


@pytest.mark.criterion(9, "end-to-end determinism of the 13-row grid")
def test_c9_end_to_end(tmp_path):
    start = time.perf_counter()
    first = full_run(tmp_path / "a")
    second = full_run(tmp_path / "b")
    elapsed = time.perf_counter() - start
    assert first == second
    body = first.decode().splitlines()[2:]
    assert len(body) == 13
    assert [line.split("|")[0].strip() for line in body] == list(catalog())

    # rerunning eval alone in the same workspace reproduces the table too
    assert main(["eval", "--config", str(tmp_path / "a" / "ragbench.yaml"), "--preset", "all"]) == 0
    assert (tmp_path / "a" / "reports" / "table.txt").read_bytes() == first
    assert elapsed < 120.0

    presets = catalog()
    datasets = load_datasets({t: tmp_path / "a" / "data" / f for t, f in
                              ((MCQ, "mcq.jsonl"), (YNM, "ynm.jsonl"), (NER, "ner.jsonl"))})
    assert sum(len(v) for v in datasets.values()) == 60
    observed = {}
    for name, preset in presets.items():
        path = tmp_path / "a" / "reports" / f"samples-{name.replace(' ', '_')}.jsonl"
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(rows) == 60
        for r in rows:
            if preset.config.use_rag and not preset.config.use_query_classification:
                assert r["rag_path"]
            assert r["generate_calls"] == expected_calls(preset.config, r["rag_path"]), (name, r["id"])
        observed[name] = {r["generate_calls"] for r in rows if r["rag_path"]}
    assert observed[BP_RAG] == {3}
    assert observed["RAG_10"] == {2} and observed["RAG_11"] == {2}
    assert observed[NO_RAG] == set()


# ---------------------------------------------------------------- 10


@pytest.mark.criterion(10, "bypass lowers latency")
def test_c10_bypass_latency(tmp_path):
    fixture = eval_fixture(per_task=5, seed=3)
    paths = fixture.write(tmp_path)
    datasets = load_datasets({t: paths[t] for t in (MCQ, YNM, NER)})
    bp = best_practice(chunk_size=128, k=4)

    def avg_latency(cfg, classifier):
        llm = MockBackend(BackendConfig(delay_ms=10))
        comp = Components(llm, documents=fixture.documents, classifier=classifier, dense_mode=EXACT)
        return run_eval(cfg, datasets, comp).avg_latency_s

    bypass = avg_latency(bp, ConstantClassifier(False))
    always = avg_latency(replace(bp, use_query_classification=False), None)
    print(f"avg latency: bypass-all {bypass:.4f}s, classification disabled {always:.4f}s")
    assert bypass < always
