import itertools
from dataclasses import replace

import pytest

from ragbench.backend import BackendConfig, GenerationResult, MockBackend
from ragbench.corpus import ChunkingConfig, ChunkStrategy
from ragbench.errors import BackendUnavailableError, ConfigError, InvalidInputError, PipelineError
from ragbench.eval.presets import best_practice
from ragbench.generate import Components, answer_query
from ragbench.index import EXACT
from ragbench.prompts import DEFAULT_TEMPLATES, Augmentation, Prompting, build_prompt
from ragbench.qclass import ConstantClassifier
from ragbench.retrieve import RetrievedDoc
from ragbench.synthetic import random_corpus

DOCS = random_corpus(15, seed=2)


def components(classifier=ConstantClassifier(True), delay_ms=0.0, llm=None, **kw):
    llm = llm or MockBackend(BackendConfig(model_name="llm", seed=9, delay_ms=delay_ms))
    return Components(llm, documents=DOCS, classifier=classifier, dense_mode=EXACT, **kw)


def cfg(**changes):
    base = best_practice(chunk_size=64, k=3)
    retrieval = {k: changes.pop(k) for k in ("augmentation", "index_kind") if k in changes}
    if retrieval:
        base = replace(base, retrieval=replace(base.retrieval, **retrieval))
    return replace(base, **changes)


class TestPrompt:
    def test_direct_answer_no_docs(self):
        p = build_prompt("Q?", [], Prompting.DIRECT_ANSWER)
        assert "[1]" not in p and "Answer the question directly" in p and p.endswith("Question: Q?\nAnswer:")

    def test_cot_doc_order(self):
        docs = [RetrievedDoc("a", "first doc", 1.0, 1), RetrievedDoc("b", "second doc", 0.5, 2)]
        p = build_prompt("Q?", docs, Prompting.COT)
        assert p.index("[1] first doc") < p.index("[2] second doc") < p.index("Think step by step")

    def test_refine_contains_prior(self):
        p = build_prompt("Q?", ["d"], Prompting.COT_REFINE, prior_response="Answer: B")
        assert "Answer: B" in p

    def test_refine_needs_prior(self):
        with pytest.raises(InvalidInputError):
            build_prompt("Q?", [], Prompting.COT_REFINE)

    def test_budget_drops_lowest_ranked(self):
        docs = ["a" * 50, "b" * 50, "c" * 50]
        p = build_prompt("Q?", docs, Prompting.DIRECT_ANSWER, char_budget=200)
        assert "a" * 50 in p and "c" * 50 not in p and len(p) <= 200

    def test_template_override(self):
        t = DEFAULT_TEMPLATES.with_overrides({"direct_answer": "{docs}>> {query}"})
        assert build_prompt("Q?", ["x"], "direct_answer", templates=t) == "[1] x\n>> Q?"
        with pytest.raises(ConfigError):
            DEFAULT_TEMPLATES.with_overrides({"nope": ""})


class TestAnswer:
    def test_bypass(self):
        comp = components(ConstantClassifier(False))
        trace = answer_query("Is aspirin safe?", cfg(), comp)
        assert trace.classified_need_rag is False and trace.retrieved == []
        assert trace.search_text == "Is aspirin safe?" and trace.final_response
        assert trace.generate_calls == 1 and not trace.rag_path

    def test_no_classification_always_retrieves(self):
        trace = answer_query("kobe?", cfg(use_query_classification=False), components(ConstantClassifier(False)))
        assert trace.classified_need_rag is None and trace.rag_path and len(trace.retrieved) == 3

    @pytest.mark.parametrize("prompting,augmentation", list(itertools.product(Prompting, Augmentation)))
    def test_call_count_contract(self, prompting, augmentation):
        comp = components()
        trace = answer_query("kobe tuni?", cfg(prompting=prompting, augmentation=augmentation), comp)
        expected = (augmentation is not Augmentation.VANILLA) + (2 if prompting is Prompting.COT_REFINE else 1)
        assert trace.generate_calls == expected == comp.llm.generate_calls

    def test_cot_refine_records_first_pass(self):
        trace = answer_query("kobe?", cfg(), components())
        assert trace.no_rag_response and trace.no_rag_response != trace.final_response

    def test_latency_covers_backend_time(self):
        trace = answer_query("kobe?", cfg(), components(delay_ms=15))
        assert trace.backend_latency_s >= 3 * 0.015
        assert trace.latency_s >= trace.backend_latency_s

    def test_deterministic(self):
        a = answer_query("kobe tuni?", cfg(), components())
        b = answer_query("kobe tuni?", cfg(), components())
        assert (a.final_response, a.retrieved, a.search_text) == (b.final_response, b.retrieved, b.search_text)

    def test_missing_classifier(self):
        with pytest.raises(ConfigError):
            answer_query("q", cfg(), components(classifier=None))

    def test_no_rag(self):
        trace = answer_query("q", cfg(use_rag=False), components(classifier=None))
        assert trace.generate_calls == 1 and trace.retrieved == []

    def test_backend_failure_carries_trace(self):
        class FailSecond(MockBackend):
            def generate(self, prompt):
                if self.generate_calls >= 1:
                    raise BackendUnavailableError("gone")
                return super().generate(prompt)

        comp = components(llm=FailSecond(BackendConfig()))
        with pytest.raises(PipelineError) as exc:
            answer_query("kobe?", cfg(augmentation="vanilla"), comp)
        trace = exc.value.trace
        assert trace.retrieved and trace.no_rag_response and trace.final_response == ""

    def test_augmentation_failure_degrades(self):
        class NoAugment(MockBackend):
            def generate(self, prompt):
                if prompt.startswith("Answer the question briefly"):
                    raise BackendUnavailableError("busy")
                return super().generate(prompt)

        trace = answer_query("kobe?", cfg(), components(llm=NoAugment(BackendConfig())))
        assert trace.search_text == "kobe?" and trace.warnings and trace.final_response

    def test_components_require_corpus(self):
        comp = Components(MockBackend(BackendConfig()), classifier=ConstantClassifier(True))
        with pytest.raises(ConfigError):
            comp.prepare(cfg())

    def test_index_cache_shared(self):
        comp = components()
        c = cfg()
        assert comp.index_set(c) is comp.index_set(replace(c, prompting=Prompting.COT))
        other = replace(c, chunking=ChunkingConfig(ChunkStrategy.VANILLA, 64))
        assert comp.index_set(other) is not comp.index_set(c)


def test_metered_result_type():
    r = MockBackend(BackendConfig()).generate("x")
    assert isinstance(r, GenerationResult) and r.latency_s >= 0
