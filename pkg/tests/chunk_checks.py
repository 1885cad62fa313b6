"""Chunking invariant checker shared by unit and acceptance tests.

Works purely from document text and chunk texts: chunk positions are located
by substring search, sentence boundaries recomputed from the splitter.
"""

from ragbench.corpus import ChunkStrategy, sentence_spans, tokenize_count


def locate(doc_text, chunks):
    """Character span of each chunk, found left to right."""
    spans, pos = [], 0
    for c in chunks:
        start = doc_text.find(c.text, pos)
        if start < 0:
            start = doc_text.find(c.text)
        assert start >= 0, f"chunk {c.id} is not a slice of its document"
        spans.append((start, start + len(c.text)))
        pos = start
    return spans


def _oversized_single(text, limit):
    return len(sentence_spans(text)) == 1 and tokenize_count(text) > limit


def check(doc, chunks, strategy, cfg, parents=None):
    """Return a list of violation strings (empty when all invariants hold)."""
    bad = []
    sents = sentence_spans(doc.text)
    spans = locate(doc.text, chunks)
    limit = cfg.small_size if strategy is ChunkStrategy.SMALL2BIG else cfg.chunk_size

    for s, e in sents:
        holders = [i for i, (cs, ce) in enumerate(spans) if cs <= s and e <= ce]
        if not holders:
            bad.append(f"{doc.id}: sentence at {s} not covered")
        elif strategy is not ChunkStrategy.SLIDING_WINDOW and len(holders) != 1:
            bad.append(f"{doc.id}: sentence at {s} in {len(holders)} chunks")

    for c in chunks:
        if tokenize_count(c.text) != c.token_count:
            bad.append(f"{c.id}: token_count mismatch")
        if c.token_count > limit and not _oversized_single(c.text, limit):
            bad.append(f"{c.id}: {c.token_count} tokens > {limit}")

    if strategy is ChunkStrategy.VANILLA:
        for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
            if b0 < a1:
                bad.append(f"{doc.id}: vanilla chunks overlap at {b0}")

    if strategy is ChunkStrategy.SLIDING_WINDOW:
        for (a, (a0, a1)), (b, (b0, b1)) in zip(zip(chunks, spans), zip(chunks[1:], spans[1:])):
            if _oversized_single(a.text, limit) or _oversized_single(b.text, limit):
                continue  # carrying overlap into/out of these would break the size bound
            lo, hi = max(a0, b0), min(a1, b1)
            shared = doc.text[lo:hi] if lo < hi else ""
            full = any(lo <= s and e <= hi for s, e in sents)
            if tokenize_count(shared) < cfg.overlap and not full:
                bad.append(f"{a.id}/{b.id}: overlap {tokenize_count(shared)} tokens, no full sentence")

    if strategy is ChunkStrategy.SMALL2BIG:
        parents = parents or {}
        for parent in {c.parent_id for c in chunks}:
            kids = [c for c in chunks if c.parent_id == parent]
            big = parents.get(parent)
            if big is None:
                bad.append(f"{parent}: missing parent")
                continue
            if big.token_count > cfg.large_size and not _oversized_single(big.text, cfg.large_size):
                bad.append(f"{parent}: {big.token_count} tokens > {cfg.large_size}")
            for k in kids:
                if k.text not in big.text:
                    bad.append(f"{k.id}: not a substring of {parent}")
            if sum(k.token_count for k in kids) != big.token_count:
                bad.append(f"{parent}: small chunks do not partition the parent")
    return bad
