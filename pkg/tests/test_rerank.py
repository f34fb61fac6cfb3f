import pytest

from stancerag.chunker import Chunk
from stancerag.errors import RerankUnavailable
from stancerag.index import RetrievalHit
from stancerag.providers import ScriptedRerankProvider, reversing_reranker
from stancerag.rerank import rerank


def make_hits(n):
    hits = []
    for i in range(n):
        chunk = Chunk(
            chunk_id=f"d1:layout:{i:04d}",
            doc_id="d1",
            text=f"chunk number {i}",
            block_span=(i, i),
            index=i,
            method="layout",
        )
        hits.append(RetrievalHit(chunk=chunk, similarity=1.0 - i * 0.1, rank=i + 1))
    return hits


class TestNoOpArm:
    def test_order_preserved(self):
        hits = make_hits(3)
        reranked = rerank("query", hits, provider=None)
        assert [h.new_rank for h in reranked] == [1, 2, 3]
        assert [h.original_rank for h in reranked] == [1, 2, 3]

    def test_score_is_retrieval_similarity(self):
        hits = make_hits(2)
        reranked = rerank("query", hits, provider=None)
        assert [h.rerank_score for h in reranked] == [h.similarity for h in hits]

    def test_empty_hits(self):
        assert rerank("query", [], provider=None) == []


class TestProviderArm:
    def test_reverse_scoring_reverses_order(self):
        hits = make_hits(3)
        reranked = rerank("query", hits, provider=reversing_reranker())
        assert [h.chunk.index for h in reranked] == [2, 1, 0]
        assert [h.new_rank for h in reranked] == [1, 2, 3]
        assert [h.original_rank for h in reranked] == [3, 2, 1]

    def test_equal_scores_keep_original_order(self):
        hits = make_hits(3)
        constant = ScriptedRerankProvider(lambda q, d, i: 1.0)
        reranked = rerank("query", hits, provider=constant)
        assert [h.original_rank for h in reranked] == [1, 2, 3]

    def test_scores_non_increasing_with_new_rank(self):
        hits = make_hits(5)
        provider = ScriptedRerankProvider(lambda q, d, i: (i * 7) % 3)
        reranked = rerank("query", hits, provider=provider)
        scores = [h.rerank_score for h in reranked]
        assert scores == sorted(scores, reverse=True)

    def test_permutation_preserves_chunk_multiset(self):
        hits = make_hits(4)
        provider = ScriptedRerankProvider(lambda q, d, i: (i * 13) % 5)
        reranked = rerank("query", hits, provider=provider)
        assert sorted(h.chunk.chunk_id for h in reranked) == sorted(h.chunk.chunk_id for h in hits)


class TestRerankWithRankingMetrics:
    def test_cue_boost_puts_relevant_first(self):
        from stancerag.metrics import mrr
        from stancerag.providers import cue_boost_reranker

        texts = [f"filler words {i}" for i in range(4)] + ["stance marker 2 gold evidence lives here"]
        hits = make_hits(5)
        hits = [
            RetrievalHit(chunk=Chunk(h.chunk.chunk_id, "d1", texts[i], (i, i), i, "layout"),
                         similarity=h.similarity, rank=h.rank)
            for i, h in enumerate(hits)
        ]
        reranked = rerank("q", hits, provider=cue_boost_reranker())
        ordered = [h.chunk.text for h in sorted(reranked, key=lambda h: h.new_rank)]
        assert mrr(ordered, texts[-1]) == 1.0

    def test_burying_the_only_relevant_hit_gives_one_fifth(self):
        from stancerag.metrics import mrr
        from stancerag.providers import cue_bury_reranker

        texts = ["stance marker 2 gold evidence lives here"] + [f"filler words {i}" for i in range(4)]
        hits = make_hits(5)
        hits = [
            RetrievalHit(chunk=Chunk(h.chunk.chunk_id, "d1", texts[i], (i, i), i, "layout"),
                         similarity=h.similarity, rank=h.rank)
            for i, h in enumerate(hits)
        ]
        reranked = rerank("q", hits, provider=cue_bury_reranker())
        ordered = [h.chunk.text for h in sorted(reranked, key=lambda h: h.new_rank)]
        assert ordered[-1] == texts[0]
        assert mrr(ordered, texts[0]) == 0.2


class TestFailureHandling:
    def test_unavailable_propagates(self):
        class Down(ScriptedRerankProvider):
            def score(self, query, documents):
                raise RerankUnavailable("down")

        with pytest.raises(RerankUnavailable):
            rerank("query", make_hits(2), provider=Down(None))

    def test_fallback_to_noop(self):
        class Down(ScriptedRerankProvider):
            def score(self, query, documents):
                raise RerankUnavailable("down")

        reranked = rerank("query", make_hits(2), provider=Down(None), fallback_to_noop=True)
        assert [h.new_rank for h in reranked] == [1, 2]
