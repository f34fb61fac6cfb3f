import pytest

from stancerag.chunker import Chunk
from stancerag.errors import DimensionMismatch
from stancerag.index import VectorIndex, embed_batch
from stancerag.providers import FixedEmbeddingProvider, HashEmbeddingProvider


def make_chunk(doc_id, idx, text):
    return Chunk(
        chunk_id=f"{doc_id}:layout:{idx:04d}",
        doc_id=doc_id,
        text=text,
        block_span=(idx, idx),
        index=idx,
        method="layout",
    )


class TestEmbedBatch:
    def test_l2_normalization(self):
        emb = FixedEmbeddingProvider({"x": [3.0, 4.0]})
        vectors = embed_batch(["x"], emb)
        assert list(vectors[0].values) == pytest.approx([0.6, 0.8])
        assert vectors[0].model_id == "stub-fixed"

    def test_empty_input(self):
        assert embed_batch([], HashEmbeddingProvider()) == []

    def test_dimension_mismatch(self):
        class Ragged(FixedEmbeddingProvider):
            def embed(self, texts):
                return [[1.0, 0.0], [1.0, 0.0, 0.0]]

        with pytest.raises(DimensionMismatch):
            embed_batch(["a", "b"], Ragged({}))

    def test_order_preserved(self):
        emb = FixedEmbeddingProvider({"a": [1.0, 0.0], "b": [0.0, 1.0]})
        vectors = embed_batch(["a", "b"], emb)
        assert list(vectors[0].values) == [1.0, 0.0]
        assert list(vectors[1].values) == [0.0, 1.0]


class TestVectorIndex:
    def test_index_and_size(self, hash_embedder):
        index = VectorIndex(provider=hash_embedder)
        index.index_chunks([make_chunk("d1", i, f"text {i}") for i in range(3)])
        assert len(index) == 3

    def test_upsert_idempotent(self, hash_embedder):
        chunks = [make_chunk("d1", i, f"text {i}") for i in range(3)]
        index = VectorIndex(provider=hash_embedder)
        index.index_chunks(chunks)
        index.index_chunks(chunks)
        assert len(index) == 3
        first = index.search("text 1", 3)
        index.index_chunks(chunks)
        assert index.search("text 1", 3) == first

    def test_empty_index_search(self, hash_embedder):
        index = VectorIndex(provider=hash_embedder)
        assert index.search("anything", 5) == []

    def test_self_similarity_rank_one(self, hash_embedder):
        chunks = [
            make_chunk("d1", 0, "solar adoption statement"),
            make_chunk("d1", 1, "entirely unrelated filler words"),
        ]
        index = VectorIndex(provider=hash_embedder)
        index.index_chunks(chunks)
        hits = index.search("solar adoption statement", 2)
        assert hits[0].chunk.chunk_id == chunks[0].chunk_id
        assert hits[0].similarity == pytest.approx(1.0)
        assert hits[0].rank == 1

    def test_k_larger_than_index(self, hash_embedder):
        index = VectorIndex(provider=hash_embedder)
        index.index_chunks([make_chunk("d1", i, f"text {i}") for i in range(3)])
        hits = index.search("text 0", 10)
        assert len(hits) == 3
        assert [h.rank for h in hits] == [1, 2, 3]

    def test_tie_break_by_doc_then_index(self):
        emb = FixedEmbeddingProvider(
            {"q": [1.0, 0.0], "same a": [1.0, 0.0], "same b": [1.0, 0.0]}
        )
        chunks = [make_chunk("d2", 0, "same a"), make_chunk("d1", 0, "same b")]
        index = VectorIndex(provider=emb)
        index.index_chunks(chunks)
        hits = index.search("q", 2)
        assert [h.chunk.doc_id for h in hits] == ["d1", "d2"]

    def test_similarity_non_increasing(self, hash_embedder):
        index = VectorIndex(provider=hash_embedder)
        index.index_chunks([make_chunk("d1", i, f"words number {i} extra") for i in range(6)])
        hits = index.search("words number 3", 6)
        sims = [h.similarity for h in hits]
        assert sims == sorted(sims, reverse=True)

    def test_doc_filter(self, hash_embedder):
        index = VectorIndex(provider=hash_embedder)
        index.index_chunks([make_chunk("d1", 0, "alpha beta"), make_chunk("d2", 0, "alpha beta")])
        hits = index.search("alpha beta", 5, doc_filter={"d2"})
        assert [h.chunk.doc_id for h in hits] == ["d2"]

    def test_persistence_round_trip_bit_identical(self, tmp_path, hash_embedder):
        index = VectorIndex(provider=hash_embedder)
        index.index_chunks([make_chunk("d1", i, f"chunk text number {i}") for i in range(5)])
        path = tmp_path / "index.jsonl"
        index.save(path)
        loaded = VectorIndex.load(path, provider=hash_embedder)
        for query in ("chunk text number 2", "unrelated query"):
            assert loaded.search(query, 5) == index.search(query, 5)

    def test_persisted_file_deterministic(self, tmp_path, hash_embedder):
        index = VectorIndex(provider=hash_embedder)
        index.index_chunks([make_chunk("d1", i, f"chunk {i}") for i in range(4)])
        a, b = tmp_path / "a", tmp_path / "b"
        index.save(a)
        index.save(b)
        assert a.read_bytes() == b.read_bytes()

    def test_load_rejects_wrong_provider(self, tmp_path, hash_embedder):
        index = VectorIndex(provider=hash_embedder)
        index.index_chunks([make_chunk("d1", 0, "x")])
        path = tmp_path / "index.jsonl"
        index.save(path)
        with pytest.raises(DimensionMismatch):
            VectorIndex.load(path, provider=FixedEmbeddingProvider({}))
