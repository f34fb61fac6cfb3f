"""Vector index: embedding ingestion and exact top-k cosine search.

Corpora here are document-scoped and small, so the scan is brute force by
design: determinism beats approximate speed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chunker import Chunk
from .errors import DimensionMismatch, EmbeddingUnavailable
from .providers import EmbeddingProvider

FORMAT_TAG = "stancerag-vecindex"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_id: str


@dataclass(frozen=True)
class RetrievalHit:
    chunk: Chunk
    similarity: float
    rank: int


def embed_batch(texts: list[str], provider: EmbeddingProvider) -> list[EmbeddingVector]:
    """Embed texts in order, L2-normalizing on receipt and checking dimensions."""
    if not texts:
        return []
    raw = provider.embed(list(texts))
    if len(raw) != len(texts):
        raise EmbeddingUnavailable(
            f"provider returned {len(raw)} vectors for {len(texts)} texts"
        )
    dims = {len(v) for v in raw}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed vector dimensions in one batch: {sorted(dims)}")
    matrix = np.asarray(raw, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    matrix = matrix / norms
    return [EmbeddingVector(values=tuple(row), model_id=provider.model_id) for row in matrix]


class VectorIndex:
    """Exact nearest-chunk search over L2-normalized embeddings.

    Upserts are keyed by chunk_id; searches observe a consistent snapshot and
    break similarity ties by (doc_id, chunk index) ascending so runs are
    reproducible.
    """

    def __init__(self, provider: EmbeddingProvider | None = None):
        self.provider = provider
        self.model_id: str | None = provider.model_id if provider else None
        self.dim: int | None = None
        self._chunks: dict[str, Chunk] = {}
        self._vectors: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._chunks)

    def _check_dim(self, dim: int) -> None:
        if self.dim is None:
            self.dim = dim
        elif dim != self.dim:
            raise DimensionMismatch(f"index dimension {self.dim}, got vector of {dim}")

    def index_chunks(self, chunks: list[Chunk]) -> "VectorIndex":
        """Embed and upsert chunks; re-indexing a chunk_id replaces its vector."""
        if not chunks:
            return self
        if self.provider is None:
            raise EmbeddingUnavailable("index has no embedding provider attached")
        vectors = embed_batch([c.text for c in chunks], self.provider)
        for chunk, vec in zip(chunks, vectors):
            arr = np.asarray(vec.values, dtype=np.float64)
            self._check_dim(arr.shape[0])
            self._chunks[chunk.chunk_id] = chunk
            self._vectors[chunk.chunk_id] = arr
        return self

    def _ordered_ids(self) -> list[str]:
        return sorted(self._chunks, key=lambda cid: (self._chunks[cid].doc_id, self._chunks[cid].index))

    def search(self, query_text: str, k: int, doc_filter: set[str] | None = None) -> list[RetrievalHit]:
        """Top-k chunks by cosine similarity (dot product of normalized vectors)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        candidates = [
            cid
            for cid in self._ordered_ids()
            if doc_filter is None or self._chunks[cid].doc_id in doc_filter
        ]
        if not candidates:
            return []
        if self.provider is None:
            raise EmbeddingUnavailable("index has no embedding provider attached")
        query_vec = np.asarray(embed_batch([query_text], self.provider)[0].values, dtype=np.float64)
        matrix = np.stack([self._vectors[cid] for cid in candidates])
        sims = matrix @ query_vec
        order = sorted(
            range(len(candidates)),
            key=lambda i: (-sims[i], self._chunks[candidates[i]].doc_id, self._chunks[candidates[i]].index),
        )
        hits = []
        for rank, idx in enumerate(order[:k], start=1):
            cid = candidates[idx]
            hits.append(RetrievalHit(chunk=self._chunks[cid], similarity=float(sims[idx]), rank=rank))
        return hits

    def save(self, path: str | Path) -> None:
        header = {
            "format": FORMAT_TAG,
            "version": FORMAT_VERSION,
            "dimension": self.dim,
            "model_id": self.model_id,
            "count": len(self._chunks),
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for cid in self._ordered_ids():
                row = {
                    "chunk": self._chunks[cid].to_dict(),
                    "vector": [float(x) for x in self._vectors[cid]],
                }
                fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path, provider: EmbeddingProvider | None = None) -> "VectorIndex":
        index = cls(provider=provider)
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("format") != FORMAT_TAG:
                raise ValueError(f"not a vector index file: {path}")
            if header.get("version") != FORMAT_VERSION:
                raise ValueError(f"unsupported index version {header.get('version')}")
            index.model_id = header.get("model_id")
            index.dim = header.get("dimension")
            if provider is not None and provider.model_id != index.model_id:
                raise DimensionMismatch(
                    f"index built with {index.model_id}, provider is {provider.model_id}"
                )
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                chunk = Chunk.from_dict(row["chunk"])
                index._chunks[chunk.chunk_id] = chunk
                index._vectors[chunk.chunk_id] = np.asarray(row["vector"], dtype=np.float64)
        return index
