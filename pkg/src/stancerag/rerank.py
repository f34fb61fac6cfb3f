"""Optional reordering of retrieval hits by an external relevance scorer."""

from __future__ import annotations

from dataclasses import dataclass

from .chunker import Chunk
from .errors import RerankUnavailable
from .index import RetrievalHit
from .providers import RerankProvider


@dataclass(frozen=True)
class RerankedHit:
    chunk: Chunk
    rerank_score: float
    new_rank: int
    original_rank: int


def rerank(
    query: str,
    hits: list[RetrievalHit],
    provider: RerankProvider | None = None,
    fallback_to_noop: bool = False,
) -> list[RerankedHit]:
    """Reorder hits by provider score, descending; ties keep retrieval order.

    Without a provider this is the no-op baseline arm: original order, with the
    retrieval similarity standing in as the score. Provider failures propagate
    unless ``fallback_to_noop`` is set.
    """
    if not hits:
        return []
    if provider is None:
        return [
            RerankedHit(chunk=h.chunk, rerank_score=h.similarity, new_rank=h.rank, original_rank=h.rank)
            for h in hits
        ]
    try:
        scores = provider.score(query, [h.chunk.text for h in hits])
    except RerankUnavailable:
        if fallback_to_noop:
            return rerank(query, hits, provider=None)
        raise
    scored = list(zip(hits, scores))
    scored.sort(key=lambda pair: (-pair[1], pair[0].rank))
    return [
        RerankedHit(chunk=h.chunk, rerank_score=float(score), new_rank=i + 1, original_rank=h.rank)
        for i, (h, score) in enumerate(scored)
    ]
