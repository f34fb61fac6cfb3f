"""Evidence retrieval and stance scoring for corporate climate-policy documents."""

__version__ = "0.1.0"

from .chunker import Chunk, ChunkerConfig, layout_chunk, semantic_chunk
from .corpus import (
    DocumentMetadata,
    EvidenceRecord,
    KnowledgeBase,
    ParsedDocument,
    ingest_layout_markdown,
    ingest_plain_lines,
    load_dataset,
    normalize_text,
)
from .harness import EvalConfig, EvalReport
from .index import RetrievalHit, VectorIndex
from .metrics import (
    exact_match,
    helpfulness,
    hit_rate_tolerance,
    lcs_len,
    mrr,
    nlcs_chunk,
    nlcs_parse,
    recall_at_k,
)
from .rerank import RerankedHit, rerank
from .stance import (
    QUERIES,
    EvidenceSelection,
    PolicyQuery,
    StanceResult,
    build_prompt,
    generate_stance,
    select_evidence,
)

__all__ = [
    "Chunk",
    "ChunkerConfig",
    "DocumentMetadata",
    "EvalConfig",
    "EvalReport",
    "EvidenceRecord",
    "EvidenceSelection",
    "KnowledgeBase",
    "ParsedDocument",
    "PolicyQuery",
    "QUERIES",
    "RerankedHit",
    "RetrievalHit",
    "StanceResult",
    "VectorIndex",
    "build_prompt",
    "exact_match",
    "generate_stance",
    "helpfulness",
    "hit_rate_tolerance",
    "ingest_layout_markdown",
    "ingest_plain_lines",
    "layout_chunk",
    "lcs_len",
    "load_dataset",
    "mrr",
    "nlcs_chunk",
    "nlcs_parse",
    "normalize_text",
    "recall_at_k",
    "rerank",
    "select_evidence",
    "semantic_chunk",
]
