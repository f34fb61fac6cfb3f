"""HTTP service: document upload, query execution, feedback logging, run retrieval.

State (knowledge base, chunks, index, feedback log, run artifacts) persists
under a single state directory. Indexes are swapped atomically on write so
queries never observe a half-built index.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .chunker import chunk_document
from .config import AppConfig
from .corpus import (
    DocumentConflict,
    DocumentMetadata,
    EmptyDocument,
    KnowledgeBase,
    ingest,
)
from .errors import (
    EmbeddingUnavailable,
    MalformedToolCall,
    ProviderUnavailable,
    RerankUnavailable,
    ScoreOutOfRange,
)
from .index import VectorIndex
from .providers import ProviderSet
from .rerank import rerank
from .stance import QUERIES, PolicyQuery, build_prompt, generate_stance

VERDICTS = ("accept", "reject", "correct")


class ServiceState:
    """Mutable service state with per-document write serialization."""

    def __init__(self, config: AppConfig, providers: ProviderSet, state_dir: str | Path):
        self.config = config
        self.providers = providers
        self.state_dir = Path(state_dir)
        self.runs_dir = self.state_dir / "runs"
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        self.kb_path = self.state_dir / "documents.jsonl"
        self.feedback_path = self.state_dir / "feedback.jsonl"
        self.kb = KnowledgeBase.load(self.kb_path) if self.kb_path.exists() else KnowledgeBase()
        self.index = VectorIndex(provider=providers.embedding)
        self.chunks_by_doc: dict[str, list] = {}
        self._write_lock = threading.Lock()
        self._feedback_seq = 0
        if len(self.kb):
            self._rebuild_index()

    def _rebuild_index(self) -> None:
        fresh = VectorIndex(provider=self.providers.embedding)
        chunks_by_doc = {}
        for doc in self.kb.documents():
            chunks = chunk_document(
                doc, self.config.chunk_method, self.config.chunking, embedder=self.providers.embedding
            )
            chunks_by_doc[doc.doc_id] = chunks
            fresh.index_chunks(chunks)
        # swap-on-write: queries see either the old or the new index, never a mix
        self.index = fresh
        self.chunks_by_doc = chunks_by_doc

    def upload(self, payload: dict) -> tuple[int, dict]:
        required = {"doc_id", "parser_style", "raw_text", "metadata"}
        missing = required - set(payload)
        if missing:
            raise HTTPException(status_code=400, detail=f"missing fields: {sorted(missing)}")
        try:
            metadata = DocumentMetadata.from_dict(payload["metadata"])
            doc = ingest(payload["raw_text"], metadata, payload["doc_id"], payload["parser_style"])
        except (KeyError, ValueError, EmptyDocument) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        with self._write_lock:
            try:
                added = self.kb.add_document(doc)
            except DocumentConflict as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            if added:
                chunks = chunk_document(
                    doc, self.config.chunk_method, self.config.chunking, embedder=self.providers.embedding
                )
                self.chunks_by_doc[doc.doc_id] = chunks
                self.index.index_chunks(chunks)
                self.kb.save(self.kb_path)
        status = 201 if added else 200
        return status, {"doc_id": doc.doc_id, "created": added, "blocks": len(doc.blocks)}

    def _context_for(self, chunk) -> tuple[str, str]:
        doc = self.kb.get(chunk.doc_id)
        if doc is None:
            return "", ""
        start, end = chunk.block_span
        before = " ".join(b.text for b in doc.blocks if b.ordinal == start - 1)
        after = " ".join(b.text for b in doc.blocks if b.ordinal == end + 1)
        return before, after

    def run_query(self, payload: dict) -> tuple[int, dict]:
        if len(self.kb) == 0:
            raise HTTPException(status_code=404, detail="knowledge base is empty")
        query_id = payload.get("query_id")
        query_text = payload.get("query_text")
        if query_id is not None:
            try:
                query = PolicyQuery.by_id(int(query_id))
            except (KeyError, ValueError):
                raise HTTPException(status_code=400, detail="query_id must be in 1..13")
        elif query_text:
            query = PolicyQuery(query_id=0, text=str(query_text))
        else:
            raise HTTPException(status_code=400, detail="query_id or query_text required")

        try:
            k = int(payload.get("k", self.config.k))
        except (TypeError, ValueError):
            raise HTTPException(status_code=400, detail="k must be an integer")
        if k < 1:
            raise HTTPException(status_code=400, detail="k must be >= 1")
        doc_filter = set(payload["doc_ids"]) if payload.get("doc_ids") else None
        prompt_strategy = payload.get("prompt_strategy", self.config.prompt_strategy)

        try:
            hits = self.index.search(query.text, k, doc_filter=doc_filter)
        except EmbeddingUnavailable as exc:
            return 503, {"detail": str(exc), "provider": "embedding", "partial": False, "results": []}

        rerank_error = None
        try:
            reranked = rerank(query.text, hits, provider=self.providers.rerank)
        except RerankUnavailable as exc:
            rerank_error = str(exc)
            reranked = rerank(query.text, hits, provider=None)

        results = []
        provider_errors = []
        if rerank_error:
            provider_errors.append({"provider": "rerank", "error": rerank_error})
        stance_down = False
        for hit in sorted(reranked, key=lambda h: h.new_rank):
            before, after = self._context_for(hit.chunk)
            item = {
                "chunk_id": hit.chunk.chunk_id,
                "doc_id": hit.chunk.doc_id,
                "text": hit.chunk.text,
                "block_span": list(hit.chunk.block_span),
                "rank": hit.new_rank,
                "original_rank": hit.original_rank,
                "rerank_score": hit.rerank_score,
                "context_before": before,
                "context_after": after,
                "stance": None,
            }
            if not stance_down:
                request = build_prompt(prompt_strategy, query, hit.chunk.text)
                try:
                    result = generate_stance(
                        request,
                        self.providers.chat,
                        strategy=prompt_strategy,
                        evidence=hit.chunk.text,
                        retries=self.config.stance_retries,
                    )
                    item["stance"] = {
                        "score": result.score,
                        "reason": result.reason,
                        "strategy": result.strategy,
                    }
                except ProviderUnavailable as exc:
                    stance_down = True
                    provider_errors.append({"provider": "chat", "error": str(exc)})
                except (MalformedToolCall, ScoreOutOfRange) as exc:
                    provider_errors.append(
                        {"provider": "chat", "error": str(exc), "chunk_id": hit.chunk.chunk_id}
                    )
            results.append(item)

        run_id = uuid.uuid4().hex
        partial = stance_down
        response = {
            "run_id": run_id,
            "query_id": query.query_id,
            "query_text": query.text,
            "partial": partial,
            "provider_errors": provider_errors,
            "results": results,
        }
        self._save_run(
            run_id,
            {
                "run_id": run_id,
                "kind": "query",
                "status": "complete",
                "request": payload,
                "response": response,
                "created_at": time.time(),
            },
        )
        if stance_down:
            return 503, response
        return 200, response

    def _save_run(self, run_id: str, bundle: dict) -> None:
        path = self.runs_dir / f"{run_id}.json"
        path.write_text(json.dumps(bundle, sort_keys=True, ensure_ascii=False, indent=2), encoding="utf-8")

    def get_run(self, run_id: str) -> dict:
        path = self.runs_dir / f"{run_id}.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        bundle = json.loads(path.read_text(encoding="utf-8"))
        bundle["partial"] = bundle.get("status") != "complete" or bool(
            bundle.get("response", {}).get("partial")
        )
        return bundle

    def record_feedback(self, payload: dict) -> dict:
        required = {"artifact_id", "query_id", "doc_id", "chunk_id", "verdict"}
        missing = required - set(payload)
        if missing:
            raise HTTPException(status_code=400, detail=f"missing fields: {sorted(missing)}")
        if payload["verdict"] not in VERDICTS:
            raise HTTPException(status_code=400, detail=f"verdict must be one of {VERDICTS}")
        analyst_stance = payload.get("analyst_stance")
        if payload["verdict"] == "correct" and analyst_stance is None:
            raise HTTPException(status_code=400, detail="verdict 'correct' requires analyst_stance")
        for field_name in ("shown_stance", "analyst_stance"):
            value = payload.get(field_name)
            if value is not None and value not in (-2, -1, 0, 1, 2):
                raise HTTPException(status_code=400, detail=f"{field_name} must be in -2..2")
        artifact = self.runs_dir / f"{payload['artifact_id']}.json"
        if not artifact.exists():
            raise HTTPException(status_code=404, detail=f"unknown artifact {payload['artifact_id']!r}")
        with self._write_lock:
            self._feedback_seq += 1
            entry = {
                "entry_id": f"fb-{self._feedback_seq:06d}-{uuid.uuid4().hex[:8]}",
                "seq": self._feedback_seq,
                "artifact_id": payload["artifact_id"],
                "query_id": payload["query_id"],
                "doc_id": payload["doc_id"],
                "chunk_id": payload["chunk_id"],
                "shown_stance": payload.get("shown_stance"),
                "analyst_stance": analyst_stance,
                "verdict": payload["verdict"],
                "note": str(payload.get("note", "")),
                "timestamp": time.time(),
            }
            with open(self.feedback_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
        return {"entry_id": entry["entry_id"]}

    def export_feedback_dataset(self, path: str | Path) -> int:
        """Write feedback entries as dataset-format rows; returns the row count."""
        rows = 0
        entries = []
        if self.feedback_path.exists():
            with open(self.feedback_path, encoding="utf-8") as fh:
                entries = [json.loads(line) for line in fh if line.strip()]
        with open(path, "w", encoding="utf-8") as out:
            for entry in entries:
                doc = self.kb.get(entry["doc_id"])
                meta = doc.metadata if doc else DocumentMetadata("unknown", "en", "", "", "feedback")
                stance = entry["analyst_stance"] if entry["analyst_stance"] is not None else entry["shown_stance"]
                chunk_text = ""
                for chunk in self.chunks_by_doc.get(entry["doc_id"], []):
                    if chunk.chunk_id == entry["chunk_id"]:
                        chunk_text = chunk.text
                        break
                row = {
                    "doc_id": entry["doc_id"],
                    "query_id": entry["query_id"],
                    "evidence": chunk_text or entry["chunk_id"],
                    "stance": stance if stance is not None else 0,
                    "comment": f"analyst verdict: {entry['verdict']}. {entry['note']}".strip(),
                    "company": meta.company,
                    "language": meta.language,
                    "region": meta.region,
                    "date": meta.date,
                }
                out.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
                rows += 1
        return rows


def create_app(config: AppConfig, providers: ProviderSet, state_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="stancerag", version="0.1.0")
    state = ServiceState(config, providers, state_dir or config.service.state_dir)
    app.state.service = state

    async def check_token(request: Request):
        token = config.service.api_token
        if token:
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {token}":
                raise HTTPException(status_code=401, detail="invalid or missing API token")

    @app.get("/health")
    async def health():
        return {"status": "ok", "documents": len(state.kb), "indexed_chunks": len(state.index)}

    @app.get("/config")
    async def get_config(_=Depends(check_token)):
        data = config.to_dict()
        data["service"]["api_token"] = "***" if config.service.api_token else ""
        data["providers"] = providers.ids()
        return data

    @app.get("/queries")
    async def queries():
        return {"queries": [{"query_id": qid, "text": text} for qid, text in sorted(QUERIES.items())]}

    @app.post("/documents")
    async def upload_document(payload: dict, _=Depends(check_token)):
        try:
            status, body = state.upload(payload)
        except EmbeddingUnavailable as exc:
            return JSONResponse(status_code=503, content={"detail": str(exc), "provider": "embedding"})
        return JSONResponse(status_code=status, content=body)

    @app.get("/documents")
    async def list_documents(_=Depends(check_token)):
        return {
            "documents": [
                {
                    "doc_id": doc.doc_id,
                    "parser_style": doc.parser_style,
                    "blocks": len(doc.blocks),
                    "metadata": doc.metadata.to_dict(),
                }
                for doc in state.kb.documents()
            ]
        }

    @app.post("/query")
    async def run_query(payload: dict, _=Depends(check_token)):
        status, body = state.run_query(payload)
        return JSONResponse(status_code=status, content=body)

    @app.post("/feedback")
    async def feedback(payload: dict, _=Depends(check_token)):
        return state.record_feedback(payload)

    @app.get("/runs/{run_id}")
    async def get_run(run_id: str, _=Depends(check_token)):
        return state.get_run(run_id)

    return app


def serve(config: AppConfig, providers: ProviderSet, state_dir: str | Path | None = None) -> None:
    import uvicorn

    app = create_app(config, providers, state_dir)
    uvicorn.run(app, host=config.service.host, port=config.service.port)
