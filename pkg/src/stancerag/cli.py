"""Operator command line: every pipeline stage and evaluation protocol, scriptable.

Exit codes: 0 success, 2 usage, 3 provider error, 4 data error, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, syncorpus
from .chunker import chunk_document, dump_chunks, load_chunks
from .config import AppConfig, config_hash, load_config
from .corpus import load_corpus_dir
from .errors import DataError, ProviderError
from .index import VectorIndex
from .providers import (
    ProviderSet,
    build_http_providers,
    build_stub_providers,
    cue_boost_reranker,
)
from .rerank import rerank as rerank_hits
from .stance import (
    PROMPT_STRATEGIES,
    EvidenceSelection,
    PolicyQuery,
    build_prompt,
    generate_stance,
    select_evidence,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PROVIDER = 3
EXIT_DATA = 4


def _add_provider_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="configuration file (YAML or JSON)")
    parser.add_argument("--provider", choices=("stub", "http"), default="stub")
    parser.add_argument("--stub-embedder", choices=("hash", "random"), default="hash")
    parser.add_argument(
        "--stub-chat",
        choices=("echo", "offset", "malformed", "out_of_range"),
        default="echo",
    )
    parser.add_argument("--stub-reranker", choices=("none", "reverse", "cue_boost", "cue_bury"), default="none")
    parser.add_argument("--seed", type=int, default=0)


def _add_eval_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sigma-threshold", type=float, default=None)
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--tolerance", type=int, default=None)
    parser.add_argument("--strategies", help="comma-separated evidence selection strategies")
    parser.add_argument("--prompt-strategy", choices=PROMPT_STRATEGIES, default=None)
    parser.add_argument("--chunk-method", choices=("layout", "semantic"), default="semantic")
    parser.add_argument("--replay", help="replay from a previous run directory (providers disabled)")


def _build_providers(args, config: AppConfig) -> ProviderSet:
    if args.provider == "http":
        return build_http_providers(config)
    reranker = None if args.stub_reranker == "none" else args.stub_reranker
    return build_stub_providers(
        embedder=args.stub_embedder,
        chat=args.stub_chat,
        reranker=reranker,
        seed=args.seed,
    )


def _eval_config(args, config: AppConfig) -> harness.EvalConfig:
    cfg = harness.EvalConfig(
        sigma_threshold=config.sigma_threshold,
        k=config.k,
        tolerance=config.tolerance,
        selection_strategies=config.selection_strategies,
        prompt_strategy=config.prompt_strategy,
        stance_retries=config.stance_retries,
        faithfulness_fallback=config.faithfulness_fallback,
        max_parallel=config.max_parallel,
        chunker=config.chunking,
    )
    if getattr(args, "sigma_threshold", None) is not None:
        cfg.sigma_threshold = args.sigma_threshold
    if getattr(args, "k", None) is not None:
        cfg.k = args.k
    if getattr(args, "tolerance", None) is not None:
        cfg.tolerance = args.tolerance
    if getattr(args, "strategies", None):
        cfg.selection_strategies = tuple(s.strip() for s in args.strategies.split(",") if s.strip())
    if getattr(args, "prompt_strategy", None):
        cfg.prompt_strategy = args.prompt_strategy
    return cfg


def _emit_status(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, ensure_ascii=False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stancerag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate the seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--docs-per-language", type=int, default=20)
    p.add_argument("--languages", default="en,de,fr,ja")

    p = sub.add_parser("ingest", help="ingest a corpus directory into a knowledge base file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="knowledge base JSONL path")

    p = sub.add_parser("chunk", help="chunk every corpus document and dump the chunks")
    _add_provider_args(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--method", choices=("layout", "semantic"), default="layout")
    p.add_argument("--out", required=True)

    p = sub.add_parser("index", help="build a vector index from a chunk dump")
    _add_provider_args(p)
    p.add_argument("--chunks", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("retrieve", help="search an index")
    _add_provider_args(p)
    p.add_argument("--index", required=True)
    p.add_argument("--query-id", type=int)
    p.add_argument("--query-text")
    p.add_argument("--doc", action="append", help="restrict to these doc ids")
    p.add_argument("--k", type=int, default=5)

    p = sub.add_parser("answer", help="retrieve, select evidence, and generate a stance")
    _add_provider_args(p)
    p.add_argument("--index", required=True)
    p.add_argument("--query-id", type=int, required=True)
    p.add_argument("--doc", action="append")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--selection", choices=("FR", "AR", "BM", "GT"), default="FR")
    p.add_argument("--gold", help="gold evidence text (required for BM/GT)")
    p.add_argument("--prompt-strategy", choices=PROMPT_STRATEGIES, default="fs_few_query_few_stance")

    p = sub.add_parser("eval", help="run an evaluation protocol")
    p.add_argument("stage", choices=harness.STAGES)
    _add_provider_args(p)
    _add_eval_args(p)
    p.add_argument("--corpus")
    p.add_argument("--run-dir", required=True)
    p.add_argument(
        "--prompt-strategies",
        help="comma-separated prompt strategies for `eval stance` (default: all five)",
    )

    p = sub.add_parser("report", help="render a run directory's report")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--format", choices=("table_text", "structured"), default="table_text")

    p = sub.add_parser("serve", help="start the HTTP service")
    _add_provider_args(p)
    p.add_argument("--state", help="state directory override")
    p.add_argument("--host")
    p.add_argument("--port", type=int)

    return parser


def _cmd_gen_corpus(args) -> int:
    languages = tuple(s.strip() for s in args.languages.split(",") if s.strip())
    summary = syncorpus.generate_corpus(
        args.out, seed=args.seed, docs_per_language=args.docs_per_language, languages=languages
    )
    _emit_status({"status": "ok", "command": "gen-corpus", **summary})
    return EXIT_OK


def _cmd_ingest(args) -> int:
    kb, records = load_corpus_dir(args.corpus)
    kb.save(args.out)
    _emit_status(
        {"status": "ok", "command": "ingest", "documents": len(kb), "records": len(records), "out": args.out}
    )
    return EXIT_OK


def _cmd_chunk(args, config: AppConfig) -> int:
    providers = _build_providers(args, config)
    kb, _ = load_corpus_dir(args.corpus)
    chunks = []
    for doc in kb.documents():
        chunks.extend(chunk_document(doc, args.method, config.chunking, embedder=providers.embedding))
    dump_chunks(chunks, args.out)
    _emit_status({"status": "ok", "command": "chunk", "method": args.method, "chunks": len(chunks), "out": args.out})
    return EXIT_OK


def _cmd_index(args, config: AppConfig) -> int:
    providers = _build_providers(args, config)
    chunks = load_chunks(args.chunks)
    index = VectorIndex(provider=providers.embedding)
    index.index_chunks(chunks)
    index.save(args.out)
    _emit_status({"status": "ok", "command": "index", "chunks": len(index), "out": args.out})
    return EXIT_OK


def _resolve_query(args) -> PolicyQuery:
    if args.query_id is not None:
        return PolicyQuery.by_id(args.query_id)
    if args.query_text:
        return PolicyQuery(query_id=0, text=args.query_text)
    raise DataError("either --query-id or --query-text is required")


def _cmd_retrieve(args, config: AppConfig) -> int:
    providers = _build_providers(args, config)
    index = VectorIndex.load(args.index, provider=providers.embedding)
    query = _resolve_query(args)
    doc_filter = set(args.doc) if args.doc else None
    hits = index.search(query.text, args.k, doc_filter=doc_filter)
    _emit_status(
        {
            "status": "ok",
            "command": "retrieve",
            "query_id": query.query_id,
            "hits": [
                {"chunk_id": h.chunk.chunk_id, "rank": h.rank, "similarity": h.similarity, "text": h.chunk.text}
                for h in hits
            ],
        }
    )
    return EXIT_OK


def _cmd_answer(args, config: AppConfig) -> int:
    providers = _build_providers(args, config)
    index = VectorIndex.load(args.index, provider=providers.embedding)
    query = PolicyQuery.by_id(args.query_id)
    doc_filter = set(args.doc) if args.doc else None
    hits = index.search(query.text, args.k, doc_filter=doc_filter)
    reranked = rerank_hits(query.text, hits, provider=providers.rerank)
    evidence = select_evidence(EvidenceSelection(mode=args.selection, k=args.k), reranked, gold=args.gold)
    request = build_prompt(args.prompt_strategy, query, evidence)
    result = generate_stance(
        request, providers.chat, strategy=args.prompt_strategy, evidence=evidence, retries=config.stance_retries
    )
    _emit_status(
        {
            "status": "ok",
            "command": "answer",
            "query_id": query.query_id,
            "selection": args.selection,
            "score": result.score,
            "reason": result.reason,
        }
    )
    return EXIT_OK


def _cmd_eval(args, config: AppConfig) -> int:
    cfg = _eval_config(args, config)
    if args.replay:
        report = harness.run_eval_stage(
            args.stage, args.run_dir, cfg, replay_from=args.replay, chunk_method=args.chunk_method
        )
    else:
        if not args.corpus:
            raise DataError("--corpus is required unless --replay is given")
        providers = _build_providers(args, config)
        rerank_arms = {}
        if args.stage == "rerank":
            rerank_arms = {"cue_boost": cue_boost_reranker()} if args.provider == "stub" else {}
            if providers.rerank is not None:
                rerank_arms[providers.rerank.model_id] = providers.rerank
        if args.stage == "stance":
            if args.prompt_strategies:
                prompt_strategies = tuple(
                    s.strip() for s in args.prompt_strategies.split(",") if s.strip()
                )
            else:
                prompt_strategies = PROMPT_STRATEGIES
        else:
            prompt_strategies = (cfg.prompt_strategy,)
        report = harness.run_eval_stage(
            args.stage,
            args.run_dir,
            cfg,
            corpus_dir=args.corpus,
            providers=providers,
            chunk_method=args.chunk_method,
            rerank_arms=rerank_arms,
            prompt_strategies=prompt_strategies,
            provenance_extra={"seed": args.seed, "config_hash": config_hash(config)},
        )
    sys.stdout.write(harness.render_table(report))
    _emit_status(
        {
            "status": "ok",
            "command": f"eval {args.stage}",
            "run_dir": str(args.run_dir),
            "rows": len(report.rows),
            "partial": report.partial,
            "artifacts": {
                "report_json": str(Path(args.run_dir) / "report.json"),
                "report_txt": str(Path(args.run_dir) / "report.txt"),
            },
        }
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    report_path = Path(args.run_dir) / "report.json"
    if not report_path.exists():
        raise DataError(f"no report.json under {args.run_dir}")
    report = harness.EvalReport.from_dict(json.loads(report_path.read_text(encoding="utf-8")))
    sys.stdout.write(harness.emit_report(report, args.format).decode("utf-8"))
    return EXIT_OK


def _cmd_serve(args, config: AppConfig) -> int:
    from .service import serve

    providers = _build_providers(args, config)
    if args.host:
        config.service.host = args.host
    if args.port:
        config.service.port = args.port
    serve(config, providers, state_dir=args.state)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = load_config(getattr(args, "config", None)) if getattr(args, "config", None) else load_config()

    try:
        if args.command == "gen-corpus":
            return _cmd_gen_corpus(args)
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "chunk":
            return _cmd_chunk(args, config)
        if args.command == "index":
            return _cmd_index(args, config)
        if args.command == "retrieve":
            return _cmd_retrieve(args, config)
        if args.command == "answer":
            return _cmd_answer(args, config)
        if args.command == "eval":
            return _cmd_eval(args, config)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "serve":
            return _cmd_serve(args, config)
        parser.error(f"unknown command {args.command!r}")
    except ProviderError as exc:
        _emit_status({"status": "error", "kind": "provider", "error": str(exc)})
        return EXIT_PROVIDER
    except DataError as exc:
        _emit_status({"status": "error", "kind": "data", "error": str(exc)})
        return EXIT_DATA
    except FileNotFoundError as exc:
        _emit_status({"status": "error", "kind": "data", "error": str(exc)})
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
