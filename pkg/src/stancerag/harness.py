"""Evaluation protocols: per-stage scoring, threshold filtering, language-group
aggregation, strategy comparison, and the outperformance analysis.

Every stage writes line-delimited per-record artifacts into a run directory and
builds its report purely from those rows, so a report can always be reproduced
byte-identically from persisted artifacts with providers disabled.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .chunker import Chunk, ChunkerConfig, chunk_document
from .corpus import EvidenceRecord, KnowledgeBase, load_corpus_dir
from .errors import (
    EmbeddingUnavailable,
    LogprobsUnsupported,
    MalformedToolCall,
    MissingGold,
    NoHits,
    ProviderUnavailable,
    RerankUnavailable,
    ScoreOutOfRange,
    ScorerUnavailable,
)
from .index import VectorIndex
from .metrics import (
    conciseness,
    exact_match,
    faithfulness,
    helpfulness,
    hit_rate_tolerance,
    mrr,
    nlcs_chunk,
    nlcs_parse,
    recall_at_k,
    tokenize,
)
from .providers import ProviderSet
from .rerank import rerank
from .stance import (
    EvidenceSelection,
    PolicyQuery,
    build_prompt,
    generate_stance,
    score_completion,
    select_evidence,
)

LANGUAGE_GROUPS = ("All", "EN", "NonEN")

STAGES = ("parse", "chunk", "retrieve", "rerank", "stance", "pipeline", "outperform")


@dataclass
class EvalConfig:
    sigma_threshold: float = 0.5
    k: int = 5
    tolerance: int = 1
    selection_strategies: tuple[str, ...] = ("GT", "FR", "BM", "AR")
    prompt_strategy: str = "fs_few_query_few_stance"
    language_groups: tuple[str, ...] = LANGUAGE_GROUPS
    stance_retries: int = 2
    faithfulness_fallback: bool = True
    max_parallel: int = 4
    chunker: ChunkerConfig = field(default_factory=ChunkerConfig)

    def __post_init__(self):
        if not (0 < self.sigma_threshold < 1):
            raise ValueError("sigma_threshold must be in (0, 1)")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class EvalReport:
    stage: str
    rows: list[dict]
    provenance: dict
    partial: bool = False

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "partial": self.partial,
            "provenance": self.provenance,
            "rows": self.rows,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls(
            stage=data["stage"],
            rows=data["rows"],
            provenance=data["provenance"],
            partial=data["partial"],
        )


def emit_report(report: EvalReport, fmt: str = "structured", path: str | Path | None = None) -> bytes:
    """Serialize a report deterministically; the structured form round-trips losslessly."""
    if fmt == "structured":
        text = json.dumps(report.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    elif fmt == "table_text":
        text = render_table(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    data = text.encode("utf-8")
    if path is not None:
        Path(path).write_bytes(data)
    return data


def render_table(report: EvalReport) -> str:
    lines = [f"stage: {report.stage}" + ("  [PARTIAL]" if report.partial else "")]
    for key in sorted(report.provenance):
        lines.append(f"# {key}: {report.provenance[key]}")
    if not report.rows:
        lines.append("(no rows)")
        return "\n".join(lines) + "\n"
    columns: list[str] = []
    for row in report.rows:
        for key in row:
            if key not in columns:
                columns.append(key)

    def fmt_cell(value) -> str:
        if value is None:
            return "-"
        if isinstance(value, float):
            return f"{value:.4f}"
        return str(value)

    table = [[fmt_cell(row.get(c)) for c in columns] for row in report.rows]
    widths = [max(len(c), *(len(r[i]) for r in table)) for i, c in enumerate(columns)]
    lines.append("  ".join(c.ljust(w) for c, w in zip(columns, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for r in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def write_jsonl(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def _groups_for(language: str) -> tuple[str, str]:
    return ("All", "EN" if language == "en" else "NonEN")


def _in_group(language: str, group: str) -> bool:
    return group in _groups_for(language)


def _parallel_map(fn, items, max_workers: int):
    """Order-preserving parallel map; the reduce side stays deterministic."""
    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def _failure_name(exc: Exception) -> str:
    return type(exc).__name__


# --- parsing ---------------------------------------------------------------


def eval_parsing(records: list[EvidenceRecord], kb: KnowledgeBase) -> list[dict]:
    """Per record: gold-normalized nLCS of the full parsed text. Missing docs are skipped rows."""
    rows = []
    for rec in sorted(records, key=lambda r: r.record_id):
        doc = kb.get(rec.doc_id)
        base = {
            "record_id": rec.record_id,
            "doc_id": rec.doc_id,
            "query_id": rec.query_id,
            "language": rec.metadata.language,
        }
        if doc is None:
            rows.append({**base, "skipped": "missing_document"})
            continue
        p_nlcs = nlcs_parse(tokenize(doc.canonical_text), tokenize(rec.gold_evidence))
        rows.append({**base, "parser_style": doc.parser_style, "p_nlcs": p_nlcs})
    return rows


def chunk_inventory(kb: KnowledgeBase, chunks_by_method: dict[str, dict[str, list[Chunk]]]) -> list[dict]:
    rows = []
    for doc in kb.documents():
        for method in sorted(chunks_by_method):
            rows.append(
                {
                    "doc_id": doc.doc_id,
                    "language": doc.metadata.language,
                    "parser_style": doc.parser_style,
                    "method": method,
                    "n_chunks": len(chunks_by_method[method].get(doc.doc_id, [])),
                }
            )
    return rows


def parsing_report(
    parse_rows: list[dict],
    chunk_count_rows: list[dict] | None,
    provenance: dict,
    partial: bool = False,
) -> EvalReport:
    styles = sorted({r["parser_style"] for r in parse_rows if "parser_style" in r})
    out = []
    for style in styles:
        for group in LANGUAGE_GROUPS:
            scored = [
                r
                for r in parse_rows
                if r.get("parser_style") == style and _in_group(r["language"], group)
            ]
            skipped = [
                r
                for r in parse_rows
                if "skipped" in r and _in_group(r["language"], group)
            ]
            row = {
                "parser_style": style,
                "group": group,
                "mean_p_nlcs": _mean([r["p_nlcs"] for r in scored]),
                "n": len(scored),
                "skipped": len(skipped),
            }
            if chunk_count_rows:
                for method in ("layout", "semantic"):
                    counts = [
                        c["n_chunks"]
                        for c in chunk_count_rows
                        if c["parser_style"] == style
                        and c["method"] == method
                        and _in_group(c["language"], group)
                    ]
                    row[f"mean_chunks_{method}"] = _mean([float(c) for c in counts])
            out.append(row)
    return EvalReport(stage="parse", rows=out, provenance=provenance, partial=partial)


# --- chunking ----------------------------------------------------------------


def filter_by_sigma(records: list[EvidenceRecord], parse_rows: list[dict], sigma: float) -> list[EvidenceRecord]:
    """Keep records whose parsing score strictly exceeds the threshold."""
    passing = {r["record_id"] for r in parse_rows if r.get("p_nlcs", 0.0) > sigma}
    return [rec for rec in records if rec.record_id in passing]


def eval_chunking(
    records: list[EvidenceRecord],
    parse_rows: list[dict],
    chunks_by_method: dict[str, dict[str, list[Chunk]]],
    cfg: EvalConfig,
) -> list[dict]:
    """Best chunk-vs-gold nLCS per record, over records that cleared the parsing threshold."""
    kept = filter_by_sigma(records, parse_rows, cfg.sigma_threshold)
    rows = []
    for rec in sorted(kept, key=lambda r: r.record_id):
        gold_tokens = tokenize(rec.gold_evidence)
        for method in sorted(chunks_by_method):
            chunks = chunks_by_method[method].get(rec.doc_id, [])
            scores = [nlcs_chunk(tokenize(c.text), gold_tokens) for c in chunks if c.text]
            rows.append(
                {
                    "record_id": rec.record_id,
                    "language": rec.metadata.language,
                    "method": method,
                    "c_nlcs": max(scores) if scores else 0.0,
                    "n_chunks_doc": len(chunks),
                }
            )
    return rows


def chunking_report(rows: list[dict], provenance: dict, partial: bool = False) -> EvalReport:
    methods = sorted({r["method"] for r in rows})
    out = []
    for method in methods:
        for group in LANGUAGE_GROUPS:
            scored = [r for r in rows if r["method"] == method and _in_group(r["language"], group)]
            out.append(
                {
                    "method": method,
                    "group": group,
                    "mean_c_nlcs": _mean([r["c_nlcs"] for r in scored]),
                    "n": len(scored),
                }
            )
    return EvalReport(stage="chunk", rows=out, provenance=provenance, partial=partial)


# --- retrieval --------------------------------------------------------------


def eval_retrieval(
    records: list[EvidenceRecord],
    parse_rows: list[dict],
    indexes: dict[str, VectorIndex],
    cfg: EvalConfig,
) -> tuple[list[dict], bool]:
    """Document-scoped top-k retrieval per record; returns (rows, partial).

    An embedding outage aborts the stage; rows computed so far are kept and the
    report is flagged partial.
    """
    kept = filter_by_sigma(records, parse_rows, cfg.sigma_threshold)
    rows: list[dict] = []
    partial = False
    for rec in sorted(kept, key=lambda r: r.record_id):
        query = PolicyQuery.by_id(rec.query_id)
        gold_tokens = tokenize(rec.gold_evidence)
        try:
            for method in sorted(indexes):
                hits = indexes[method].search(query.text, cfg.k, doc_filter={rec.doc_id})
                texts = [h.chunk.text for h in hits]
                rows.append(
                    {
                        "record_id": rec.record_id,
                        "language": rec.metadata.language,
                        "method": method,
                        "query_id": rec.query_id,
                        "nlcs": max((nlcs_parse(tokenize(t), gold_tokens) for t in texts), default=0.0),
                        "recall": recall_at_k(texts, gold_tokens, cfg.sigma_threshold) if texts else 0,
                        "c_nlcs": max((nlcs_chunk(tokenize(t), gold_tokens) for t in texts), default=0.0),
                        "hits": [
                            {
                                "chunk_id": h.chunk.chunk_id,
                                "rank": h.rank,
                                "similarity": h.similarity,
                                "text": h.chunk.text,
                            }
                            for h in hits
                        ],
                    }
                )
        except EmbeddingUnavailable:
            partial = True
            break
    return rows, partial


def retrieval_report(rows: list[dict], provenance: dict, partial: bool = False) -> EvalReport:
    methods = sorted({r["method"] for r in rows})
    out = []
    for method in methods:
        for group in LANGUAGE_GROUPS:
            scored = [r for r in rows if r["method"] == method and _in_group(r["language"], group)]
            out.append(
                {
                    "method": method,
                    "group": group,
                    "mean_nlcs": _mean([r["nlcs"] for r in scored]),
                    "mean_recall": _mean([float(r["recall"]) for r in scored]),
                    "mean_c_nlcs": _mean([r["c_nlcs"] for r in scored]),
                    "n": len(scored),
                }
            )
    return EvalReport(stage="retrieve", rows=out, provenance=provenance, partial=partial)


# --- reranking ---------------------------------------------------------------


def eval_reranker(
    records: list[EvidenceRecord],
    parse_rows: list[dict],
    indexes: dict[str, VectorIndex],
    arms: dict,
    cfg: EvalConfig,
) -> tuple[list[dict], bool]:
    """MRR per (record, chunk method, rerank arm); the no-op arm is always included."""
    if "no_reranker" not in arms:
        arms = {"no_reranker": None, **arms}
    kept = filter_by_sigma(records, parse_rows, cfg.sigma_threshold)
    rows: list[dict] = []
    partial = False
    for rec in sorted(kept, key=lambda r: r.record_id):
        query = PolicyQuery.by_id(rec.query_id)
        gold_tokens = tokenize(rec.gold_evidence)
        try:
            for method in sorted(indexes):
                hits = indexes[method].search(query.text, cfg.k, doc_filter={rec.doc_id})
                for arm in sorted(arms):
                    reranked = rerank(query.text, hits, provider=arms[arm])
                    texts = [h.chunk.text for h in sorted(reranked, key=lambda h: h.new_rank)]
                    rows.append(
                        {
                            "record_id": rec.record_id,
                            "language": rec.metadata.language,
                            "method": method,
                            "arm": arm,
                            "mrr": mrr(texts, gold_tokens, cfg.sigma_threshold) if texts else 0.0,
                        }
                    )
        except (EmbeddingUnavailable, RerankUnavailable):
            partial = True
            break
    return rows, partial


def reranker_report(rows: list[dict], provenance: dict, partial: bool = False) -> EvalReport:
    out = []
    for arm in sorted({r["arm"] for r in rows}):
        for method in sorted({r["method"] for r in rows}):
            for group in LANGUAGE_GROUPS:
                scored = [
                    r
                    for r in rows
                    if r["arm"] == arm and r["method"] == method and _in_group(r["language"], group)
                ]
                out.append(
                    {
                        "arm": arm,
                        "method": method,
                        "group": group,
                        "mean_mrr": _mean([r["mrr"] for r in scored]),
                        "n": len(scored),
                    }
                )
    return EvalReport(stage="rerank", rows=out, provenance=provenance, partial=partial)


# --- stance over gold evidence ------------------------------------------------


def _stance_row_base(rec: EvidenceRecord, strategy: str, model: str) -> dict:
    return {
        "record_id": rec.record_id,
        "language": rec.metadata.language,
        "prompt_strategy": strategy,
        "model": model,
        "gold_stance": rec.stance,
    }


def eval_stance(
    records: list[EvidenceRecord],
    chat_provider,
    strategies: tuple[str, ...],
    cfg: EvalConfig,
) -> list[dict]:
    """Stance generation from gold evidence, per prompt strategy.

    Per-record provider failures become failure rows; they are excluded from
    means and surfaced as counts.
    """
    ordered = sorted(records, key=lambda r: r.record_id)

    def run_one(task):
        rec, strategy = task
        base = _stance_row_base(rec, strategy, chat_provider.model_id)
        query = PolicyQuery.by_id(rec.query_id)
        request = build_prompt(strategy, query, rec.gold_evidence)
        try:
            result = generate_stance(
                request,
                chat_provider,
                strategy=strategy,
                evidence=rec.gold_evidence,
                retries=cfg.stance_retries,
            )
        except (MalformedToolCall, ScoreOutOfRange, ProviderUnavailable) as exc:
            return {**base, "failure": _failure_name(exc)}
        return {
            **base,
            "predicted": result.score,
            "em": exact_match(rec.stance, result.score),
            "hrt": hit_rate_tolerance(rec.stance, result.score, cfg.tolerance),
        }

    tasks = [(rec, strategy) for strategy in strategies for rec in ordered]
    return _parallel_map(run_one, tasks, cfg.max_parallel)


def stance_report(rows: list[dict], provenance: dict, partial: bool = False) -> EvalReport:
    out = []
    for strategy in sorted({r["prompt_strategy"] for r in rows}):
        for group in LANGUAGE_GROUPS:
            in_group = [
                r for r in rows if r["prompt_strategy"] == strategy and _in_group(r["language"], group)
            ]
            scored = [r for r in in_group if "failure" not in r]
            models = sorted({r["model"] for r in in_group})
            out.append(
                {
                    "prompt_strategy": strategy,
                    "model": models[0] if len(models) == 1 else ",".join(models),
                    "group": group,
                    "em": _mean([float(r["em"]) for r in scored]),
                    "hrt": _mean([float(r["hrt"]) for r in scored]),
                    "n": len(scored),
                    "failures": len(in_group) - len(scored),
                }
            )
    return EvalReport(stage="stance", rows=out, provenance=provenance, partial=partial)


# --- full pipeline -------------------------------------------------------------


def eval_pipeline(
    records: list[EvidenceRecord],
    parse_rows: list[dict],
    index: VectorIndex,
    providers: ProviderSet,
    cfg: EvalConfig,
) -> tuple[list[dict], bool]:
    """Evidence selection + stance generation per strategy, with oracle diagnostics.

    GT bypasses retrieval entirely, so its rows are invariant to index and
    reranker configuration. Oracle scores are computed for non-GT strategies:
    absent values stay None (never zero).
    """
    kept = sorted(filter_by_sigma(records, parse_rows, cfg.sigma_threshold), key=lambda r: r.record_id)
    partial = False
    rows: list[dict] = []

    def run_record(rec: EvidenceRecord) -> list[dict]:
        query = PolicyQuery.by_id(rec.query_id)
        record_rows: list[dict] = []
        hits = index.search(query.text, cfg.k, doc_filter={rec.doc_id})
        try:
            reranked = rerank(query.text, hits, provider=providers.rerank)
        except RerankUnavailable as exc:
            for strategy in cfg.selection_strategies:
                base = _stance_row_base(rec, cfg.prompt_strategy, providers.chat.model_id)
                record_rows.append({**base, "selection": strategy, "failure": _failure_name(exc)})
            return record_rows

        p_gold = None
        gold_prob_failed = False
        try:
            p_gold = score_completion(query, rec.gold_evidence, rec.stance, providers.chat)
        except LogprobsUnsupported:
            gold_prob_failed = True

        for strategy in cfg.selection_strategies:
            base = _stance_row_base(rec, cfg.prompt_strategy, providers.chat.model_id)
            base["selection"] = strategy
            try:
                evidence = select_evidence(
                    EvidenceSelection(mode=strategy, k=cfg.k), reranked, gold=rec.gold_evidence
                )
            except (MissingGold, NoHits) as exc:
                record_rows.append({**base, "failure": _failure_name(exc)})
                continue
            request = build_prompt(cfg.prompt_strategy, query, evidence)
            try:
                result = generate_stance(
                    request,
                    providers.chat,
                    strategy=cfg.prompt_strategy,
                    evidence=evidence,
                    retries=cfg.stance_retries,
                )
            except (MalformedToolCall, ScoreOutOfRange, ProviderUnavailable) as exc:
                record_rows.append({**base, "failure": _failure_name(exc)})
                continue
            row = {
                **base,
                "predicted": result.score,
                "em": exact_match(rec.stance, result.score),
                "hrt": hit_rate_tolerance(rec.stance, result.score, cfg.tolerance),
                "s_f": None,
                "s_h": None,
                "s_c": None,
                "s_f_fallback": False,
            }
            if strategy != "GT":
                try:
                    row["s_f"] = faithfulness(
                        evidence,
                        rec.gold_evidence,
                        scorer=providers.alignment,
                        fallback_to_lexical=cfg.faithfulness_fallback,
                    )
                    row["s_f_fallback"] = providers.alignment is None and cfg.faithfulness_fallback
                except ScorerUnavailable:
                    row["s_f"] = None
                if not gold_prob_failed and p_gold is not None:
                    try:
                        p_e = score_completion(query, evidence, rec.stance, providers.chat)
                        row["s_h"] = helpfulness(p_gold, p_e)
                    except LogprobsUnsupported:
                        row["s_h"] = None
                try:
                    row["s_c"] = conciseness(evidence, rec.gold_evidence, providers.embedding)
                except EmbeddingUnavailable:
                    row["s_c"] = None
            record_rows.append(row)
        return record_rows

    try:
        for chunk_rows in _parallel_map(run_record, kept, cfg.max_parallel):
            rows.extend(chunk_rows)
    except EmbeddingUnavailable:
        partial = True
    return rows, partial


def pipeline_report(rows: list[dict], provenance: dict, partial: bool = False) -> EvalReport:
    out = []
    strategies = sorted({r["selection"] for r in rows})
    for strategy in strategies:
        for group in LANGUAGE_GROUPS:
            in_group = [
                r for r in rows if r["selection"] == strategy and _in_group(r["language"], group)
            ]
            scored = [r for r in in_group if "failure" not in r]
            row = {
                "selection": strategy,
                "prompt_strategy": scored[0]["prompt_strategy"] if scored else None,
                "model": scored[0]["model"] if scored else None,
                "group": group,
                "em": _mean([float(r["em"]) for r in scored]),
                "hrt": _mean([float(r["hrt"]) for r in scored]),
                "n": len(scored),
                "failures": len(in_group) - len(scored),
            }
            for key in ("s_f", "s_h", "s_c"):
                present = [r[key] for r in scored if r.get(key) is not None]
                row[key] = _mean(present)
                row[f"{key}_n"] = len(present)
            out.append(row)
    return EvalReport(stage="pipeline", rows=out, provenance=provenance, partial=partial)


# --- outperformance -------------------------------------------------------------


def outperformance_analysis(pipeline_rows: list[dict]) -> list[dict]:
    """Cases where the gold snippet failed but a retrieval strategy succeeded.

    Shares are normalized by the total number of (strategy, case) wins, so they
    sum to 1 even when several strategies win the same case.
    """
    by_record: dict[str, dict[str, dict]] = {}
    for row in pipeline_rows:
        if "failure" in row:
            continue
        by_record.setdefault(row["record_id"], {})[row["selection"]] = row

    strategies = sorted(
        {r["selection"] for r in pipeline_rows if r["selection"] != "GT" and "failure" not in r}
    )
    wins: dict[str, list[dict]] = {s: [] for s in strategies}
    outperforming_cases = 0
    for record_id in sorted(by_record):
        per_strategy = by_record[record_id]
        gt = per_strategy.get("GT")
        if gt is None or gt["em"] != 0:
            continue
        case_winners = [s for s in strategies if per_strategy.get(s, {}).get("em") == 1]
        if not case_winners:
            continue
        outperforming_cases += 1
        for s in case_winners:
            wins[s].append(per_strategy[s])

    total_wins = sum(len(v) for v in wins.values())
    rows = []
    for s in strategies:
        strategy_wins = wins[s]
        row = {
            "selection": s,
            "wins": len(strategy_wins),
            "share": (len(strategy_wins) / total_wins) if total_wins else None,
            "cases_total": outperforming_cases,
        }
        for key in ("s_f", "s_h", "s_c"):
            present = [r[key] for r in strategy_wins if r.get(key) is not None]
            row[key] = _mean(present)
            row[f"{key}_n"] = len(present)
        rows.append(row)
    return rows


def outperformance_report(rows: list[dict], provenance: dict, partial: bool = False) -> EvalReport:
    return EvalReport(stage="outperform", rows=rows, provenance=provenance, partial=partial)


# --- orchestration ----------------------------------------------------------------


@dataclass
class PreparedCorpus:
    kb: KnowledgeBase
    records: list[EvidenceRecord]
    chunks_by_method: dict[str, dict[str, list[Chunk]]]
    indexes: dict[str, VectorIndex]


def prepare_corpus(
    corpus_dir: str | Path,
    providers: ProviderSet,
    cfg: EvalConfig,
    methods: tuple[str, ...] = ("layout", "semantic"),
    build_indexes: bool = True,
) -> PreparedCorpus:
    """Ingest a corpus directory and build chunks (and optionally indexes) per method."""
    kb, records = load_corpus_dir(corpus_dir)
    chunks_by_method: dict[str, dict[str, list[Chunk]]] = {}
    for method in methods:
        per_doc = {}
        for doc in kb.documents():
            per_doc[doc.doc_id] = chunk_document(doc, method, cfg.chunker, embedder=providers.embedding)
        chunks_by_method[method] = per_doc
    indexes: dict[str, VectorIndex] = {}
    if build_indexes:
        for method in methods:
            index = VectorIndex(provider=providers.embedding)
            all_chunks = [c for doc_id in sorted(chunks_by_method[method]) for c in chunks_by_method[method][doc_id]]
            index.index_chunks(all_chunks)
            indexes[method] = index
    return PreparedCorpus(kb=kb, records=records, chunks_by_method=chunks_by_method, indexes=indexes)


def _records_path(run_dir: Path, stage: str) -> Path:
    return run_dir / f"{stage}_records.jsonl"


def run_eval_stage(
    stage: str,
    run_dir: str | Path,
    cfg: EvalConfig,
    corpus_dir: str | Path | None = None,
    providers: ProviderSet | None = None,
    chunk_method: str = "semantic",
    rerank_arms: dict | None = None,
    prompt_strategies: tuple[str, ...] | None = None,
    replay_from: str | Path | None = None,
    provenance_extra: dict | None = None,
) -> EvalReport:
    """Run one evaluation stage end to end, or replay it from persisted artifacts.

    Always writes ``<stage>_records.jsonl``, ``provenance.json``, ``report.json``
    and ``report.txt`` into the run directory.
    """
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    partial = False
    aux_rows: dict[str, list[dict]] = {}

    if replay_from is not None:
        replay_from = Path(replay_from)
        source_stage = "pipeline" if stage == "outperform" else stage
        rows = read_jsonl(_records_path(replay_from, source_stage))
        provenance = json.loads((replay_from / "provenance.json").read_text(encoding="utf-8"))
        if stage == "parse":
            counts_path = replay_from / "chunk_counts.jsonl"
            aux_rows["chunk_counts"] = read_jsonl(counts_path) if counts_path.exists() else []
        partial = bool(provenance.pop("_partial", False))
    else:
        if corpus_dir is None or providers is None:
            raise ValueError("fresh runs need corpus_dir and providers")
        prepared = prepare_corpus(
            corpus_dir,
            providers,
            cfg,
            methods=("layout", "semantic"),
            build_indexes=stage in ("retrieve", "rerank", "pipeline", "outperform"),
        )
        provenance = {
            "corpus": str(corpus_dir),
            "providers": providers.ids(),
            "k": cfg.k,
            "sigma_threshold": cfg.sigma_threshold,
            "tolerance": cfg.tolerance,
            "prompt_strategy": cfg.prompt_strategy,
            "token_proxy": "whitespace_words",
            "conciseness_formula": "(1+cos)/2, pinned locally",
        }
        if provenance_extra:
            provenance.update(provenance_extra)

        parse_rows = eval_parsing(prepared.records, prepared.kb)
        if stage == "parse":
            rows = parse_rows
            aux_rows["chunk_counts"] = chunk_inventory(prepared.kb, prepared.chunks_by_method)
        elif stage == "chunk":
            rows = eval_chunking(prepared.records, parse_rows, prepared.chunks_by_method, cfg)
        elif stage == "retrieve":
            rows, partial = eval_retrieval(prepared.records, parse_rows, prepared.indexes, cfg)
        elif stage == "rerank":
            arms = rerank_arms if rerank_arms is not None else {}
            rows, partial = eval_reranker(prepared.records, parse_rows, prepared.indexes, arms, cfg)
        elif stage == "stance":
            strategies = prompt_strategies or (cfg.prompt_strategy,)
            rows = eval_stance(prepared.records, providers.chat, strategies, cfg)
        elif stage in ("pipeline", "outperform"):
            index = prepared.indexes[chunk_method]
            provenance["chunk_method"] = chunk_method
            rows, partial = eval_pipeline(prepared.records, parse_rows, index, providers, cfg)
        else:  # pragma: no cover
            raise AssertionError(stage)

    source_stage = "pipeline" if stage == "outperform" else stage
    write_jsonl(_records_path(run_dir, source_stage), rows)
    for name, extra in aux_rows.items():
        write_jsonl(run_dir / f"{name}.jsonl", extra)
    (run_dir / "provenance.json").write_text(
        json.dumps({**provenance, "_partial": partial}, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )

    if stage == "parse":
        report = parsing_report(rows, aux_rows.get("chunk_counts"), provenance, partial)
    elif stage == "chunk":
        report = chunking_report(rows, provenance, partial)
    elif stage == "retrieve":
        report = retrieval_report(rows, provenance, partial)
    elif stage == "rerank":
        report = reranker_report(rows, provenance, partial)
    elif stage == "stance":
        report = stance_report(rows, provenance, partial)
    elif stage == "pipeline":
        report = pipeline_report(rows, provenance, partial)
    else:
        report = outperformance_report(outperformance_analysis(rows), provenance, partial)

    emit_report(report, "structured", run_dir / "report.json")
    emit_report(report, "table_text", run_dir / "report.txt")
    return report
