"""Parser-output ingestion, text normalization, dataset loading, and the knowledge base.

Real PDF parsing happens upstream. This module accepts the two output styles
those parsers produce: layout-marked Markdown (headers, paragraphs, pipe
tables) and plain line text (paragraphs only).
"""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DocumentConflict, EmptyDocument, SchemaViolation

STANCE_SET = (-2, -1, 0, 1, 2)
QUERY_IDS = tuple(range(1, 14))
PARSER_STYLES = ("layout_markdown", "plain_lines")
BLOCK_KINDS = ("header", "paragraph", "table", "other")

DATASET_FIELDS = (
    "doc_id",
    "query_id",
    "evidence",
    "stance",
    "comment",
    "company",
    "language",
    "region",
    "date",
)

# Upstream parser settings, kept as provenance metadata only. They describe how
# the source documents were produced, not anything this package executes.
PARSER_PROFILES = {
    "layout_markdown": {
        "ocr": {"engine": "easyocr", "full_page": True, "min_confidence": 0.5},
        "tables": {"cell_matching": False, "structure_mode": "accurate"},
    },
    "plain_lines": {"settings": "defaults"},
}

_HEADER_RE = re.compile(r"^(#{1,6})\s+(.*)$")


def normalize_text(raw: str) -> str:
    """Unicode NFC, whitespace runs collapsed to single spaces, ends trimmed.

    Case is preserved. Idempotent, so both sides of any overlap comparison can
    be normalized without drift.
    """
    return " ".join(unicodedata.normalize("NFC", raw).split())


@dataclass(frozen=True)
class DocumentMetadata:
    company: str
    language: str
    region: str
    date: str
    source_name: str = ""

    def __post_init__(self):
        if not (len(self.language) == 2 and self.language.isascii() and self.language.isalpha()):
            raise ValueError(f"language must be a two-letter code, got {self.language!r}")
        object.__setattr__(self, "language", self.language.lower())

    @property
    def language_group(self) -> str:
        return "EN" if self.language == "en" else "NonEN"

    def to_dict(self) -> dict:
        return {
            "company": self.company,
            "language": self.language,
            "region": self.region,
            "date": self.date,
            "source_name": self.source_name,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DocumentMetadata":
        return cls(
            company=data["company"],
            language=data["language"],
            region=data["region"],
            date=data["date"],
            source_name=data.get("source_name", ""),
        )


@dataclass(frozen=True)
class Block:
    kind: str
    text: str
    ordinal: int

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if not self.text:
            raise ValueError("block text must be non-empty after normalization")


@dataclass(frozen=True)
class ParsedDocument:
    doc_id: str
    blocks: tuple[Block, ...]
    metadata: DocumentMetadata
    parser_style: str

    def __post_init__(self):
        if self.parser_style not in PARSER_STYLES:
            raise ValueError(f"unknown parser style {self.parser_style!r}")
        ordinals = [b.ordinal for b in self.blocks]
        if ordinals != sorted(set(ordinals)):
            raise ValueError("block ordinals must be strictly increasing")
        if self.parser_style == "plain_lines":
            bad = [b.kind for b in self.blocks if b.kind != "paragraph"]
            if bad:
                raise ValueError("plain_lines documents may contain only paragraph blocks")

    @property
    def canonical_text(self) -> str:
        """Block texts joined with single spaces; the reference text for parsing evaluation."""
        return " ".join(b.text for b in self.blocks)

    @property
    def content_hash(self) -> str:
        payload = json.dumps(
            {
                "parser_style": self.parser_style,
                "blocks": [[b.kind, b.text] for b in self.blocks],
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "parser_style": self.parser_style,
            "metadata": self.metadata.to_dict(),
            "blocks": [{"kind": b.kind, "text": b.text, "ordinal": b.ordinal} for b in self.blocks],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParsedDocument":
        return cls(
            doc_id=data["doc_id"],
            blocks=tuple(
                Block(kind=b["kind"], text=b["text"], ordinal=b["ordinal"]) for b in data["blocks"]
            ),
            metadata=DocumentMetadata.from_dict(data["metadata"]),
            parser_style=data["parser_style"],
        )


@dataclass(frozen=True)
class EvidenceRecord:
    doc_id: str
    query_id: int
    gold_evidence: str
    stance: int
    comment: str
    metadata: DocumentMetadata

    def __post_init__(self):
        if self.stance not in STANCE_SET:
            raise ValueError(f"stance {self.stance} outside {STANCE_SET}")
        if self.query_id not in QUERY_IDS:
            raise ValueError(f"query_id {self.query_id} outside 1..13")

    @property
    def record_id(self) -> str:
        return f"{self.doc_id}:q{self.query_id:02d}"

    @property
    def language_group(self) -> str:
        return self.metadata.language_group


def _make_blocks(parts: list[tuple[str, str]]) -> tuple[Block, ...]:
    blocks = []
    for ordinal, (kind, text) in enumerate(parts):
        blocks.append(Block(kind=kind, text=text, ordinal=ordinal))
    return tuple(blocks)


def ingest_layout_markdown(raw: str, metadata: DocumentMetadata, doc_id: str) -> ParsedDocument:
    """Classify layout-marked Markdown into header / table / paragraph blocks.

    Cues: lines opening with 1-6 ``#`` become headers (markers stripped),
    consecutive pipe-prefixed lines become one table block, and blank-line
    separated runs of anything else become paragraphs.
    """
    parts: list[tuple[str, str]] = []
    para_lines: list[str] = []
    table_lines: list[str] = []

    def flush_para():
        if para_lines:
            text = normalize_text(" ".join(para_lines))
            if text:
                parts.append(("paragraph", text))
            para_lines.clear()

    def flush_table():
        if table_lines:
            text = normalize_text(" ".join(table_lines))
            if text:
                parts.append(("table", text))
            table_lines.clear()

    for line in raw.splitlines():
        stripped = line.strip()
        if not stripped:
            flush_para()
            flush_table()
            continue
        header = _HEADER_RE.match(stripped)
        if header:
            flush_para()
            flush_table()
            text = normalize_text(header.group(2))
            if text:
                parts.append(("header", text))
            continue
        if stripped.startswith("|"):
            flush_para()
            table_lines.append(stripped)
            continue
        flush_table()
        para_lines.append(stripped)
    flush_para()
    flush_table()

    if not parts:
        raise EmptyDocument(f"document {doc_id!r} is empty after normalization")
    return ParsedDocument(
        doc_id=doc_id, blocks=_make_blocks(parts), metadata=metadata, parser_style="layout_markdown"
    )


def ingest_plain_lines(raw: str, metadata: DocumentMetadata, doc_id: str) -> ParsedDocument:
    """Turn plain line text into paragraph blocks split on blank lines."""
    parts: list[tuple[str, str]] = []
    run: list[str] = []

    def flush():
        if run:
            text = normalize_text(" ".join(run))
            if text:
                parts.append(("paragraph", text))
            run.clear()

    for line in raw.splitlines():
        if line.strip():
            run.append(line.strip())
        else:
            flush()
    flush()

    if not parts:
        raise EmptyDocument(f"document {doc_id!r} is empty after normalization")
    return ParsedDocument(
        doc_id=doc_id, blocks=_make_blocks(parts), metadata=metadata, parser_style="plain_lines"
    )


def ingest(raw: str, metadata: DocumentMetadata, doc_id: str, parser_style: str) -> ParsedDocument:
    if parser_style == "layout_markdown":
        return ingest_layout_markdown(raw, metadata, doc_id)
    if parser_style == "plain_lines":
        return ingest_plain_lines(raw, metadata, doc_id)
    raise ValueError(f"unknown parser style {parser_style!r}")


def _validate_dataset_row(row: dict, line_no: int, violations: list) -> EvidenceRecord | None:
    missing = [f for f in DATASET_FIELDS if f not in row]
    if missing:
        for f in missing:
            violations.append((line_no, f, "missing field"))
        return None
    problems = []
    if not isinstance(row["query_id"], int) or row["query_id"] not in QUERY_IDS:
        problems.append(("query_id", f"must be an integer in 1..13, got {row['query_id']!r}"))
    if not isinstance(row["stance"], int) or isinstance(row["stance"], bool) or row["stance"] not in STANCE_SET:
        problems.append(("stance", f"must be an integer in {list(STANCE_SET)}, got {row['stance']!r}"))
    if not isinstance(row["evidence"], str) or not normalize_text(row["evidence"]):
        problems.append(("evidence", "must be a non-empty string"))
    if not isinstance(row["doc_id"], str) or not row["doc_id"]:
        problems.append(("doc_id", "must be a non-empty string"))
    language = row.get("language")
    if not (isinstance(language, str) and len(language) == 2 and language.isalpha()):
        problems.append(("language", f"must be a two-letter code, got {language!r}"))
    if problems:
        for f, msg in problems:
            violations.append((line_no, f, msg))
        return None
    return EvidenceRecord(
        doc_id=row["doc_id"],
        query_id=row["query_id"],
        gold_evidence=row["evidence"],
        stance=row["stance"],
        comment=str(row.get("comment", "")),
        metadata=DocumentMetadata(
            company=str(row.get("company", "")),
            language=language,
            region=str(row.get("region", "")),
            date=str(row.get("date", "")),
            source_name="dataset",
        ),
    )


def load_dataset(path: str | Path) -> list[EvidenceRecord]:
    """Read line-delimited evidence records, validating every line.

    Raises SchemaViolation listing each offending line and field.
    """
    records: list[EvidenceRecord] = []
    violations: list = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                violations.append((line_no, "<line>", f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(row, dict):
                violations.append((line_no, "<line>", "record must be an object"))
                continue
            record = _validate_dataset_row(row, line_no, violations)
            if record is not None:
                records.append(record)
    if violations:
        raise SchemaViolation(violations)
    return records


def save_dataset(records: list[EvidenceRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            row = {
                "doc_id": rec.doc_id,
                "query_id": rec.query_id,
                "evidence": rec.gold_evidence,
                "stance": rec.stance,
                "comment": rec.comment,
                "company": rec.metadata.company,
                "language": rec.metadata.language,
                "region": rec.metadata.region,
                "date": rec.metadata.date,
            }
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


class KnowledgeBase:
    """Immutable-once-ingested document store with concurrent readers.

    Single writer per document; re-adding identical content is a no-op,
    conflicting content raises DocumentConflict.
    """

    def __init__(self):
        self._docs: dict[str, ParsedDocument] = {}
        self._hashes: dict[str, str] = {}

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def add_document(self, doc: ParsedDocument) -> bool:
        """Store a document. Returns True if newly added, False if identical content existed."""
        existing = self._hashes.get(doc.doc_id)
        new_hash = doc.content_hash
        if existing is not None:
            if existing == new_hash:
                return False
            raise DocumentConflict(f"doc_id {doc.doc_id!r} already ingested with different content")
        self._docs[doc.doc_id] = doc
        self._hashes[doc.doc_id] = new_hash
        return True

    def get(self, doc_id: str) -> ParsedDocument | None:
        return self._docs.get(doc_id)

    def doc_ids(self) -> list[str]:
        return sorted(self._docs)

    def documents(self) -> list[ParsedDocument]:
        return [self._docs[d] for d in self.doc_ids()]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for doc in self.documents():
                fh.write(json.dumps(doc.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeBase":
        kb = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    kb.add_document(ParsedDocument.from_dict(json.loads(line)))
        return kb


def load_corpus_dir(corpus_dir: str | Path) -> tuple[KnowledgeBase, list[EvidenceRecord]]:
    """Load a corpus directory: manifest.jsonl + docs/ + dataset.jsonl."""
    corpus_dir = Path(corpus_dir)
    kb = KnowledgeBase()
    manifest = corpus_dir / "manifest.jsonl"
    with open(manifest, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            entry = json.loads(line)
            raw = (corpus_dir / entry["path"]).read_text(encoding="utf-8")
            metadata = DocumentMetadata(
                company=entry["company"],
                language=entry["language"],
                region=entry["region"],
                date=entry["date"],
                source_name=entry.get("source_name", ""),
            )
            kb.add_document(ingest(raw, metadata, entry["doc_id"], entry["parser_style"]))
    records = load_dataset(corpus_dir / "dataset.jsonl")
    return kb, records
