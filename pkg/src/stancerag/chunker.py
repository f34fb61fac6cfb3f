"""Document chunking: layout heuristics and embedding-similarity grouping."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import ParsedDocument

CHUNK_METHODS = ("layout", "semantic")

# Guard list for the sentence splitter; periods after these never end a sentence.
_ABBREVIATIONS = {
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.",
    "e.g.", "i.e.", "etc.", "vs.", "cf.", "al.", "ca.",
    "inc.", "ltd.", "corp.", "co.", "no.", "vol.", "fig.", "pp.", "approx.",
}

_TERMINATORS = ".!?"
_FULLWIDTH_TERMINATORS = "。！？"  # 。 ！ ？


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    block_span: tuple[int, int]
    index: int
    method: str

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "method": self.method,
            "index": self.index,
            "block_span": list(self.block_span),
            "text": self.text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Chunk":
        return cls(
            chunk_id=data["chunk_id"],
            doc_id=data["doc_id"],
            text=data["text"],
            block_span=tuple(data["block_span"]),
            index=data["index"],
            method=data["method"],
        )


@dataclass(frozen=True)
class ChunkerConfig:
    min_chunk_words: int = 30
    semantic_similarity_threshold: float = 0.75
    semantic_double_pass: bool = True
    max_chunk_tokens: int = 1536
    embed_batch_size: int = 64

    def __post_init__(self):
        if not (0 < self.semantic_similarity_threshold < 1):
            raise ValueError("semantic_similarity_threshold must be in (0, 1)")
        if self.min_chunk_words < 1:
            raise ValueError("min_chunk_words must be >= 1")
        if self.max_chunk_tokens < self.min_chunk_words:
            raise ValueError("max_chunk_tokens must be >= min_chunk_words")


def count_tokens(text: str) -> int:
    """Whitespace word count, the token proxy for every budget in this package.

    Model-tokenizer counts are not reproducible without the model; runs record
    that the proxy was used.
    """
    return len(text.split())


def _is_cjk(ch: str) -> bool:
    code = ord(ch)
    return (
        0x3040 <= code <= 0x30FF  # hiragana, katakana
        or 0x3400 <= code <= 0x9FFF  # CJK ideographs
        or 0xF900 <= code <= 0xFAFF
        or 0xFF66 <= code <= 0xFF9D
    )


def _ends_with_abbreviation(text: str) -> bool:
    tail = text.rstrip().rsplit(" ", 1)[-1].lower()
    return tail in _ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    """Split normalized text into sentences.

    A boundary is a run of ``. ! ?`` followed by whitespace and an uppercase or
    CJK character, unless the preceding word is a known abbreviation. Fullwidth
    terminators bound a sentence whenever the next character starts one.
    """
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in _TERMINATORS or ch in _FULLWIDTH_TERMINATORS:
            j = i
            while j + 1 < n and (text[j + 1] in _TERMINATORS or text[j + 1] in _FULLWIDTH_TERMINATORS):
                j += 1
            k = j + 1
            saw_space = False
            while k < n and text[k].isspace():
                saw_space = True
                k += 1
            fullwidth = any(text[p] in _FULLWIDTH_TERMINATORS for p in range(i, j + 1))
            boundary = False
            if k >= n:
                boundary = True
            elif (saw_space or fullwidth) and (text[k].isupper() or _is_cjk(text[k])):
                boundary = not _ends_with_abbreviation(text[start : j + 1])
            if boundary:
                segment = text[start : j + 1].strip()
                if segment:
                    sentences.append(segment)
                start = k
                i = k
                continue
            i = j + 1
            continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


class _Group:
    __slots__ = ("texts", "span", "words", "header_start", "table")

    def __init__(self, texts, span, words, header_start=False, table=False):
        self.texts = texts
        self.span = span
        self.words = words
        self.header_start = header_start
        self.table = table

    def extend(self, texts, span_end, words):
        self.texts.extend(texts)
        self.span = (self.span[0], span_end)
        self.words += words


def _merge_consecutive_headers(blocks):
    """Concatenate runs of header blocks into single headers, keeping span info."""
    merged = []
    for blk in blocks:
        item = {"kind": blk.kind, "text": blk.text, "span": (blk.ordinal, blk.ordinal)}
        if blk.kind == "header" and merged and merged[-1]["kind"] == "header":
            prev = merged[-1]
            prev["text"] = f"{prev['text']} {blk.text}"
            prev["span"] = (prev["span"][0], blk.ordinal)
        else:
            merged.append(item)
    return merged


def _finish(groups: list[_Group], doc_id: str, method: str) -> list[Chunk]:
    chunks = []
    for i, g in enumerate(groups):
        chunks.append(
            Chunk(
                chunk_id=f"{doc_id}:{method}:{i:04d}",
                doc_id=doc_id,
                text=" ".join(g.texts),
                block_span=g.span,
                index=i,
                method=method,
            )
        )
    return chunks


def layout_chunk(doc: ParsedDocument, cfg: ChunkerConfig | None = None) -> list[Chunk]:
    """Heuristic chunking over layout blocks.

    Rules, applied in order: consecutive headers concatenate; a header merges
    into the block that follows it; tables are atomic (never merged with
    paragraphs); paragraphs below the word minimum fold into the previous
    chunk; paragraphs ending with a colon fold into the previous chunk unless
    that chunk starts with a header. A chunk also keeps growing until it
    reaches the word minimum. The final chunk may end up short.
    """
    cfg = cfg or ChunkerConfig()
    blocks = _merge_consecutive_headers(doc.blocks)
    groups: list[_Group] = []
    pending_header = None

    for blk in blocks:
        if blk["kind"] == "header":
            pending_header = blk
            continue
        texts = []
        span_start = blk["span"][0]
        header_start = False
        words = count_tokens(blk["text"])
        if pending_header is not None:
            texts.append(pending_header["text"])
            span_start = pending_header["span"][0]
            header_start = True
            words += count_tokens(pending_header["text"])
            pending_header = None
        texts.append(blk["text"])
        span = (span_start, blk["span"][1])

        if blk["kind"] == "table":
            groups.append(_Group(texts, span, words, header_start=header_start, table=True))
            continue

        if header_start or not groups:
            groups.append(_Group(texts, span, words, header_start=header_start))
            continue

        prev = groups[-1]
        block_words = count_tokens(blk["text"])
        if prev.table:
            groups.append(_Group(texts, span, words))
        elif block_words < cfg.min_chunk_words:
            prev.extend(texts, span[1], words)
        elif blk["text"].endswith(":") and not prev.header_start:
            prev.extend(texts, span[1], words)
        elif prev.words < cfg.min_chunk_words:
            prev.extend(texts, span[1], words)
        else:
            groups.append(_Group(texts, span, words))

    if pending_header is not None:
        groups.append(
            _Group(
                [pending_header["text"]],
                pending_header["span"],
                count_tokens(pending_header["text"]),
                header_start=True,
            )
        )

    return _finish(groups, doc.doc_id, "layout")


def _dot(a, b) -> float:
    return float(sum(x * y for x, y in zip(a, b)))


def _normalize(vec):
    norm = sum(x * x for x in vec) ** 0.5
    if norm == 0:
        return list(vec)
    return [x / norm for x in vec]


def _centroid(vectors):
    dim = len(vectors[0])
    mean = [0.0] * dim
    for v in vectors:
        for i, x in enumerate(v):
            mean[i] += x
    mean = [x / len(vectors) for x in mean]
    return _normalize(mean)


def semantic_chunk(doc: ParsedDocument, cfg: ChunkerConfig, embedder) -> list[Chunk]:
    """Group consecutive sentences whose adjacent embedding similarity clears the threshold.

    Sentences are the atomic unit: every sentence lands in exactly one chunk,
    in order. An optional second pass merges adjacent groups whose re-normalized
    centroid similarity clears the same threshold. Both passes respect the
    token cap; a lone sentence above the cap keeps its own (oversized) chunk
    rather than being split.
    """
    sentences: list[tuple[int, str]] = []
    for blk in doc.blocks:
        for sent in split_sentences(blk.text):
            sentences.append((blk.ordinal, sent))
    if not sentences:
        return []

    texts = [s for _, s in sentences]
    vectors: list[list[float]] = []
    for i in range(0, len(texts), cfg.embed_batch_size):
        batch = texts[i : i + cfg.embed_batch_size]
        vectors.extend(_normalize(v) for v in embedder.embed(batch))

    token_counts = [count_tokens(s) for s in texts]

    # pass 1: chain adjacent-sentence similarity under the token cap
    groups: list[list[int]] = [[0]]
    group_tokens = token_counts[0]
    for i in range(1, len(sentences)):
        sim = _dot(vectors[i - 1], vectors[i])
        if sim >= cfg.semantic_similarity_threshold and group_tokens + token_counts[i] <= cfg.max_chunk_tokens:
            groups[-1].append(i)
            group_tokens += token_counts[i]
        else:
            groups.append([i])
            group_tokens = token_counts[i]

    # pass 2: merge adjacent groups by centroid similarity
    if cfg.semantic_double_pass and len(groups) > 1:
        merged: list[list[int]] = [groups[0]]
        centroid = _centroid([vectors[i] for i in groups[0]])
        tokens = sum(token_counts[i] for i in groups[0])
        for grp in groups[1:]:
            grp_centroid = _centroid([vectors[i] for i in grp])
            grp_tokens = sum(token_counts[i] for i in grp)
            if (
                _dot(centroid, grp_centroid) >= cfg.semantic_similarity_threshold
                and tokens + grp_tokens <= cfg.max_chunk_tokens
            ):
                merged[-1].extend(grp)
                tokens += grp_tokens
                centroid = _centroid([vectors[i] for i in merged[-1]])
            else:
                merged.append(grp)
                centroid = grp_centroid
                tokens = grp_tokens
        groups = merged

    built: list[_Group] = []
    for grp in groups:
        text_parts = [sentences[i][1] for i in grp]
        span = (sentences[grp[0]][0], sentences[grp[-1]][0])
        built.append(_Group(text_parts, span, sum(token_counts[i] for i in grp)))
    return _finish(built, doc.doc_id, "semantic")


def chunk_document(doc: ParsedDocument, method: str, cfg: ChunkerConfig, embedder=None) -> list[Chunk]:
    if method == "layout":
        return layout_chunk(doc, cfg)
    if method == "semantic":
        if embedder is None:
            raise ValueError("semantic chunking requires an embedding provider")
        return semantic_chunk(doc, cfg, embedder)
    raise ValueError(f"unknown chunk method {method!r}")


def dump_chunks(chunks: list[Chunk], path: str | Path) -> None:
    """Line-delimited chunk dump for harness replay."""
    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps(chunk.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


def load_chunks(path: str | Path) -> list[Chunk]:
    chunks = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                chunks.append(Chunk.from_dict(json.loads(line)))
    return chunks
