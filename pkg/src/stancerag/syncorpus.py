"""Seeded synthetic corpus generator with planted gold evidence.

The real assessment data is proprietary, so desk-scale runs and the acceptance
suite operate on this corpus instead: multilingual documents in both parser
output styles, one gold record per document, gold planted verbatim at a known
block position.

Two properties are engineered in:

* each gold snippet is a single long sentence that starts with its query's
  text and carries a ``stance marker <score>`` cue, so hash-stub retrieval
  ranks the gold chunk first and scripted chat stubs can react to evidence
  content without out-of-band hints;
* filler vocabulary is disjoint from query vocabulary (asserted at build
  time), so no filler chunk competes on query tokens.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from .corpus import DATASET_FIELDS, normalize_text
from .stance import QUERIES

LANGUAGES = ("en", "de", "fr", "ja")

_REGIONS = {"en": "North America", "de": "Europe", "fr": "Europe", "ja": "Asia"}
_COMPANY_SUFFIX = {"en": "Holdings", "de": "AG", "fr": "SA", "ja": "KK"}

# Content-word pools, one per language. None of these words (lowercased) may
# appear in any canonical query; build() asserts that.
_FILLER = {
    "en": [
        "quarterly", "revenue", "warehouse", "logistics", "throughput", "turbine",
        "modular", "furnace", "inventory", "depot", "freight", "ledger", "payroll",
        "vendor", "firmware", "cafeteria", "shuttle", "orchard", "granite", "lumber",
        "pigment", "ceramic", "textile", "brewery", "harbor", "dockyard", "crane",
        "silo", "gearbox", "boiler", "conveyor", "pallet", "kiln", "smelter",
    ],
    "de": [
        "lagerhaus", "quartal", "umsatz", "durchsatz", "fracht", "werkhalle",
        "giesserei", "schmiede", "ziegelei", "brauerei", "hafenkran", "speicher",
        "belegschaft", "werkzeug", "getriebe", "kessel", "schmelzofen", "förderband",
        "palette", "brennofen", "kantine", "fuhrpark", "obstgarten", "granit",
        "bauholz", "farbstoff", "keramik", "textilwerk", "docks", "silo",
    ],
    "fr": [
        "entrepôt", "trimestre", "chiffre", "débit", "fret", "chantier", "fonderie",
        "forge", "briqueterie", "brasserie", "grue", "silo", "effectif", "outillage",
        "engrenage", "chaudière", "convoyeur", "palette", "four", "cantine",
        "flotte", "verger", "granit", "charpente", "teinture", "céramique",
        "filature", "quai", "darse", "treuil",
    ],
    "ja": [
        "倉庫", "四半期", "売上", "物流", "貨物", "工場", "鋳造", "鍛冶", "醸造",
        "港湾", "起重機", "貯蔵庫", "従業員", "工具", "歯車", "ボイラー", "搬送機",
        "パレット", "窯", "食堂", "車両", "果樹園", "花崗岩", "木材", "顔料",
        "陶器", "紡績", "埠頭", "船渠", "巻上機",
    ],
}

_STANCE_CYCLE = (-2, -1, 0, 1, 2)


def _query_vocabulary() -> set[str]:
    vocab = set()
    for text in QUERIES.values():
        for token in normalize_text(text).lower().split():
            vocab.add(token.strip(".,:;?/()"))
    return vocab


def _assert_disjoint_pools() -> None:
    vocab = _query_vocabulary()
    for lang, pool in _FILLER.items():
        clash = {w for w in pool if w.lower() in vocab}
        if clash:
            raise AssertionError(f"filler pool for {lang} collides with query vocabulary: {clash}")


def _sentence(rng: random.Random, pool: list[str], words: int) -> str:
    chosen = [rng.choice(pool) for _ in range(words)]
    text = " ".join(chosen)
    return text[0].upper() + text[1:] + "."


def _paragraph(rng: random.Random, pool: list[str], sentences: int, words_each: tuple[int, int]) -> str:
    return " ".join(_sentence(rng, pool, rng.randint(*words_each)) for _ in range(sentences))


def _gold_sentence(rng: random.Random, pool: list[str], query_id: int, stance: int) -> str:
    """One long sentence: query text (terminal ? dropped), stance cue, filler padding."""
    base = QUERIES[query_id].rstrip("?").rstrip(".").strip()
    padding = [rng.choice(pool) for _ in range(14)]
    words = f"{base} stance marker {stance} " + " ".join(padding)
    tokens = words.split()
    while len(tokens) < 34:
        tokens.append(rng.choice(pool))
    return " ".join(tokens) + "."


def _table_lines(rng: random.Random, pool: list[str]) -> list[str]:
    rows = [
        "| metric | value |",
        "| --- | --- |",
    ]
    for _ in range(rng.randint(2, 4)):
        rows.append(f"| {rng.choice(pool)} | {rng.randint(10, 999)} |")
    return rows


def _layout_document(rng: random.Random, pool: list[str], gold: str) -> tuple[str, int]:
    """Markdown document text plus the block ordinal where gold was planted."""
    lines: list[str] = []
    ordinal = 0
    gold_ordinal = -1

    lines.append(f"# {_sentence(rng, pool, 4).rstrip('.')}")
    ordinal += 1

    n_sections = rng.randint(2, 3)
    gold_section = rng.randrange(n_sections)
    for section in range(n_sections):
        lines.append("")
        lines.append(f"## {_sentence(rng, pool, 3).rstrip('.')}")
        ordinal += 1
        n_paras = rng.randint(2, 3)
        gold_para = rng.randrange(n_paras)
        for para in range(n_paras):
            lines.append("")
            if section == gold_section and para == gold_para:
                lines.append(gold)
                gold_ordinal = ordinal
            else:
                lines.append(_paragraph(rng, pool, rng.randint(3, 5), (10, 16)))
            ordinal += 1
        if rng.random() < 0.6:
            lines.append("")
            lines.extend(_table_lines(rng, pool))
            ordinal += 1
            # a table may not end the section with a short trailing paragraph
            lines.append("")
            lines.append(_paragraph(rng, pool, 3, (11, 15)))
            ordinal += 1
    return "\n".join(lines) + "\n", gold_ordinal


def _plain_document(rng: random.Random, pool: list[str], gold: str) -> tuple[str, int]:
    paras: list[str] = []
    n_paras = rng.randint(6, 9)
    gold_at = rng.randrange(1, n_paras)
    for i in range(n_paras):
        if i == gold_at:
            paras.append(gold)
        else:
            paras.append(_paragraph(rng, pool, rng.randint(3, 5), (10, 16)))
    return "\n\n".join(paras) + "\n", gold_at


def generate_corpus(
    out_dir: str | Path,
    seed: int = 7,
    docs_per_language: int = 20,
    languages: tuple[str, ...] = LANGUAGES,
) -> dict:
    """Write a corpus directory: manifest.jsonl, dataset.jsonl, docs/.

    Identical seeds produce byte-identical output trees.
    """
    _assert_disjoint_pools()
    out_dir = Path(out_dir)
    docs_dir = out_dir / "docs"
    docs_dir.mkdir(parents=True, exist_ok=True)

    rng = random.Random(seed)
    manifest_rows = []
    dataset_rows = []
    counter = 0

    for language in languages:
        pool = _FILLER[language]
        for i in range(docs_per_language):
            doc_id = f"doc-{language}-{i:03d}"
            query_id = (counter % 13) + 1
            stance = _STANCE_CYCLE[counter % 5]
            gold = _gold_sentence(rng, pool, query_id, stance)
            parser_style = "layout_markdown" if counter % 2 == 0 else "plain_lines"

            if parser_style == "layout_markdown":
                text, gold_block = _layout_document(rng, pool, gold)
                path = f"docs/{doc_id}.md"
            else:
                text, gold_block = _plain_document(rng, pool, gold)
                path = f"docs/{doc_id}.txt"
            (out_dir / path).write_text(text, encoding="utf-8")

            company = f"{rng.choice(pool).title()} {_COMPANY_SUFFIX[language]}"
            date = f"202{counter % 5}-{(counter % 12) + 1:02d}-{(counter % 27) + 1:02d}"
            manifest_rows.append(
                {
                    "doc_id": doc_id,
                    "parser_style": parser_style,
                    "path": path,
                    "company": company,
                    "language": language,
                    "region": _REGIONS[language],
                    "date": date,
                    "source_name": "synthetic",
                }
            )
            dataset_rows.append(
                {
                    "doc_id": doc_id,
                    "query_id": query_id,
                    "evidence": gold,
                    "stance": stance,
                    "comment": f"planted at block {gold_block}",
                    "company": company,
                    "language": language,
                    "region": _REGIONS[language],
                    "date": date,
                }
            )
            counter += 1

    with open(out_dir / "manifest.jsonl", "w", encoding="utf-8") as fh:
        for row in manifest_rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
    with open(out_dir / "dataset.jsonl", "w", encoding="utf-8") as fh:
        for row in dataset_rows:
            assert set(row) == set(DATASET_FIELDS)
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")

    return {
        "documents": counter,
        "languages": list(languages),
        "records": len(dataset_rows),
        "seed": seed,
        "out_dir": str(out_dir),
    }
