"""Overlap, ranking, and stance-agreement measurements.

All text overlap operates on word tokens produced by :func:`tokenize`;
character-level alignment would be quadratic-prohibitive for document-scale
operands and adds nothing for snippet comparison.
"""

from __future__ import annotations

from typing import Sequence

from .corpus import normalize_text
from .errors import (
    EmptyGold,
    EmptyOperand,
    NonPositiveProbability,
    ScorerUnavailable,
)

Tokens = Sequence[str]


def tokenize(text: str) -> list[str]:
    """Normalized whitespace word tokens, the operand unit of every overlap metric."""
    return normalize_text(text).split()


def _as_tokens(value: str | Tokens) -> list[str]:
    if isinstance(value, str):
        return tokenize(value)
    return list(value)


def lcs_len(x: Tokens, y: Tokens) -> int:
    """Length of the longest common subsequence.

    Classic dynamic program, O(|x| * |y|) time and linear space.
    """
    x = list(x)
    y = list(y)
    if len(y) > len(x):
        x, y = y, x
    if not y:
        return 0
    prev = [0] * (len(y) + 1)
    for xi in x:
        cur = [0]
        append = cur.append
        for j, yj in enumerate(y):
            if xi == yj:
                append(prev[j] + 1)
            else:
                a = prev[j + 1]
                b = cur[j]
                append(a if a >= b else b)
        prev = cur
    return prev[-1]


def nlcs_parse(parsed: str | Tokens, gold: str | Tokens) -> float:
    """LCS length normalized by the gold length.

    Containment-tolerant: surrounding text in ``parsed`` is not penalized, so a
    gold snippet recovered anywhere in a large output still scores 1.0.
    """
    p = _as_tokens(parsed)
    g = _as_tokens(gold)
    if not g:
        raise EmptyGold("gold token sequence is empty")
    return lcs_len(p, g) / len(g)


def nlcs_chunk(chunk: str | Tokens, gold: str | Tokens) -> float:
    """LCS length normalized by the longer sequence.

    Penalizes both omissions and excessive context, so compact chunks score
    higher than sprawling ones with the same overlap.
    """
    c = _as_tokens(chunk)
    g = _as_tokens(gold)
    if not c or not g:
        raise EmptyOperand("both operands must be non-empty token sequences")
    return lcs_len(c, g) / max(len(c), len(g))


def is_relevant(hit_text: str | Tokens, gold: str | Tokens, threshold: float = 0.5) -> bool:
    """A hit counts as relevant when its gold-normalized nLCS strictly exceeds the threshold."""
    return nlcs_parse(hit_text, gold) > threshold


def recall_at_k(hits: Sequence[str | Tokens], gold: str | Tokens, threshold: float = 0.5) -> int:
    """1 if any ranked hit is relevant to the gold snippet, else 0."""
    g = _as_tokens(gold)
    if not g:
        raise EmptyGold("gold token sequence is empty")
    for hit in hits:
        if is_relevant(hit, g, threshold):
            return 1
    return 0


def mrr(hits: Sequence[str | Tokens], gold: str | Tokens, threshold: float = 0.5) -> float:
    """Reciprocal rank of the first relevant hit, 0.0 when none is relevant."""
    g = _as_tokens(gold)
    if not g:
        raise EmptyGold("gold token sequence is empty")
    for rank, hit in enumerate(hits, start=1):
        if is_relevant(hit, g, threshold):
            return 1.0 / rank
    return 0.0


def exact_match(y: int, y_hat: int) -> int:
    """Indicator of stance equality."""
    return 1 if y == y_hat else 0


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


def hit_rate_tolerance(y: int, y_hat: int, tau: int = 1) -> int:
    """Relaxed stance agreement: within tau and same polarity, or both exactly 0.

    sign(0) is 0, so a neutral gold is only matched by a neutral prediction.
    """
    if abs(y - y_hat) <= tau and _sign(y) == _sign(y_hat):
        return 1
    if y == 0 and y_hat == 0:
        return 1
    return 0


def helpfulness(p_gold: float, p_retrieved: float) -> float:
    """Sigmoid of the log ratio of stance probability given gold vs retrieved evidence.

    Computed in closed form as p_gold / (p_gold + p_retrieved), which is exact
    where exp/log round trips are not.
    """
    if p_gold <= 0 or p_retrieved <= 0:
        raise NonPositiveProbability(
            f"probabilities must be positive, got ({p_gold}, {p_retrieved})"
        )
    return p_gold / (p_gold + p_retrieved)


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = sum(x * x for x in a) ** 0.5
    nb = sum(y * y for y in b) ** 0.5
    if na == 0 or nb == 0:
        return 0.0
    cos = dot / (na * nb)
    return max(-1.0, min(1.0, cos))


def conciseness(retrieved: str, gold: str, embedder) -> float:
    """Embedding similarity of retrieved vs gold evidence mapped to [0, 1] via (1+cos)/2.

    The mapping is this artifact's pinned definition and is labeled as such in
    reports.
    """
    vectors = embedder.embed([retrieved, gold])
    return (1.0 + _cosine(vectors[0], vectors[1])) / 2.0


def faithfulness(
    retrieved: str,
    gold: str,
    scorer=None,
    fallback_to_lexical: bool = False,
) -> float:
    """Alignment score in [0, 1] of retrieved evidence against gold.

    Delegates to an external alignment scorer. When the scorer is down and the
    lexical fallback is enabled, the longer-normalized nLCS stands in (flagged
    by the caller in reports).
    """
    if scorer is not None:
        try:
            score = float(scorer.score(claim=retrieved, context=gold))
            return max(0.0, min(1.0, score))
        except ScorerUnavailable:
            if not fallback_to_lexical:
                raise
    elif not fallback_to_lexical:
        raise ScorerUnavailable("no alignment scorer configured")
    r = tokenize(retrieved)
    g = tokenize(gold)
    if not r or not g:
        return 0.0
    return nlcs_chunk(r, g)
