"""Exception hierarchy shared by every pipeline stage.

Two broad families matter operationally: ``DataError`` (bad inputs, bad
fixtures, schema drift) and ``ProviderError`` (an external model endpoint
misbehaved). The CLI maps them to distinct exit codes.
"""

from __future__ import annotations


class StanceRagError(Exception):
    """Base class for all package errors."""


class DataError(StanceRagError):
    """Invalid input data or a violated data contract."""


class ProviderError(StanceRagError):
    """An external provider (embedding / rerank / chat / alignment) failed."""


# --- corpus ---------------------------------------------------------------

class EmptyDocument(DataError):
    """Document text is empty after normalization."""


class SchemaViolation(DataError):
    """A dataset line failed validation.

    Carries ``violations``: a list of (line_number, field, message) tuples.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        detail = "; ".join(
            f"line {line}: field '{field}': {msg}" for line, field, msg in self.violations
        )
        super().__init__(f"dataset schema violations: {detail}")


class DocumentConflict(DataError):
    """A doc_id was re-ingested with different content."""


# --- providers ------------------------------------------------------------

class EmbeddingUnavailable(ProviderError):
    """Embedding provider unreachable or persistently failing."""


class DimensionMismatch(ProviderError):
    """Embedding provider returned vectors of an unexpected dimension."""


class RerankUnavailable(ProviderError):
    """Rerank provider unreachable or persistently failing."""


class ProviderUnavailable(ProviderError):
    """Chat provider unreachable or persistently failing."""


class MalformedToolCall(ProviderError):
    """Chat provider did not produce a valid tool call after retries."""


class ScoreOutOfRange(ProviderError):
    """Chat provider returned a stance score outside the allowed set."""


class LogprobsUnsupported(ProviderError):
    """Chat provider cannot score forced completions; diagnostics are absent."""


class ScorerUnavailable(ProviderError):
    """Alignment scorer unreachable; faithfulness is absent unless a fallback is enabled."""


# --- metrics / selection --------------------------------------------------

class EmptyGold(DataError):
    """Gold evidence token sequence is empty."""


class EmptyOperand(DataError):
    """A metric operand token sequence is empty."""


class NonPositiveProbability(DataError):
    """A probability outside (0, 1] was passed to a diagnostic."""


class MissingGold(DataError):
    """Evidence selection mode requires gold evidence but none was given."""


class NoHits(DataError):
    """Evidence selection mode requires retrieval hits but none were given."""
