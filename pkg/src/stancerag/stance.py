"""Prompt construction, stance generation through forced tool calls, and evidence selection."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .errors import (
    MalformedToolCall,
    MissingGold,
    NoHits,
    ScoreOutOfRange,
)
from .metrics import nlcs_chunk, tokenize
from .providers import ChatProvider, ChatRequest, ChatResponse
from .rerank import RerankedHit

STANCE_SET = (-2, -1, 0, 1, 2)

TOOL_NAME = "report_stance"

PROMPT_STRATEGIES = (
    "zs_naive",
    "zs_basic",
    "fs_one_query_all_stance",
    "fs_all_query_one_stance",
    "fs_few_query_few_stance",
)

SELECTION_MODES = ("FR", "AR", "BM", "GT")

DEFAULT_AR_SEPARATOR = "\n\n---\n\n"

# The 13 canonical policy queries, shipped as immutable assets. Spelling and
# punctuation variants ("organisation" vs "organization", a bare trailing
# period) are intentional and preserved.
QUERIES: dict[int, str] = {
    1: "Is the organization supporting policy and legislative measures to address climate change: energy efficiency policy, standards, and targets",
    2: "Is the organisation transparent about its positions on climate change legislation/policy and its activities to influence it?",
    3: "Is the organisation supporting policy and legislative measures to address climate change: carbon tax",
    4: "Is the organization transparent and clear about its position on climate change science?",
    5: "Is the organization supporting policy and legislative measures to address climate change: Standards, targets, and other regulatory measures directly targeting Greenhouse Gas emissions",
    6: "Is the organization transparent about its involvement with industry associations that are influencing climate policy, including the extent to which it is aligned with these groups on climate?",
    7: "Is the organization supporting an IPCC-aligned transition of the economy away from carbon-emitting technologies, including supporting relevant policy and legislative measures to enable this transition?",
    8: "Is the organization supporting policy and legislative measures to address climate change: Renewable energy legislation, targets, subsidies, and other policy",
    9: "Is the organization supporting the science-based response to climate change as set out by the IPCC?",
    10: "Is the organization supporting the UN FCCC process on climate change?",
    11: "Is the organisation supporting policy and legislative measures to address climate change: emissions trading.",
    12: "To what extent does the organization express the need for regulatory intervention to resolve the climate crisis?",
    13: "Is the organization supporting policy and legislative measures to enhance and protect ecosystems and land where carbon is being stored?",
}


@dataclass(frozen=True)
class PolicyQuery:
    query_id: int
    text: str

    @classmethod
    def by_id(cls, query_id: int) -> "PolicyQuery":
        if query_id not in QUERIES:
            raise KeyError(f"query_id {query_id} outside 1..13")
        return cls(query_id=query_id, text=QUERIES[query_id])


@dataclass(frozen=True)
class EvidenceSelection:
    mode: str
    k: int = 5
    separator: str = DEFAULT_AR_SEPARATOR

    def __post_init__(self):
        if self.mode not in SELECTION_MODES:
            raise ValueError(f"unknown evidence selection mode {self.mode!r}")


@dataclass(frozen=True)
class StanceResult:
    score: int
    reason: str
    strategy: str
    evidence_used: str
    provider_raw: dict

    def __post_init__(self):
        if self.score not in STANCE_SET:
            raise ValueError(f"score {self.score} outside {STANCE_SET}")
        if not self.reason:
            raise ValueError("reason must be non-empty")


def load_system_prompt(strategy: str) -> str:
    """Read the shipped system prompt for a strategy, byte-for-byte."""
    if strategy not in PROMPT_STRATEGIES:
        raise KeyError(f"unknown prompt strategy {strategy!r}")
    path = resources.files("stancerag").joinpath("assets", "prompts", f"{strategy}.txt")
    return path.read_text(encoding="utf-8")


def tool_schema() -> dict:
    return {
        "type": "function",
        "function": {
            "name": TOOL_NAME,
            "description": "Report the company's stance on the climate policy query.",
            "parameters": {
                "type": "object",
                "properties": {
                    "score": {
                        "type": "integer",
                        "minimum": -2,
                        "maximum": 2,
                        "description": "Stance score from -2 (opposing) to 2 (strongly supporting).",
                    },
                    "reason": {
                        "type": "string",
                        "description": "Short justification for the score.",
                    },
                },
                "required": ["score", "reason"],
            },
        },
    }


def build_prompt(strategy: str, query: PolicyQuery, evidence: str) -> ChatRequest:
    """System message is the verbatim strategy asset; the user message is a fixed template."""
    system = load_system_prompt(strategy)
    user = f"Question: {query.text}\n\nContext: {evidence}"
    return ChatRequest(
        messages=[
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
        tools=[tool_schema()],
        tool_choice={"type": "function", "function": {"name": TOOL_NAME}},
    )


def canonical_label(score: int) -> str:
    """Canonical stance label string: signless positives ("2" not "+2")."""
    return str(score)


def _parse_score(value) -> int | None:
    """Accept int scores and string scores with an optional leading sign."""
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        cleaned = value.strip().replace("−", "-")
        if cleaned.startswith("+"):
            cleaned = cleaned[1:]
        try:
            return int(cleaned)
        except ValueError:
            return None
    return None


def _validate_response(response: ChatResponse) -> tuple[int | None, str | None, str]:
    """Returns (score, reason, failure_kind); failure_kind is empty on success."""
    calls = [c for c in response.tool_calls if c.name == TOOL_NAME]
    if not calls:
        return None, None, "malformed"
    args = calls[0].arguments
    if not isinstance(args, dict):
        return None, None, "malformed"
    score = _parse_score(args.get("score"))
    reason = args.get("reason")
    if score is None or not isinstance(reason, str) or not reason.strip():
        return None, None, "malformed"
    if score not in STANCE_SET:
        return score, reason, "out_of_range"
    return score, reason.strip(), ""


def generate_stance(
    request: ChatRequest,
    provider: ChatProvider,
    strategy: str = "",
    evidence: str = "",
    retries: int = 2,
) -> StanceResult:
    """Invoke the chat provider and validate the forced tool call.

    Out-of-set scores and missing tool calls are retried with an identical
    request up to the retry budget, then raised as ScoreOutOfRange or
    MalformedToolCall. Nothing is ever clamped.
    """
    last_failure = "malformed"
    last_response: ChatResponse | None = None
    for _ in range(retries + 1):
        response = provider.complete(request)
        last_response = response
        score, reason, failure = _validate_response(response)
        if not failure:
            return StanceResult(
                score=score,
                reason=reason,
                strategy=strategy,
                evidence_used=evidence,
                provider_raw=response.raw,
            )
        last_failure = failure
    if last_failure == "out_of_range":
        raise ScoreOutOfRange(
            f"provider {provider.model_id} kept returning out-of-set scores after {retries} retries"
        )
    raise MalformedToolCall(
        f"provider {provider.model_id} produced no valid {TOOL_NAME} call after {retries} retries; "
        f"last content: {str(last_response.content)[:120] if last_response else ''!r}"
    )


def score_completion(query: PolicyQuery, evidence: str, stance_label: int, provider: ChatProvider) -> float:
    """Probability the provider assigns to the canonical stance label given query and evidence.

    Raises LogprobsUnsupported when the provider cannot score forced
    completions; callers report the diagnostic as absent, never zero.
    """
    messages = [
        {"role": "user", "content": f"Question: {query.text}\n\nContext: {evidence}\n\nStance:"},
    ]
    prob = float(provider.label_probability(messages, canonical_label(stance_label)))
    if not (0 < prob <= 1):
        raise ValueError(f"provider returned probability {prob} outside (0, 1]")
    return prob


def select_evidence(
    selection: EvidenceSelection | str,
    hits: list[RerankedHit],
    gold: str | None = None,
) -> str:
    """Pick the evidence text a strategy feeds to stance generation.

    FR: top reranked hit. AR: top-k hit texts joined by the separator in rank
    order. BM: the hit with the highest longer-normalized nLCS against gold
    (ties keep the earlier rank). GT: the gold snippet itself.
    """
    if isinstance(selection, str):
        selection = EvidenceSelection(mode=selection)
    mode = selection.mode
    ordered = sorted(hits, key=lambda h: h.new_rank)

    if mode == "GT":
        if not gold:
            raise MissingGold("GT selection requires gold evidence")
        return gold

    if not ordered:
        raise NoHits(f"{mode} selection requires at least one hit")

    if mode == "FR":
        return ordered[0].chunk.text

    if mode == "AR":
        top = ordered[: selection.k]
        return selection.separator.join(h.chunk.text for h in top)

    if mode == "BM":
        if not gold:
            raise MissingGold("BM selection requires gold evidence")
        gold_tokens = tokenize(gold)
        if not gold_tokens:
            raise MissingGold("BM selection requires non-empty gold evidence")
        best = max(ordered, key=lambda h: (nlcs_chunk(tokenize(h.chunk.text), gold_tokens), -h.new_rank))
        return best.chunk.text

    raise ValueError(f"unknown evidence selection mode {mode!r}")
