"""External model providers: wire contracts, HTTP clients, and deterministic stubs.

Wire shapes are fixed:

* embedding:  POST ``{model, input: [text...]}`` -> ``{embeddings: [[...], ...]}``
* rerank:     POST ``{model, query, documents: [text...]}`` -> ``{scores: [...]}``
* chat:       POST ``{model, messages, tools, tool_choice, temperature}`` ->
  ``{tool_calls: [{name, arguments}], content}``; the forced-completion
  extension adds ``{logprobs: true, forced_completion: label}`` to the request
  and ``{token_logprobs: [...]}`` to the response.
* alignment:  POST ``{claim, context}`` -> ``{score}``

The stubs mirror the same method surfaces so every pipeline stage runs
offline and deterministically.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
import time
from dataclasses import dataclass, field

import requests

from .corpus import normalize_text
from .errors import (
    EmbeddingUnavailable,
    LogprobsUnsupported,
    ProviderUnavailable,
    RerankUnavailable,
    ScorerUnavailable,
)


@dataclass
class ChatToolCall:
    name: str
    arguments: dict


@dataclass
class ChatResponse:
    tool_calls: list[ChatToolCall] = field(default_factory=list)
    content: str | None = None
    raw: dict = field(default_factory=dict)


@dataclass
class ChatRequest:
    messages: list[dict]
    tools: list[dict]
    tool_choice: dict

    def user_text(self) -> str:
        for msg in self.messages:
            if msg.get("role") == "user":
                return msg.get("content", "")
        return ""


class EmbeddingProvider:
    model_id = "unset"

    def embed(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


class RerankProvider:
    model_id = "unset"

    def score(self, query: str, documents: list[str]) -> list[float]:
        raise NotImplementedError


class ChatProvider:
    model_id = "unset"

    def complete(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError

    def label_probability(self, messages: list[dict], label: str) -> float:
        raise LogprobsUnsupported(f"provider {self.model_id} has no logprobs support")


class AlignmentProvider:
    model_id = "unset"

    def score(self, claim: str, context: str) -> float:
        raise NotImplementedError


# --- HTTP implementations ---------------------------------------------------


def _post_with_retries(session, url, payload, timeout, retries, error_cls):
    last = None
    for attempt in range(retries + 1):
        try:
            resp = session.post(url, json=payload, timeout=timeout)
            resp.raise_for_status()
            return resp.json()
        except (requests.RequestException, ValueError) as exc:
            last = exc
            if attempt < retries:
                time.sleep(min(2.0, 0.2 * (attempt + 1)))
    raise error_cls(f"POST {url} failed after {retries + 1} attempts: {last}")


class HttpEmbeddingProvider(EmbeddingProvider):
    def __init__(self, base_url: str, model: str, timeout: float = 30.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.model_id = model
        self.timeout = timeout
        self.retries = retries
        self.session = requests.Session()

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            return []
        data = _post_with_retries(
            self.session,
            self.base_url,
            {"model": self.model_id, "input": list(texts)},
            self.timeout,
            self.retries,
            EmbeddingUnavailable,
        )
        embeddings = data.get("embeddings")
        if not isinstance(embeddings, list) or len(embeddings) != len(texts):
            raise EmbeddingUnavailable(
                f"embedding response malformed: expected {len(texts)} vectors"
            )
        return embeddings


class HttpRerankProvider(RerankProvider):
    def __init__(self, base_url: str, model: str, timeout: float = 30.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.model_id = model
        self.timeout = timeout
        self.retries = retries
        self.session = requests.Session()

    def score(self, query: str, documents: list[str]) -> list[float]:
        if not documents:
            return []
        data = _post_with_retries(
            self.session,
            self.base_url,
            {"model": self.model_id, "query": query, "documents": list(documents)},
            self.timeout,
            self.retries,
            RerankUnavailable,
        )
        scores = data.get("scores")
        if not isinstance(scores, list) or len(scores) != len(documents):
            raise RerankUnavailable("rerank response malformed: scores misaligned")
        return [float(s) for s in scores]


class HttpChatProvider(ChatProvider):
    def __init__(
        self,
        base_url: str,
        model: str,
        timeout: float = 60.0,
        retries: int = 2,
        temperature: float = 0.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model_id = model
        self.timeout = timeout
        self.retries = retries
        self.temperature = temperature
        self.session = requests.Session()

    def complete(self, request: ChatRequest) -> ChatResponse:
        data = _post_with_retries(
            self.session,
            self.base_url,
            {
                "model": self.model_id,
                "messages": request.messages,
                "tools": request.tools,
                "tool_choice": request.tool_choice,
                "temperature": self.temperature,
            },
            self.timeout,
            self.retries,
            ProviderUnavailable,
        )
        calls = [
            ChatToolCall(name=c.get("name", ""), arguments=c.get("arguments", {}))
            for c in data.get("tool_calls", [])
        ]
        return ChatResponse(tool_calls=calls, content=data.get("content"), raw=data)

    def label_probability(self, messages: list[dict], label: str) -> float:
        data = _post_with_retries(
            self.session,
            self.base_url,
            {
                "model": self.model_id,
                "messages": messages,
                "logprobs": True,
                "forced_completion": label,
                "temperature": self.temperature,
            },
            self.timeout,
            self.retries,
            ProviderUnavailable,
        )
        logprobs = data.get("token_logprobs")
        if not isinstance(logprobs, list) or not logprobs:
            raise LogprobsUnsupported(f"provider {self.model_id} returned no token_logprobs")
        return math.exp(sum(float(p) for p in logprobs))


class HttpAlignmentProvider(AlignmentProvider):
    def __init__(self, base_url: str, model: str = "alignment", timeout: float = 30.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.model_id = model
        self.timeout = timeout
        self.retries = retries
        self.session = requests.Session()

    def score(self, claim: str, context: str) -> float:
        data = _post_with_retries(
            self.session,
            self.base_url,
            {"claim": claim, "context": context},
            self.timeout,
            self.retries,
            ScorerUnavailable,
        )
        if "score" not in data:
            raise ScorerUnavailable("alignment response missing score")
        return float(data["score"])


# --- deterministic stubs ------------------------------------------------------

STANCE_CUE_RE = re.compile(r"stance marker ([+-]?[0-2])\b")


class HashEmbeddingProvider(EmbeddingProvider):
    """Signed feature-hash bag-of-words embeddings.

    Identical texts map to identical vectors, so self-retrieval is exact, and
    token overlap drives similarity. Hashing uses sha256, never the salted
    builtin hash, so vectors are stable across processes.
    """

    def __init__(self, dim: int = 256):
        self.dim = dim
        self.model_id = f"stub-hash-{dim}"
        self._bucket_cache: dict[str, tuple[int, int]] = {}

    def _bucket(self, token: str) -> tuple[int, int]:
        cached = self._bucket_cache.get(token)
        if cached is None:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1 if digest[4] & 1 else -1
            cached = (bucket, sign)
            self._bucket_cache[token] = cached
        return cached

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vec = [0.0] * self.dim
            for token in normalize_text(text).split():
                bucket, sign = self._bucket(token)
                vec[bucket] += float(sign)
            out.append(vec)
        return out


class SeededRandomEmbeddingProvider(EmbeddingProvider):
    """Deterministic pseudo-random unit vectors keyed by (seed, text).

    Useful as a non-informative retriever: ordering is arbitrary but stable.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.model_id = f"stub-random-{dim}-s{seed}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            key = hashlib.sha256(f"{self.seed}:{text}".encode("utf-8")).digest()
            rng = random.Random(int.from_bytes(key[:8], "big"))
            out.append([rng.gauss(0.0, 1.0) for _ in range(self.dim)])
        return out


class FixedEmbeddingProvider(EmbeddingProvider):
    """Returns vectors from a lookup table; unknown texts get the default vector."""

    def __init__(self, table: dict[str, list[float]], default: list[float] | None = None):
        self.table = dict(table)
        self.default = default
        self.model_id = "stub-fixed"

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            if text in self.table:
                out.append(list(self.table[text]))
            elif self.default is not None:
                out.append(list(self.default))
            else:
                raise EmbeddingUnavailable(f"no fixed vector for text {text[:40]!r}")
        return out


class ScriptedRerankProvider(RerankProvider):
    def __init__(self, score_fn, model_id: str = "stub-rerank"):
        self.score_fn = score_fn
        self.model_id = model_id

    def score(self, query: str, documents: list[str]) -> list[float]:
        return [float(self.score_fn(query, doc, i)) for i, doc in enumerate(documents)]


def reversing_reranker() -> ScriptedRerankProvider:
    return ScriptedRerankProvider(lambda q, d, i: float(i), model_id="stub-rerank-reverse")


def cue_boost_reranker() -> ScriptedRerankProvider:
    """Scores documents carrying a planted stance cue above everything else."""
    return ScriptedRerankProvider(
        lambda q, d, i: (1000.0 if STANCE_CUE_RE.search(d) else 0.0) - i,
        model_id="stub-rerank-cue",
    )


def cue_bury_reranker() -> ScriptedRerankProvider:
    return ScriptedRerankProvider(
        lambda q, d, i: (-1000.0 if STANCE_CUE_RE.search(d) else 0.0) - i,
        model_id="stub-rerank-bury",
    )


class ScriptedChatProvider(ChatProvider):
    """Chat stub driven by a responder callable over the request.

    ``label_prob_fn(user_text, label) -> float`` enables the forced-completion
    probability surface; when absent, logprob scoring reports unsupported.
    """

    def __init__(self, responder, model_id: str = "stub-chat", label_prob_fn=None):
        self.responder = responder
        self.model_id = model_id
        self.label_prob_fn = label_prob_fn
        self.calls = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls += 1
        return self.responder(request)

    def label_probability(self, messages: list[dict], label: str) -> float:
        if self.label_prob_fn is None:
            raise LogprobsUnsupported(f"provider {self.model_id} has no logprobs support")
        user = next((m.get("content", "") for m in messages if m.get("role") == "user"), "")
        return float(self.label_prob_fn(user, label))


def _tool_response(score, reason: str) -> ChatResponse:
    return ChatResponse(
        tool_calls=[ChatToolCall(name="report_stance", arguments={"score": score, "reason": reason})],
        raw={"stub": True},
    )


def parse_stance_cue(text: str) -> int | None:
    match = STANCE_CUE_RE.search(text)
    if match:
        return int(match.group(1))
    return None


def _cue_label_prob(user_text: str, label: str, hit: float = 0.8, miss: float = 0.2) -> float:
    cue = parse_stance_cue(user_text)
    if cue is not None and str(cue) == label:
        return hit
    return miss


def cue_echo_chat(model_id: str = "stub-chat-echo") -> ScriptedChatProvider:
    """Returns the stance cue planted in the evidence, 0 when no cue is present."""

    def responder(request: ChatRequest) -> ChatResponse:
        cue = parse_stance_cue(request.user_text())
        if cue is None:
            return _tool_response(0, "no stance cue found in the provided context")
        return _tool_response(cue, f"evidence carries stance cue {cue}")

    return ScriptedChatProvider(responder, model_id=model_id, label_prob_fn=_cue_label_prob)


def cue_offset_chat(model_id: str = "stub-chat-offset") -> ScriptedChatProvider:
    """Shifts the planted cue by one while keeping its polarity (2<->1, -2<->-1)."""

    shift = {2: 1, 1: 2, -1: -2, -2: -1, 0: 0}

    def responder(request: ChatRequest) -> ChatResponse:
        cue = parse_stance_cue(request.user_text())
        if cue is None:
            return _tool_response(0, "no stance cue found in the provided context")
        return _tool_response(shift[cue], f"adjacent stance to cue {cue}")

    return ScriptedChatProvider(responder, model_id=model_id, label_prob_fn=_cue_label_prob)


def malformed_chat(model_id: str = "stub-chat-malformed") -> ScriptedChatProvider:
    def responder(request: ChatRequest) -> ChatResponse:
        return ChatResponse(content="The stance is clearly supportive, about a 2.", raw={"stub": True})

    return ScriptedChatProvider(responder, model_id=model_id)


def out_of_range_chat(model_id: str = "stub-chat-oor") -> ScriptedChatProvider:
    def responder(request: ChatRequest) -> ChatResponse:
        return _tool_response(5, "enthusiastic beyond the scale")

    return ScriptedChatProvider(responder, model_id=model_id)


def constant_chat(score: int, model_id: str = "stub-chat-constant") -> ScriptedChatProvider:
    def responder(request: ChatRequest) -> ChatResponse:
        return _tool_response(score, f"always reports {score}")

    return ScriptedChatProvider(responder, model_id=model_id, label_prob_fn=_cue_label_prob)


class LexicalAlignmentStub(AlignmentProvider):
    """Token-set Jaccard overlap; a crude but deterministic alignment stand-in."""

    model_id = "stub-align-jaccard"

    def score(self, claim: str, context: str) -> float:
        a = set(normalize_text(claim).split())
        b = set(normalize_text(context).split())
        if not a or not b:
            return 0.0
        return len(a & b) / len(a | b)


class DownProvider(EmbeddingProvider, RerankProvider, ChatProvider, AlignmentProvider):
    """Always raises the configured error; simulates an unreachable endpoint."""

    def __init__(self, error):
        self.error = error
        self.model_id = "stub-down"

    def embed(self, texts):
        raise self.error

    def score(self, *args, **kwargs):
        raise self.error

    def complete(self, request):
        raise self.error

    def label_probability(self, messages, label):
        raise self.error


@dataclass
class ProviderSet:
    embedding: EmbeddingProvider
    chat: ChatProvider
    rerank: RerankProvider | None = None
    alignment: AlignmentProvider | None = None

    def ids(self) -> dict:
        return {
            "embedding": self.embedding.model_id if self.embedding else None,
            "chat": self.chat.model_id if self.chat else None,
            "rerank": self.rerank.model_id if self.rerank else None,
            "alignment": self.alignment.model_id if self.alignment else None,
        }


def build_stub_providers(
    embedder: str = "hash",
    chat: str = "echo",
    reranker: str | None = None,
    seed: int = 0,
    dim: int = 256,
) -> ProviderSet:
    if embedder == "hash":
        emb = HashEmbeddingProvider(dim=dim)
    elif embedder == "random":
        emb = SeededRandomEmbeddingProvider(dim=dim, seed=seed)
    else:
        raise ValueError(f"unknown stub embedder {embedder!r}")

    chat_builders = {
        "echo": cue_echo_chat,
        "offset": cue_offset_chat,
        "malformed": malformed_chat,
        "out_of_range": out_of_range_chat,
    }
    if chat not in chat_builders:
        raise ValueError(f"unknown stub chat {chat!r}")

    rerankers = {
        None: None,
        "none": None,
        "reverse": reversing_reranker,
        "cue_boost": cue_boost_reranker,
        "cue_bury": cue_bury_reranker,
    }
    if reranker not in rerankers:
        raise ValueError(f"unknown stub reranker {reranker!r}")
    rr = rerankers[reranker]() if rerankers[reranker] else None

    return ProviderSet(
        embedding=emb,
        chat=chat_builders[chat](),
        rerank=rr,
        alignment=LexicalAlignmentStub(),
    )


def build_http_providers(config) -> ProviderSet:
    """Build live providers from an AppConfig; unset endpoints stay None."""
    emb = HttpEmbeddingProvider(
        config.embedding.base_url,
        config.embedding.model,
        timeout=config.embedding.timeout,
        retries=config.embedding.retries,
    )
    chat = HttpChatProvider(
        config.chat.base_url,
        config.chat.model,
        timeout=config.chat.timeout,
        retries=config.chat.retries,
        temperature=config.chat_temperature,
    )
    rerank = None
    if config.rerank is not None and config.rerank.base_url:
        rerank = HttpRerankProvider(
            config.rerank.base_url,
            config.rerank.model,
            timeout=config.rerank.timeout,
            retries=config.rerank.retries,
        )
    alignment = None
    if config.alignment is not None and config.alignment.base_url:
        alignment = HttpAlignmentProvider(
            config.alignment.base_url,
            config.alignment.model,
            timeout=config.alignment.timeout,
            retries=config.alignment.retries,
        )
    return ProviderSet(embedding=emb, chat=chat, rerank=rerank, alignment=alignment)
