"""Application configuration: one file, environment overrides on top."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

import yaml

from .chunker import ChunkerConfig

ENV_PREFIX = "STANCERAG_"


@dataclass
class ProviderEndpoint:
    base_url: str = ""
    model: str = ""
    timeout: float = 30.0
    retries: int = 2


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8040
    state_dir: str = "state"
    api_token: str = ""


@dataclass
class AppConfig:
    embedding: ProviderEndpoint = field(default_factory=ProviderEndpoint)
    rerank: ProviderEndpoint | None = None
    chat: ProviderEndpoint = field(default_factory=ProviderEndpoint)
    alignment: ProviderEndpoint | None = None
    chat_temperature: float = 0.0
    stance_retries: int = 2

    chunk_method: str = "layout"
    chunking: ChunkerConfig = field(default_factory=ChunkerConfig)

    k: int = 5
    sigma_threshold: float = 0.5
    tolerance: int = 1
    selection_strategies: tuple[str, ...] = ("GT", "FR", "BM", "AR")
    prompt_strategy: str = "fs_few_query_few_stance"
    faithfulness_fallback: bool = True
    max_parallel: int = 4

    service: ServiceConfig = field(default_factory=ServiceConfig)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["selection_strategies"] = list(self.selection_strategies)
        return data


def _apply_overrides(data: dict, env: dict) -> dict:
    """Environment variables override leaf config values.

    Naming: STANCERAG_<SECTION>_<FIELD> for nested sections (for example
    STANCERAG_EMBEDDING_BASE_URL) and STANCERAG_<FIELD> for top-level scalars
    (for example STANCERAG_K, STANCERAG_SIGMA_THRESHOLD).
    """
    sections = ("embedding", "rerank", "chat", "alignment", "chunking", "service")
    for key, value in env.items():
        if not key.startswith(ENV_PREFIX):
            continue
        rest = key[len(ENV_PREFIX):].lower()
        target = data
        name = rest
        for section in sections:
            if rest.startswith(section + "_"):
                target = data.setdefault(section, {}) or {}
                data[section] = target
                name = rest[len(section) + 1 :]
                break
        target[name] = value
    return data


def _coerce(value, template):
    if isinstance(template, bool):
        return str(value).lower() in ("1", "true", "yes", "on") if isinstance(value, str) else bool(value)
    if isinstance(template, int):
        return int(value)
    if isinstance(template, float):
        return float(value)
    return value


def _endpoint(data: dict | None, defaults: ProviderEndpoint | None = None) -> ProviderEndpoint | None:
    if data is None:
        return defaults
    base = defaults or ProviderEndpoint()
    return ProviderEndpoint(
        base_url=str(data.get("base_url", base.base_url)),
        model=str(data.get("model", base.model)),
        timeout=float(data.get("timeout", base.timeout)),
        retries=int(data.get("retries", base.retries)),
    )


def load_config(path: str | Path | None = None, env: dict | None = None) -> AppConfig:
    """Load configuration from a YAML or JSON file, then apply env overrides."""
    data: dict = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        if str(path).endswith(".json"):
            data = json.loads(text) or {}
        else:
            data = yaml.safe_load(text) or {}
    data = _apply_overrides(data, env if env is not None else dict(os.environ))

    cfg = AppConfig()
    cfg.embedding = _endpoint(data.get("embedding"), cfg.embedding)
    cfg.chat = _endpoint(data.get("chat"), cfg.chat)
    cfg.rerank = _endpoint(data.get("rerank"), None)
    cfg.alignment = _endpoint(data.get("alignment"), None)

    for name in (
        "chat_temperature",
        "stance_retries",
        "chunk_method",
        "k",
        "sigma_threshold",
        "tolerance",
        "prompt_strategy",
        "faithfulness_fallback",
        "max_parallel",
    ):
        if name in data:
            setattr(cfg, name, _coerce(data[name], getattr(cfg, name)))

    if "selection_strategies" in data:
        raw = data["selection_strategies"]
        if isinstance(raw, str):
            raw = [s.strip() for s in raw.split(",") if s.strip()]
        cfg.selection_strategies = tuple(raw)

    chunk_data = data.get("chunking") or {}
    base = ChunkerConfig()
    cfg.chunking = ChunkerConfig(
        min_chunk_words=int(chunk_data.get("min_chunk_words", base.min_chunk_words)),
        semantic_similarity_threshold=float(
            chunk_data.get("semantic_similarity_threshold", base.semantic_similarity_threshold)
        ),
        semantic_double_pass=_coerce(
            chunk_data.get("semantic_double_pass", base.semantic_double_pass), True
        ),
        max_chunk_tokens=int(chunk_data.get("max_chunk_tokens", base.max_chunk_tokens)),
        embed_batch_size=int(chunk_data.get("embed_batch_size", base.embed_batch_size)),
    )

    service_data = data.get("service") or {}
    cfg.service = ServiceConfig(
        host=str(service_data.get("host", cfg.service.host)),
        port=int(service_data.get("port", cfg.service.port)),
        state_dir=str(service_data.get("state_dir", cfg.service.state_dir)),
        api_token=str(service_data.get("api_token", cfg.service.api_token)),
    )
    return cfg


def config_hash(cfg: AppConfig) -> str:
    payload = json.dumps(cfg.to_dict(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
