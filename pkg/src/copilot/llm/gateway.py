"""Tiered gateway over chat providers with caching, audit log, embeddings."""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass, field

from ..config import EngineConfig, TierConfig
from ..errors import ContextOverflow, EmptyText
from . import embedding
from .providers import CallableProvider, HttpProvider, ScriptedProvider
from .tokens import count_message_tokens, count_tokens

TIERS = ("explorer", "deployer")

_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    text: str


@dataclass
class CompletionResult:
    text: str
    prompt_tokens: int
    completion_tokens: int
    attempts: int = 1
    cached: bool = False
    fingerprint: str = ""


@dataclass
class LogEntry:
    tier: str
    fingerprint: str
    prompt_tokens: int
    completion_tokens: int
    cached: bool


def fingerprint(tier: str, messages) -> str:
    """Stable hash of (tier, normalized message texts), whitespace collapsed."""
    h = hashlib.sha256()
    h.update(tier.encode("utf-8"))
    for m in messages:
        h.update(b"\x1f")
        h.update(m.role.encode("utf-8"))
        h.update(b"\x1e")
        h.update(_WS.sub(" ", m.text).strip().encode("utf-8"))
    return h.hexdigest()[:16]


def _build_provider(tier_cfg: TierConfig, base_dir):
    if tier_cfg.provider == "scripted":
        tape = tier_cfg.tape
        path = tape if tape.startswith("/") else str(base_dir / tape)
        return ScriptedProvider(path)
    if tier_cfg.provider == "http":
        import os

        api_key = os.environ.get(tier_cfg.api_key_env, "") if tier_cfg.api_key_env else ""
        return HttpProvider(
            tier_cfg.endpoint, tier_cfg.model, api_key=api_key, max_retries=tier_cfg.max_retries
        )
    raise ValueError(f"provider {tier_cfg.provider!r} must be constructed explicitly")


@dataclass
class _TierState:
    config: TierConfig
    provider: object
    cache: dict = field(default_factory=dict)
    slots: threading.Semaphore = None  # in-flight cap

    def __post_init__(self):
        self.slots = threading.Semaphore(max(1, self.config.request_cap))


class Gateway:
    """Shared entry point for chat completion, embeddings, token counts.

    Providers may be injected per tier (tests pass CallableProvider or a
    preloaded ScriptedProvider); otherwise they are built from config.
    """

    def __init__(self, config: EngineConfig, providers: dict | None = None):
        self.config = config
        providers = providers or {}
        self._tiers: dict[str, _TierState] = {}
        for tier in TIERS:
            tier_cfg: TierConfig = getattr(config, tier)
            provider = providers.get(tier) or _build_provider(tier_cfg, config.workspace_path)
            self._tiers[tier] = _TierState(config=tier_cfg, provider=provider)
        self.log: list[LogEntry] = []
        self._log_lock = threading.Lock()

    # -- completion --------------------------------------------------------

    def complete(self, tier: str, messages, temperature: float | None = None,
                 max_tokens: int | None = None) -> CompletionResult:
        if tier not in self._tiers:
            raise ValueError(f"unknown tier {tier!r}")
        if not any(m.role == "user" for m in messages):
            raise ValueError("at least one user message required")
        state = self._tiers[tier]
        cfg = state.config
        temperature = cfg.temperature if temperature is None else temperature
        max_tokens = cfg.max_tokens if max_tokens is None else max_tokens

        prompt_tokens = count_message_tokens(messages)
        if prompt_tokens > cfg.context_limit:
            raise ContextOverflow(
                f"prompt is {prompt_tokens} tokens, limit {cfg.context_limit} for tier {tier}"
            )

        fp = fingerprint(tier, messages)
        if cfg.cache and fp in state.cache:
            text = state.cache[fp]
            result = CompletionResult(
                text=text,
                prompt_tokens=prompt_tokens,
                completion_tokens=count_tokens(text),
                cached=True,
                fingerprint=fp,
            )
            self._append_log(tier, result)
            return result

        with state.slots:
            text, attempts = state.provider.complete(fp, messages, temperature, max_tokens)
        if text is None:
            raise EmptyText(f"provider for tier {tier} returned no text")
        if cfg.cache:
            state.cache[fp] = text
        result = CompletionResult(
            text=text,
            prompt_tokens=prompt_tokens,
            completion_tokens=count_tokens(text),
            attempts=attempts,
            fingerprint=fp,
        )
        self._append_log(tier, result)
        return result

    def _append_log(self, tier: str, result: CompletionResult) -> None:
        with self._log_lock:
            self.log.append(
                LogEntry(
                    tier=tier,
                    fingerprint=result.fingerprint,
                    prompt_tokens=result.prompt_tokens,
                    completion_tokens=result.completion_tokens,
                    cached=result.cached,
                )
            )

    def log_mark(self) -> int:
        with self._log_lock:
            return len(self.log)

    def usage_since(self, mark: int) -> dict:
        with self._log_lock:
            window = self.log[mark:]
        return {
            "prompt_tokens": sum(e.prompt_tokens for e in window),
            "completion_tokens": sum(e.completion_tokens for e in window),
            "calls": len(window),
        }

    # -- embeddings and counting ------------------------------------------

    def embed(self, text: str) -> list[float]:
        return embedding.embed(text)

    def count_tokens(self, text: str) -> int:
        return count_tokens(text)


def callable_gateway(config: EngineConfig, explorer_fn, deployer_fn=None) -> Gateway:
    """Gateway with in-process functions standing in for both tiers."""
    return Gateway(
        config,
        providers={
            "explorer": CallableProvider(explorer_fn),
            "deployer": CallableProvider(deployer_fn or explorer_fn),
        },
    )
