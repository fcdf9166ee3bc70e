"""Request types, digests and the retry loop shared by all providers."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence, TypeVar

import numpy as np

from termbench.errors import (
    ProtocolError,
    ProviderUnavailable,
    RateLimitError,
    TransportError,
)

log = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call.

    ``assistant_turns`` holds earlier assistant replies for multi-turn
    exchanges; it interleaves with ``user_turns`` and is always one shorter.
    """

    system_prompt: str
    user_turns: tuple[str, ...]
    temperature: float = 0.0
    model_id: str = ""
    assistant_turns: tuple[str, ...] = ()
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "user_turns", tuple(self.user_turns))
        object.__setattr__(self, "assistant_turns", tuple(self.assistant_turns))
        if not self.user_turns:
            raise ValueError("user_turns must be non-empty")
        if not math.isfinite(self.temperature) or not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature out of range: {self.temperature}")
        if len(self.assistant_turns) != len(self.user_turns) - 1:
            raise ValueError("assistant_turns must interleave user_turns")

    def messages(self) -> list[dict[str, str]]:
        msgs = []
        if self.system_prompt:
            msgs.append({"role": "system", "content": self.system_prompt})
        for i, turn in enumerate(self.user_turns):
            msgs.append({"role": "user", "content": turn})
            if i < len(self.assistant_turns):
                msgs.append({"role": "assistant", "content": self.assistant_turns[i]})
        return msgs

    def follow_up(self, reply: str, user_turn: str) -> "ChatRequest":
        """The request that continues this exchange after ``reply``."""
        return ChatRequest(
            system_prompt=self.system_prompt,
            user_turns=self.user_turns + (user_turn,),
            temperature=self.temperature,
            model_id=self.model_id,
            assistant_turns=self.assistant_turns + (reply,),
            max_tokens=self.max_tokens,
        )

    def canonical(self) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "messages": self.messages(),
            "temperature": float(self.temperature),
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class SearchResult:
    query: str
    total_results: int

    def __post_init__(self) -> None:
        if self.total_results < 0:
            raise ValueError("total_results must be >= 0")


@dataclass(frozen=True)
class CacheKey:
    provider_kind: str  # chat | embed | search
    digest: str

    def __str__(self) -> str:
        return f"{self.provider_kind}/{self.digest}"


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest_of(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def cache_key(provider_kind: str, payload: Any) -> CacheKey:
    return CacheKey(provider_kind, digest_of({"kind": provider_kind, "request": payload}))


def prompt_digest(req: ChatRequest) -> str:
    return cache_key("chat", req.canonical()).digest


class ChatProvider(Protocol):
    def chat(self, req: ChatRequest) -> str: ...


class Embedder(Protocol):
    model_id: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class SearchProvider(Protocol):
    def web_search_exact(self, phrase: str) -> SearchResult: ...


@dataclass
class RetryPolicy:
    attempts: int = 3
    base_delay: float = 1.0
    max_delay: float = 30.0
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def delay(self, attempt: int) -> float:
        return min(self.max_delay, self.base_delay * (2**attempt))


def with_retries(fn: Callable[[], T], policy: RetryPolicy, what: str = "call") -> T:
    """Run ``fn`` with exponential backoff on transport, 5xx and 429 failures.

    Exhausted transport retries become :class:`ProviderUnavailable`; an
    exhausted rate limit is re-raised as :class:`RateLimitError` so callers
    can checkpoint and resume later.
    """
    last: Exception | None = None
    for attempt in range(policy.attempts):
        try:
            return fn()
        except (TransportError, RateLimitError) as exc:
            last = exc
            log.warning("%s failed (attempt %d/%d): %s", what, attempt + 1, policy.attempts, exc)
            if attempt + 1 < policy.attempts:
                policy.sleep(policy.delay(attempt))
    if isinstance(last, RateLimitError):
        raise last
    raise ProviderUnavailable(f"{what} failed after {policy.attempts} attempts: {last}") from last


def check_vectors(vectors: np.ndarray, n_expected: int, dimension: int | None = None) -> np.ndarray:
    if vectors.ndim != 2 or vectors.shape[0] != n_expected:
        raise ProtocolError(f"expected {n_expected} vectors, got shape {vectors.shape}")
    if dimension is not None and vectors.shape[1] != dimension:
        raise ProtocolError(f"expected dimension {dimension}, got {vectors.shape[1]}")
    if not np.all(np.isfinite(vectors)):
        raise ProtocolError("embedding contains non-finite components")
    return vectors
