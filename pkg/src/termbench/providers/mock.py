"""Deterministic offline stand-ins for the three providers."""

from __future__ import annotations

import hashlib
import re
import threading
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from termbench.errors import EmptyResponseError, ProviderError
from termbench.providers.base import ChatRequest, SearchResult, prompt_digest

_TOKEN = re.compile(r"\w+", re.UNICODE)


class ScriptedChat:
    """Answers from a script, falling back to another provider.

    ``script`` is either a mapping from prompt digest to reply, or a callable
    that returns a reply or None for requests it does not handle. Every call
    is recorded in ``calls``.
    """

    def __init__(
        self,
        script: Mapping[str, str] | Callable[[ChatRequest], str | None] | None = None,
        fallback=None,
    ) -> None:
        self.script = script or {}
        self.fallback = fallback
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()

    def chat(self, req: ChatRequest) -> str:
        with self._lock:
            self.calls.append(req)
        if callable(self.script):
            reply = self.script(req)
        else:
            reply = self.script.get(prompt_digest(req))
        if reply is None:
            if self.fallback is None:
                raise ProviderError("scripted chat has no reply for this request")
            return self.fallback.chat(req)
        if not reply.strip():
            raise EmptyResponseError("scripted empty completion")
        return reply


def _seed(*parts: str) -> int:
    h = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class MockEmbedder:
    """Seeded hash of token n-grams projected onto ``dimension`` reals.

    Each distinct n-gram owns a fixed Gaussian direction; a text's vector is
    the sum over its n-grams, so texts sharing words land close under L2. The
    empty text (no tokens) maps to the zero vector.
    """

    def __init__(self, dimension: int = 256, max_ngram: int = 2, seed: int = 0) -> None:
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.max_ngram = max_ngram
        self.seed = seed
        self.model_id = f"mock-ngram-{dimension}-{max_ngram}-{seed}"
        self._direction = lru_cache(maxsize=200_000)(self._make_direction)

    def _make_direction(self, gram: str) -> np.ndarray:
        rng = np.random.default_rng(_seed(str(self.seed), gram))
        return rng.standard_normal(self.dimension)

    def _ngrams(self, text: str) -> Iterable[str]:
        tokens = _TOKEN.findall(text.lower())
        for n in range(1, self.max_ngram + 1):
            for i in range(len(tokens) - n + 1):
                yield " ".join(tokens[i : i + n])

    def embed_one(self, text: str) -> np.ndarray:
        acc = np.zeros(self.dimension)
        for gram in self._ngrams(text):
            acc += self._direction(gram)
        return acc.astype(np.float32)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValueError("texts must be non-empty")
        return np.stack([self.embed_one(t) for t in texts])


class MockSearch:
    """Hit counts from fixed lists.

    Phrases in ``zero_hits`` report 0, phrases in ``hits`` report 1, anything
    else reports ``default_total``. Comparison is case-insensitive.
    """

    def __init__(
        self,
        zero_hits: Iterable[str] = (),
        hits: Iterable[str] = (),
        default_total: int = 1,
    ) -> None:
        self.zero_hits = {p.strip().lower() for p in zero_hits}
        self.hits = {p.strip().lower() for p in hits}
        self.default_total = default_total
        self.queries: list[str] = []

    def web_search_exact(self, phrase: str) -> SearchResult:
        if not phrase or not phrase.strip():
            raise ValueError("phrase must be non-blank")
        key = phrase.strip().lower()
        self.queries.append(phrase)
        if key in self.zero_hits:
            total = 0
        elif key in self.hits:
            total = 1
        else:
            total = self.default_total
        return SearchResult(query=f'"{phrase.strip()}"', total_results=total)
