"""HTTP backends: OpenAI-style chat/embeddings and Google Custom Search."""

from __future__ import annotations

import logging
import os
from typing import Sequence

import httpx
import numpy as np

from termbench.errors import (
    EmptyResponseError,
    ProtocolError,
    ProviderError,
    RateLimitError,
    TransportError,
)
from termbench.providers.base import (
    ChatRequest,
    RetryPolicy,
    SearchResult,
    check_vectors,
    with_retries,
)

log = logging.getLogger(__name__)

GOOGLE_CSE_ENDPOINT = "https://www.googleapis.com/customsearch/v1"


def _api_key(env_name: str | None) -> str:
    if not env_name:
        return ""
    return os.environ.get(env_name, "").strip()


def _raise_for_status(resp: httpx.Response, what: str) -> None:
    if resp.status_code == 429:
        raise RateLimitError(f"{what}: HTTP 429")
    if resp.status_code >= 500:
        raise TransportError(f"{what}: HTTP {resp.status_code}")
    if resp.status_code >= 400:
        raise ProviderError(f"{what}: HTTP {resp.status_code}: {resp.text[:300]}")


def _send(client: httpx.Client, method: str, url: str, what: str, **kwargs) -> dict:
    try:
        resp = client.request(method, url, **kwargs)
    except httpx.TransportError as exc:
        raise TransportError(f"{what}: {exc}") from exc
    _raise_for_status(resp, what)
    try:
        return resp.json()
    except ValueError as exc:
        raise ProtocolError(f"{what}: response is not JSON") from exc


class HttpChat:
    """Chat-completion client for ``POST {base_url}/chat/completions``."""

    def __init__(
        self,
        base_url: str,
        model_id: str = "",
        api_key_env: str | None = "OPENAI_API_KEY",
        timeout: float = 120.0,
        retry: RetryPolicy | None = None,
        client: httpx.Client | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.retry = retry or RetryPolicy()
        headers = {}
        key = _api_key(api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.client = client or httpx.Client(timeout=timeout, headers=headers)

    def chat(self, req: ChatRequest) -> str:
        body = {
            "model": req.model_id or self.model_id,
            "messages": req.messages(),
            "temperature": req.temperature,
        }
        if req.max_tokens is not None:
            body["max_tokens"] = req.max_tokens
        url = f"{self.base_url}/chat/completions"
        data = with_retries(lambda: _send(self.client, "POST", url, "chat", json=body), self.retry, "chat")
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError("chat: unexpected response shape") from exc
        if not text or not text.strip():
            raise EmptyResponseError("chat: empty completion")
        return text


class HttpEmbedder:
    """Embedding client for ``POST {base_url}/embeddings``."""

    def __init__(
        self,
        base_url: str,
        model_id: str,
        dimension: int | None = None,
        api_key_env: str | None = "OPENAI_API_KEY",
        timeout: float = 120.0,
        retry: RetryPolicy | None = None,
        client: httpx.Client | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.dimension = dimension
        self.retry = retry or RetryPolicy()
        headers = {}
        key = _api_key(api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.client = client or httpx.Client(timeout=timeout, headers=headers)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValueError("texts must be non-empty")
        body = {"model": self.model_id, "input": list(texts)}
        url = f"{self.base_url}/embeddings"
        data = with_retries(lambda: _send(self.client, "POST", url, "embed", json=body), self.retry, "embed")
        try:
            rows = sorted(data["data"], key=lambda r: r.get("index", 0))
            vectors = [r["embedding"] for r in rows]
        except (KeyError, TypeError) as exc:
            raise ProtocolError("embed: unexpected response shape") from exc
        if len({len(v) for v in vectors}) > 1:
            raise ProtocolError("embed: backend returned mixed dimensions")
        arr = np.asarray(vectors, dtype=np.float32)
        check_vectors(arr, len(texts), self.dimension)
        if self.dimension is None:
            self.dimension = arr.shape[1]
        return arr


class GoogleSearch:
    """Quoted-phrase hit counts from the Custom Search JSON API.

    ``totalResults`` is read from ``searchInformation``; a missing field is
    treated as zero. Quota errors (429, or 403 with a rate/limit reason) raise
    :class:`RateLimitError`.
    """

    def __init__(
        self,
        api_key_env: str = "GOOGLE_API_KEY",
        cx_env: str = "GOOGLE_CSE_ID",
        endpoint: str = GOOGLE_CSE_ENDPOINT,
        extra_params: dict | None = None,
        timeout: float = 30.0,
        retry: RetryPolicy | None = None,
        client: httpx.Client | None = None,
    ) -> None:
        self.key = _api_key(api_key_env)
        self.cx = _api_key(cx_env)
        self.endpoint = endpoint
        self.extra_params = dict(extra_params or {})
        self.retry = retry or RetryPolicy()
        self.client = client or httpx.Client(timeout=timeout)

    def _once(self, query: str) -> dict:
        params = {"key": self.key, "cx": self.cx, "q": query, **self.extra_params}
        try:
            resp = self.client.get(self.endpoint, params=params)
        except httpx.TransportError as exc:
            raise TransportError(f"search: {exc}") from exc
        if resp.status_code == 403 and any(
            word in resp.text.lower() for word in ("ratelimit", "quota", "dailylimit")
        ):
            raise RateLimitError("search: quota exhausted")
        _raise_for_status(resp, "search")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError("search: response is not JSON") from exc

    def web_search_exact(self, phrase: str) -> SearchResult:
        if not phrase or not phrase.strip():
            raise ValueError("phrase must be non-blank")
        query = f'"{phrase.strip()}"'
        data = with_retries(lambda: self._once(query), self.retry, "search")
        raw = data.get("searchInformation", {}).get("totalResults", "0")
        try:
            total = int(raw)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"search: bad totalResults {raw!r}") from exc
        return SearchResult(query=query, total_results=total)
