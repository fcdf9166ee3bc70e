"""Content-addressed cache of provider calls.

Each call is stored as ``<dir>/<kind>/<digest[:2]>/<digest>.json`` holding
``{key, request, response, timestamp}``. Writes go through a temp file and an
atomic rename, serialized per key.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from termbench.providers.base import (
    CacheKey,
    ChatRequest,
    SearchResult,
    cache_key,
    check_vectors,
)


class CallCache:
    def __init__(self, directory: str | os.PathLike[str]) -> None:
        self.directory = Path(directory)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _path(self, key: CacheKey) -> Path:
        return self.directory / key.provider_kind / key.digest[:2] / f"{key.digest}.json"

    def _lock(self, key: CacheKey) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(str(key), threading.Lock())

    def load(self, key: CacheKey) -> Any | None:
        path = self._path(key)
        if not path.exists():
            self.misses += 1
            return None
        with path.open(encoding="utf-8") as fh:
            record = json.load(fh)
        self.hits += 1
        return record["response"]

    def store(self, key: CacheKey, request: Any, response: Any) -> None:
        path = self._path(key)
        record = {
            "key": {"provider_kind": key.provider_kind, "digest": key.digest},
            "request": request,
            "response": response,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with self._lock(key):
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record, fh, ensure_ascii=False)
            os.replace(tmp, path)


class CachedChat:
    def __init__(self, inner, cache: CallCache) -> None:
        self.inner = inner
        self.cache = cache

    def chat(self, req: ChatRequest) -> str:
        payload = req.canonical()
        key = cache_key("chat", payload)
        hit = self.cache.load(key)
        if hit is not None:
            return hit
        text = self.inner.chat(req)
        self.cache.store(key, payload, text)
        return text


class CachedEmbedder:
    def __init__(self, inner, cache: CallCache) -> None:
        self.inner = inner
        self.cache = cache
        self.model_id = inner.model_id

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        payload = {"model_id": self.model_id, "texts": list(texts)}
        key = cache_key("embed", payload)
        hit = self.cache.load(key)
        if hit is not None:
            return check_vectors(np.asarray(hit, dtype=np.float32), len(texts))
        vectors = self.inner.embed(texts)
        self.cache.store(key, payload, np.asarray(vectors, dtype=np.float32).tolist())
        return vectors


class CachedSearch:
    def __init__(self, inner, cache: CallCache) -> None:
        self.inner = inner
        self.cache = cache

    def web_search_exact(self, phrase: str) -> SearchResult:
        payload = {"phrase": phrase}
        key = cache_key("search", payload)
        hit = self.cache.load(key)
        if hit is not None:
            return SearchResult(hit["query"], hit["total_results"])
        result = self.inner.web_search_exact(phrase)
        self.cache.store(key, payload, {"query": result.query, "total_results": result.total_results})
        return result
