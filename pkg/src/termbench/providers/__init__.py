from termbench.providers.base import (
    CacheKey,
    ChatProvider,
    ChatRequest,
    Embedder,
    RetryPolicy,
    SearchProvider,
    SearchResult,
    cache_key,
    prompt_digest,
    with_retries,
)
from termbench.providers.cache import CachedChat, CachedEmbedder, CachedSearch, CallCache
from termbench.providers.http import GoogleSearch, HttpChat, HttpEmbedder
from termbench.providers.mock import MockEmbedder, MockSearch, ScriptedChat

__all__ = [
    "CacheKey",
    "CachedChat",
    "CachedEmbedder",
    "CachedSearch",
    "CallCache",
    "ChatProvider",
    "ChatRequest",
    "Embedder",
    "GoogleSearch",
    "HttpChat",
    "HttpEmbedder",
    "MockEmbedder",
    "MockSearch",
    "RetryPolicy",
    "ScriptedChat",
    "SearchProvider",
    "SearchResult",
    "cache_key",
    "prompt_digest",
    "with_retries",
]
