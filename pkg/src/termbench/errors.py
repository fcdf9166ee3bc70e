"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ``ProviderError`` -> 2, ``DataError`` -> 3,
``UsageError`` -> 1.
"""

from __future__ import annotations


class TermbenchError(Exception):
    pass


class UsageError(TermbenchError):
    pass


class PrerequisiteError(UsageError):
    """An upstream stage has not produced its artifacts yet."""

    def __init__(self, stage: str, prerequisite: str, missing: str) -> None:
        self.stage = stage
        self.prerequisite = prerequisite
        self.missing = missing
        super().__init__(
            f"`{stage}` needs {missing}; run `{prerequisite}` first"
        )


class ProviderError(TermbenchError):
    pass


class TransportError(ProviderError):
    """Network-level or 5xx failure; retryable."""


class RateLimitError(ProviderError):
    """Quota exhausted or HTTP 429; retryable, and callers may pause/resume."""


class ProviderUnavailable(ProviderError):
    """Retries exhausted on a retryable failure."""


class EmptyResponseError(ProviderError):
    pass


class ProtocolError(ProviderError):
    """Backend answered with a payload that violates the expected shape."""


class DataError(TermbenchError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, raw: str = "") -> None:
        super().__init__(message)
        self.raw = raw


class NotReplaceableError(DataError):
    pass


class UndefinedScoreError(DataError):
    pass
