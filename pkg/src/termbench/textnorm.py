"""Staged normalization and containment matching for term phrases.

Both the haystack and the term go through the same staged pipeline:

1. lowercase, collapse whitespace -> containment test (``raw``)
2. delete ``( ... )`` and ``[ ... ]`` spans, collapse -> test (``bracket_stripped``)
3. ``-`` -> space, drop punctuation, collapse -> test (``punct_stripped``)

Every normalized character keeps the index of the original character it came
from, so a match found at any stage can be mapped back onto the source text.
That is what lets :func:`replace_term` preserve the casing and spacing of the
untouched part of a sentence.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

from termbench.errors import NotReplaceableError

STAGES = ("raw", "bracket_stripped", "punct_stripped")

# Unicode P* categories cover the straight apostrophe and the curly quotes;
# these symbol-class marks are commonly typed as apostrophes too.
_EXTRA_APOSTROPHES = frozenset("`´ʹʻʼ")
_INNER_BRACKETS = re.compile(r"\([^()\[\]]*\)|\[[^()\[\]]*\]")


@dataclass(frozen=True)
class MatchReport:
    matched: bool
    stage: str  # one of STAGES, or "none"

    def __bool__(self) -> bool:
        return self.matched


NO_MATCH = MatchReport(False, "none")


class _Tracked:
    """A string whose characters remember their offset in the original."""

    __slots__ = ("chars", "origin")

    def __init__(self, chars: list[str], origin: list[int]) -> None:
        self.chars = chars
        self.origin = origin

    @classmethod
    def of(cls, text: str) -> "_Tracked":
        return cls(list(text), list(range(len(text))))

    @property
    def text(self) -> str:
        return "".join(self.chars)

    def lower(self) -> "_Tracked":
        chars: list[str] = []
        origin: list[int] = []
        for c, i in zip(self.chars, self.origin):
            for lc in c.casefold():
                chars.append(lc)
                origin.append(i)
        return _Tracked(chars, origin)

    def collapse(self) -> "_Tracked":
        chars: list[str] = []
        origin: list[int] = []
        pending: int | None = None
        for c, i in zip(self.chars, self.origin):
            if c.isspace():
                if chars and pending is None:
                    pending = i
                continue
            if pending is not None:
                chars.append(" ")
                origin.append(pending)
                pending = None
            chars.append(c)
            origin.append(i)
        return _Tracked(chars, origin)

    def strip_brackets(self) -> "_Tracked":
        chars, origin = list(self.chars), list(self.origin)
        # innermost-first, repeated until no balanced pair is left
        while True:
            m = _INNER_BRACKETS.search("".join(chars))
            if m is None:
                break
            del chars[m.start() : m.end()]
            del origin[m.start() : m.end()]
        return _Tracked(chars, origin)

    def strip_punctuation(self) -> "_Tracked":
        chars: list[str] = []
        origin: list[int] = []
        for c, i in zip(self.chars, self.origin):
            if c == "-":
                chars.append(" ")
                origin.append(i)
            elif not _is_punct(c):
                chars.append(c)
                origin.append(i)
        return _Tracked(chars, origin)


def _is_punct(c: str) -> bool:
    return c in _EXTRA_APOSTROPHES or unicodedata.category(c).startswith("P")


def _stages(text: str) -> list[_Tracked]:
    raw = _Tracked.of(text).lower().collapse()
    bracketless = raw.strip_brackets().collapse()
    bare = bracketless.strip_punctuation().collapse()
    return [raw, bracketless, bare]


def normalize(text: str, stage: str = "punct_stripped") -> str:
    """Return ``text`` as it looks after the given stage."""
    return _stages(text)[STAGES.index(stage)].text


def full_normalize(text: str) -> str:
    return normalize(text, "punct_stripped")


def _locate(text: str, subtext: str) -> tuple[MatchReport, int, int]:
    if not subtext or not subtext.strip():
        raise ValueError("subtext must be non-blank")
    for stage, hay, needle in zip(STAGES, _stages(text), _stages(subtext)):
        pattern = needle.text
        if not pattern:
            # e.g. a term made only of a bracketed span: nothing left to match
            continue
        at = hay.text.find(pattern)
        if at >= 0:
            start = hay.origin[at]
            end = hay.origin[at + len(pattern) - 1] + 1
            return MatchReport(True, stage), start, end
    return NO_MATCH, -1, -1


def contains_term(text: str, subtext: str) -> MatchReport:
    """Check whether ``subtext`` occurs in ``text`` at any normalization stage.

    Returns the first stage at which the normalized term is a substring of the
    normalized text. Matching is plain substring containment, no word
    boundaries, no fuzziness.
    """
    report, _, _ = _locate(text, subtext)
    return report


def find_term_span(text: str, subtext: str) -> tuple[int, int] | None:
    """Original-text ``[start, end)`` of the first match, or None."""
    report, start, end = _locate(text, subtext)
    return (start, end) if report.matched else None


def replace_term(text: str, old_term: str, new_term: str) -> str:
    """Replace the first occurrence of ``old_term`` with ``new_term`` verbatim.

    The occurrence is located under the same stage at which it matched, then
    the covering span of the original text is swapped out. Everything outside
    the span is left byte-for-byte intact.

    Raises:
        NotReplaceableError: ``old_term`` does not occur in ``text``.
    """
    report, start, end = _locate(text, old_term)
    if not report.matched:
        raise NotReplaceableError(f"{old_term!r} not found in text")
    return text[:start] + new_term + text[end:]
