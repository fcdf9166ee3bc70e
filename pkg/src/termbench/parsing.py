"""Lenient parsers for chat output: numbered lists, list literals, JSON objects."""

from __future__ import annotations

import ast
import json
import re

from termbench.errors import ParseError

_NUMBERED = re.compile(r"^\s*(?:[*_]{1,2}\s*)?(\d{1,3})\s*[.)]\s*(.*\S)\s*$")
_BULLET = re.compile(r"^\s*[-*•]\s+(.*\S)\s*$")
_QUOTED = re.compile(r'"((?:[^"\\\n]|\\.)*)"|\'((?:[^\'\\\n]|\\.)*)\'')


def _clean(s: str) -> str:
    s = s.replace("**", "").replace("__", "").strip()
    return s.strip("\"'“”‘’ ").strip()


def split_label(item: str) -> tuple[str, str]:
    """``"Term: explanation"`` -> ``("Term", "explanation")``, split at the first colon."""
    item = item.replace("**", "").replace("__", "")
    if ":" in item:
        label, rest = item.split(":", 1)
        return _clean(label), rest.strip()
    return _clean(item), ""


def parse_numbered_items(text: str) -> list[tuple[int, str, str]]:
    """Numbered ``N. label: explanation`` items, in order of appearance.

    Unnumbered lines following an item are appended to its explanation.
    Returns ``(number, label, explanation)`` tuples.
    """
    items: list[list] = []
    for line in text.splitlines():
        m = _NUMBERED.match(line)
        if m:
            label, expl = split_label(m.group(2))
            items.append([int(m.group(1)), label, expl])
        elif items and line.strip() and not _BULLET.match(line):
            items[-1][2] = (items[-1][2] + " " + line.strip()).strip()
    return [(n, label, expl) for n, label, expl in items if label]


def _literal_list(block: str) -> list | None:
    for loader in (json.loads, ast.literal_eval):
        try:
            value = loader(block)
        except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError):
            continue
        if isinstance(value, list):
            return value
    return None


def parse_list(text: str) -> list[str]:
    """Items of a JSON/Python list, a numbered list or a bulleted list.

    A truncated list literal (``[ "a", "b" ...``) still yields its quoted
    strings. Raises :class:`ParseError` when nothing list-like is found.
    """
    start = text.find("[")
    if start >= 0:
        end = text.rfind("]")
        if end > start:
            value = _literal_list(text[start : end + 1])
            if value is not None:
                items = [_clean(str(v)) for v in value if isinstance(v, (str, int, float))]
                items = [i for i in items if i]
                if items:
                    return items
        quoted = [a or b for a, b in _QUOTED.findall(text[start:])]
        quoted = [_clean(q) for q in quoted if _clean(q)]
        if quoted:
            return quoted
    numbered = parse_numbered_items(text)
    if numbered:
        return [label if not expl else f"{label}: {expl}" for _, label, expl in numbered]
    bullets = [_clean(m.group(1)) for line in text.splitlines() if (m := _BULLET.match(line))]
    bullets = [b for b in bullets if b]
    if bullets:
        return bullets
    raise ParseError("no list found in reply", raw=text)


def extract_json_object(text: str) -> dict:
    """First balanced ``{...}`` in ``text`` that parses as a JSON object.

    Surrounding prose is ignored. Raises :class:`ParseError` if none parses.
    """
    i = text.find("{")
    while i >= 0:
        depth = 0
        in_str = False
        esc = False
        for j in range(i, len(text)):
            c = text[j]
            if in_str:
                if esc:
                    esc = False
                elif c == "\\":
                    esc = True
                elif c == '"':
                    in_str = False
            elif c == '"':
                in_str = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    try:
                        value = json.loads(text[i : j + 1], strict=False)
                    except ValueError:
                        break
                    if isinstance(value, dict):
                        return value
                    break
        i = text.find("{", i + 1)
    raise ParseError("no JSON object found in reply", raw=text)
