"""Local Wikipedia store: exact titles and first-paragraph definitions.

Input is a KILT-style JSONL dump. Each page is either

* KILT layout: ``{"wikipedia_id", "wikipedia_title", "text": [paragraph, ...]}``
  where ``text[0]`` repeats the title and ``Section::::`` lines are headers, or
* flat layout: ``{"page_id" | "id", "title", "text": "body"}`` with paragraphs
  separated by newlines.

The store directory holds ``pages.jsonl`` (``{page_id, title, definition}``),
``title_index.json`` (title and page id -> byte offset), ``stats.json`` and
``rejects.jsonl``.
"""

from __future__ import annotations

import json
import logging
import mmap
import os
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from termbench.errors import DataError
from termbench.jsonl import file_digest, read_json, write_json

log = logging.getLogger(__name__)

PAGES_FILE = "pages.jsonl"
INDEX_FILE = "title_index.json"
STATS_FILE = "stats.json"
REJECTS_FILE = "rejects.jsonl"


@dataclass(frozen=True)
class WikiPage:
    page_id: str
    title: str
    definition: str


@dataclass(frozen=True)
class CorpusStats:
    page_count: int
    dump_date: str | None
    build_digest: str
    dropped_empty: int = 0
    rejected: int = 0


def normalize_title(title: str) -> str:
    """Exact-title policy: NFC, surrounding whitespace trimmed, case kept."""
    return unicodedata.normalize("NFC", title).strip()


def first_paragraph(title: str, text) -> str:
    """First non-empty body paragraph, skipping the title echo and headers."""
    if isinstance(text, str):
        paragraphs = text.split("\n")
    elif isinstance(text, list):
        paragraphs = [p for p in text if isinstance(p, str)]
    else:
        return ""
    for i, para in enumerate(paragraphs):
        para = para.strip()
        if not para or para.startswith("Section::::") or para.startswith("BULLET::::"):
            continue
        if i == 0 and para == title.strip():
            continue
        return para
    return ""


def _parse_page(record: dict) -> tuple[str, str, object]:
    if "wikipedia_title" in record:
        page_id = record.get("wikipedia_id", record.get("_id"))
        title = record["wikipedia_title"]
    else:
        page_id = record.get("page_id", record.get("id"))
        title = record["title"]
    if page_id is None or not isinstance(title, str):
        raise KeyError("page_id/title")
    return str(page_id), title, record.get("text", "")


def ingest_dump(
    dump_path: str | os.PathLike[str],
    out_store: str | os.PathLike[str],
    dump_date: str | None = None,
) -> CorpusStats:
    """Build the store from a JSONL dump.

    Pages without a paragraph are dropped and counted. Malformed lines and
    duplicate titles (first occurrence wins) go to the reject log; ingestion
    continues past them. An unreadable dump is fatal.
    """
    dump_path = Path(dump_path)
    out = Path(out_store)
    out.mkdir(parents=True, exist_ok=True)
    try:
        src = dump_path.open(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dump {dump_path}: {exc}") from exc

    titles: dict[str, int] = {}
    page_ids: dict[str, int] = {}
    dropped = 0
    rejects = 0
    offset = 0
    with src, (out / PAGES_FILE).open("wb") as pages, (out / REJECTS_FILE).open(
        "w", encoding="utf-8"
    ) as rej:

        def reject(lineno: int, reason: str, **extra) -> None:
            nonlocal rejects
            rejects += 1
            rej.write(json.dumps({"line": lineno, "reason": reason, **extra}, ensure_ascii=False) + "\n")

        for lineno, line in enumerate(src, start=1):
            if not line.strip():
                continue
            try:
                page_id, raw_title, text = _parse_page(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                reject(lineno, f"malformed: {exc}")
                continue
            title = normalize_title(raw_title)
            definition = first_paragraph(raw_title, text)
            if not title or not definition:
                dropped += 1
                continue
            if title in titles:
                reject(lineno, "duplicate title", title=title, page_id=page_id)
                continue
            if page_id in page_ids:
                reject(lineno, "duplicate page_id", title=title, page_id=page_id)
                continue
            row = json.dumps(
                {"page_id": page_id, "title": title, "definition": definition}, ensure_ascii=False
            ).encode("utf-8") + b"\n"
            titles[title] = offset
            page_ids[page_id] = offset
            pages.write(row)
            offset += len(row)

    write_json(out / INDEX_FILE, {"titles": titles, "page_ids": page_ids})
    stats = CorpusStats(
        page_count=len(titles),
        dump_date=dump_date,
        build_digest=file_digest(out / PAGES_FILE),
        dropped_empty=dropped,
        rejected=rejects,
    )
    write_json(out / STATS_FILE, stats)
    log.info("ingested %d pages (%d empty, %d rejected)", stats.page_count, dropped, rejects)
    return stats


class Corpus:
    """Read-only view of a built store. Safe for concurrent readers."""

    def __init__(self, store: str | os.PathLike[str]) -> None:
        self.store = Path(store)
        if not (self.store / PAGES_FILE).exists():
            raise DataError(f"no corpus store at {self.store}")
        index = read_json(self.store / INDEX_FILE)
        self._titles: dict[str, int] = index["titles"]
        self._page_ids: dict[str, int] = index["page_ids"]
        with (self.store / PAGES_FILE).open("rb") as fh:
            size = os.fstat(fh.fileno()).st_size
            self._data = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ) if size else b""

    @property
    def stats(self) -> CorpusStats:
        return CorpusStats(**read_json(self.store / STATS_FILE))

    def __len__(self) -> int:
        return len(self._titles)

    def _at(self, offset: int) -> WikiPage:
        end = self._data.find(b"\n", offset)
        return WikiPage(**json.loads(self._data[offset:end]))

    def lookup_exact_title(self, candidate: str) -> WikiPage | None:
        offset = self._titles.get(normalize_title(candidate))
        return None if offset is None else self._at(offset)

    def get(self, page_id: str) -> WikiPage:
        try:
            return self._at(self._page_ids[str(page_id)])
        except KeyError:
            raise DataError(f"unknown page_id {page_id!r}") from None

    def pages(self) -> Iterator[WikiPage]:
        with (self.store / PAGES_FILE).open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield WikiPage(**json.loads(line))

    def titles(self) -> list[str]:
        return list(self._titles)
