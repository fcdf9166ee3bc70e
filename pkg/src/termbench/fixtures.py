"""Small synthetic encyclopedia dumps for offline runs and tests."""

from __future__ import annotations

import json
import random
from pathlib import Path

from termbench.synthetic import _ADJECTIVES, _NOUNS, TOPICS

_QUALIFIERS = ("music", "physics", "biology", "film", "economics", "band", "novel", "software")


def synthetic_pages(n_pages: int = 400, seed: int = 0) -> list[dict]:
    """Deterministic ``{page_id, title, text}`` records with unique titles."""
    rng = random.Random(seed)
    topic_words = [name.split()[0] for name, _ in TOPICS]
    pages: list[dict] = []
    seen: set[str] = set()
    while len(pages) < n_pages:
        shape = rng.randrange(4)
        noun = rng.choice(_NOUNS).capitalize()
        if shape == 0:
            title = f"{rng.choice(_ADJECTIVES).capitalize()} {noun.lower()}"
        elif shape == 1:
            title = f"{noun} {rng.choice(_NOUNS)}"
        elif shape == 2:
            title = f"{noun} ({rng.choice(_QUALIFIERS)})"
        else:
            title = f"{rng.choice(topic_words)} {noun.lower()}"
        if title in seen:
            continue
        seen.add(title)
        field = rng.choice(topic_words).lower()
        text = (
            f"{title} is a concept in {field} describing how a {rng.choice(_NOUNS)} "
            f"and a {rng.choice(_NOUNS)} interact over time."
        )
        pages.append({"page_id": str(1000 + len(pages)), "title": title, "text": text})
    return pages


def write_synthetic_dump(path: str | Path, n_pages: int = 400, seed: int = 0, noisy: bool = True) -> Path:
    """Write a JSONL dump. Half the records use the KILT layout.

    With ``noisy`` it also contains one malformed line, one page without
    text and one repeated title, which ingestion must reject or drop.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, p in enumerate(synthetic_pages(n_pages, seed)):
        if i % 2:
            rec = {"wikipedia_id": p["page_id"], "wikipedia_title": p["title"], "text": [p["title"] + "\n", p["text"] + "\n"]}
        else:
            rec = p
        lines.append(json.dumps(rec, ensure_ascii=False))
    if noisy:
        lines.append("{not json")
        lines.append(json.dumps({"page_id": "9", "title": "Empty page", "text": ""}))
        first = synthetic_pages(1, seed)[0]
        lines.append(json.dumps({"page_id": "8", "title": first["title"], "text": "A second page with a taken title."}))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
