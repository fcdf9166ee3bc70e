"""Answers from the model under test, collected over an API or imported."""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from termbench.errors import DataError, ProviderError
from termbench.jsonl import append_jsonl, iter_jsonl
from termbench.providers.base import ChatRequest

log = logging.getLogger(__name__)

# the question is sent as the only user turn, with no system prompt
ANSWER_SYSTEM = ""


@dataclass(frozen=True)
class Response:
    question_id: str
    model_id: str
    text: str
    decoding: dict = field(default_factory=dict)
    collected_via: str = "api"  # api | import

    @classmethod
    def from_dict(cls, d: dict) -> "Response":
        return cls(d["question_id"], d["model_id"], d["text"], dict(d.get("decoding") or {}), d.get("collected_via", "api"))


@dataclass
class Collection:
    responses: list[Response]
    missing: list[dict]

    @property
    def coverage(self) -> float:
        total = len(self.responses) + len(self.missing)
        return 100.0 * len(self.responses) / total if total else 0.0


def collect_responses(
    questions: Sequence,
    chat,
    model_id: str,
    temperature: float = 0.0,
    max_tokens: int | None = None,
    checkpoint: str | Path | None = None,
    parallelism: int = 1,
) -> Collection:
    """Ask every question once, in dataset order.

    Finished answers are appended to ``checkpoint`` as they arrive, so a run
    stopped part-way resumes with only the remaining questions. A question
    whose provider call still fails after retries is listed in ``missing``
    together with the error.
    """
    decoding = {"temperature": temperature, "max_tokens": max_tokens}
    done: dict[str, Response] = {}
    if checkpoint and Path(checkpoint).exists():
        for row in iter_jsonl(checkpoint):
            r = Response.from_dict(row)
            if r.model_id == model_id:
                done[r.question_id] = r
    lock = threading.Lock()

    def ask(q) -> Response | dict:
        if q.id in done:
            return done[q.id]
        req = ChatRequest(ANSWER_SYSTEM, (q.text,), temperature=temperature, model_id=model_id, max_tokens=max_tokens)
        try:
            text = chat.chat(req)
        except ProviderError as exc:
            log.warning("no answer for %s: %s", q.id, exc)
            return {"question_id": q.id, "reason": f"{type(exc).__name__}: {exc}"}
        r = Response(q.id, model_id, text, decoding, "api")
        if checkpoint:
            with lock:
                append_jsonl(checkpoint, r)
        return r

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        results = list(pool.map(ask, questions))
    responses = [r for r in results if isinstance(r, Response)]
    missing = [r for r in results if isinstance(r, dict)]
    return Collection(responses, missing)


def import_responses(path: str | Path, questions: Sequence, model_id: str) -> tuple[list[Response], list[dict]]:
    """Read externally collected ``{question_id, text}`` rows.

    Returns the accepted responses (in file order of their last occurrence)
    and a reject log with line numbers. Later rows for the same question
    replace earlier ones. Raises :class:`DataError` if nothing is usable.
    """
    known = {q.id for q in questions}
    accepted: dict[str, Response] = {}
    rejects: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                qid, text = row["question_id"], row["text"]
                if not isinstance(qid, str) or not isinstance(text, str):
                    raise TypeError("question_id and text must be strings")
            except (ValueError, KeyError, TypeError) as exc:
                rejects.append({"line": lineno, "reason": f"malformed: {exc}"})
                continue
            if qid not in known:
                rejects.append({"line": lineno, "question_id": qid, "reason": "unknown question_id"})
                continue
            if qid in accepted:
                log.warning("line %d: duplicate answer for %s replaces the earlier one", lineno, qid)
                del accepted[qid]
            accepted[qid] = Response(qid, row.get("model_id") or model_id, text, dict(row.get("decoding") or {}), "import")
    for r in rejects:
        log.warning("import reject at line %d: %s", r["line"], r["reason"])
    if not accepted:
        raise DataError(f"{path}: no valid response rows")
    return list(accepted.values()), rejects
