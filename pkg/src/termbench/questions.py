"""Question composition, quality gates, dataset assembly and subsets.

Each term pair yields three candidates:

* ``composed_hypothetical``: the model writes a question with the pair's
  valid term and the made-up term.
* ``composed_valid``: the model writes a question with the substitute (main)
  and the pair's valid term (secondary).
* ``replaced``: the made-up term inside the hypothetical question is swapped
  for the substitute by string surgery.

A candidate survives only if both of its terms are found in its text. If the
hypothetical question is rejected, its whole triple is dropped.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from termbench import prompts
from termbench.benchgen import SOURCES, TermPair, Topic
from termbench.errors import DataError, NotReplaceableError
from termbench.providers.base import ChatRequest, digest_of, prompt_digest
from termbench.textnorm import contains_term, full_normalize, replace_term

log = logging.getLogger(__name__)

METHODS = ("composed_hypothetical", "composed_valid", "replaced")
QUESTIONS_PER_PAIR = len(METHODS)
LEVELS = {"q1080": 6, "q180": 1}


@dataclass(frozen=True)
class QTerm:
    phrase: str
    kind: str  # hypothetical | valid
    definition: str
    source: str | None = None
    page_id: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "QTerm":
        return cls(d["phrase"], d["kind"], d["definition"], d.get("source"), d.get("page_id"))


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    kind: str  # hypothetical | valid
    method: str
    pair_id: str
    term_a: QTerm
    term_b: QTerm
    topic_index: int
    topic_name: str
    hypothetical_phrase: str
    term_position: int
    source: str
    rank: int
    request_digest: str | None = None

    @property
    def terms(self) -> tuple[QTerm, QTerm]:
        return self.term_a, self.term_b

    @classmethod
    def from_dict(cls, d: dict) -> "Question":
        d = dict(d)
        d["term_a"] = QTerm.from_dict(d["term_a"])
        d["term_b"] = QTerm.from_dict(d["term_b"])
        return cls(**d)


class RejectedCandidate(Exception):
    def __init__(self, method: str, pair_id: str, reason: str) -> None:
        super().__init__(f"{method} for pair {pair_id}: {reason}")
        self.method = method
        self.pair_id = pair_id
        self.reason = reason


@dataclass
class Dataset:
    questions: list[Question]
    topics: list[Topic] = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    rejections: list[dict] = field(default_factory=list)

    @property
    def provenance(self) -> str:
        return digest_of([q.id for q in self.questions])

    def tallies(self) -> dict:
        return {
            "total": len(self.questions),
            "per_kind": dict(sorted(Counter(q.kind for q in self.questions).items())),
            "per_method": dict(sorted(Counter(q.method for q in self.questions).items())),
        }


def _qterm_valid(v) -> QTerm:
    return QTerm(v.phrase, "valid", v.definition, v.source, v.page_id)


def _qterm_hypo(h) -> QTerm:
    return QTerm(h.phrase, "hypothetical", h.made_up_definition)


def question_id(pair_id: str, method: str, text: str) -> str:
    return digest_of({"pair_id": pair_id, "method": method, "text": text})[:20]


def both_terms_present(text: str, a: str, b: str) -> bool:
    return bool(contains_term(text, a)) and bool(contains_term(text, b))


def _make(pair: TermPair, method: str, text: str, a: QTerm, b: QTerm, digest: str | None) -> Question:
    term = pair.hypothetical
    kind = "hypothetical" if "hypothetical" in (a.kind, b.kind) else "valid"
    return Question(
        id=question_id(pair.pair_id, method, text),
        text=text,
        kind=kind,
        method=method,
        pair_id=pair.pair_id,
        term_a=a,
        term_b=b,
        topic_index=term.topic.index,
        topic_name=term.topic.name,
        hypothetical_phrase=term.phrase,
        term_position=term.position,
        source=pair.source,
        rank=pair.rank,
        request_digest=digest,
    )


def _compose(chat, req: ChatRequest, first: str, second: str, method: str, pair_id: str) -> tuple[str, str]:
    reply = chat.chat(req).strip()
    if both_terms_present(reply, first, second):
        return reply, prompt_digest(req)
    retry = req.follow_up(reply, prompts.QUESTION_RETRY_USER.format(first=first, second=second))
    reply = chat.chat(retry).strip()
    if both_terms_present(reply, first, second):
        return reply, prompt_digest(retry)
    raise RejectedCandidate(method, pair_id, "term missing after regeneration")


def compose_hypothetical_question(pair: TermPair, chat, model_id: str = "") -> Question:
    term = pair.hypothetical
    req = ChatRequest(
        prompts.HYPOTHETICAL_QUESTION_SYSTEM,
        (prompts.HYPOTHETICAL_QUESTION_USER.format(topic=term.topic.line, made_up=term.line, real=pair.valid.line),),
        temperature=0.0,
        model_id=model_id,
    )
    text, digest = _compose(chat, req, pair.valid.phrase, term.phrase, "composed_hypothetical", pair.pair_id)
    return _make(pair, "composed_hypothetical", text, _qterm_valid(pair.valid), _qterm_hypo(term), digest)


def compose_valid_question(pair: TermPair, chat, model_id: str = "") -> Question:
    term = pair.hypothetical
    req = ChatRequest(
        prompts.VALID_QUESTION_SYSTEM,
        (
            prompts.VALID_QUESTION_USER.format(
                topic=term.topic.line, main=pair.substitute.line, secondary=pair.valid.line
            ),
        ),
        temperature=0.0,
        model_id=model_id,
    )
    text, digest = _compose(chat, req, pair.substitute.phrase, pair.valid.phrase, "composed_valid", pair.pair_id)
    return _make(pair, "composed_valid", text, _qterm_valid(pair.valid), _qterm_valid(pair.substitute), digest)


def compose_replaced_question(hypothetical_question: Question, pair: TermPair) -> Question:
    """Swap the made-up term for the pair's substitute, then re-gate."""
    try:
        text = replace_term(hypothetical_question.text, pair.hypothetical.phrase, pair.substitute.phrase)
    except NotReplaceableError as exc:
        raise RejectedCandidate("replaced", pair.pair_id, "made-up term not replaceable") from exc
    if not both_terms_present(text, pair.valid.phrase, pair.substitute.phrase):
        raise RejectedCandidate("replaced", pair.pair_id, "term missing after replacement")
    return _make(pair, "replaced", text, _qterm_valid(pair.valid), _qterm_valid(pair.substitute), None)


def _compose_triple(pair: TermPair, chat, model_id: str) -> tuple[list[Question], list[dict]]:
    """Candidates for one pair, in method order, plus rejection records."""
    rejected: list[dict] = []

    def rec(method: str, reason: str) -> None:
        rejected.append({"pair_id": pair.pair_id, "method": method, "reason": reason})

    try:
        hq = compose_hypothetical_question(pair, chat, model_id)
    except RejectedCandidate as exc:
        rec("composed_hypothetical", exc.reason)
        rec("composed_valid", "triple dropped: hypothetical question rejected")
        rec("replaced", "triple dropped: hypothetical question rejected")
        return [], rejected
    out = [hq]
    try:
        out.append(compose_valid_question(pair, chat, model_id))
    except RejectedCandidate as exc:
        rec("composed_valid", exc.reason)
    try:
        out.append(compose_replaced_question(hq, pair))
    except RejectedCandidate as exc:
        rec("replaced", exc.reason)
    return out, rejected


def pair_order(pair: TermPair) -> tuple:
    h = pair.hypothetical
    return (h.topic.index, h.position, SOURCES.index(pair.source), pair.rank)


def assemble_dataset(
    pairs: Sequence[TermPair],
    chat,
    model_id: str = "",
    topics: Sequence[Topic] = (),
    parallelism: int = 1,
) -> Dataset:
    """Compose all candidates, drop rejected ones, then exact duplicates.

    Duplicates are judged on fully normalized text; the first candidate in
    (topic, term, source, rank, method) order is kept. The counts satisfy
    ``final = candidates - duplicates - failures``.
    """
    ordered = sorted(pairs, key=pair_order)
    n_terms = len({(p.hypothetical.topic.index, p.hypothetical.phrase) for p in ordered})
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        results = list(pool.map(lambda p: _compose_triple(p, chat, model_id), ordered))

    kept: list[Question] = []
    rejections: list[dict] = []
    seen: set[str] = set()
    duplicates = 0
    for questions, rejected in results:
        rejections.extend(rejected)
        for q in questions:
            key = full_normalize(q.text)
            if key in seen:
                duplicates += 1
                rejections.append({"pair_id": q.pair_id, "method": q.method, "reason": "duplicate"})
                continue
            seen.add(key)
            kept.append(q)
    failures = sum(1 for r in rejections if r["reason"] != "duplicate")
    counts = {
        "terms": n_terms,
        "pairs": len(ordered),
        "candidates": len(ordered) * QUESTIONS_PER_PAIR,
        "duplicates": duplicates,
        "failures": failures,
        "final": len(kept),
    }
    ds = Dataset(kept, list(topics), counts, rejections)
    ds.counts.update(ds.tallies())
    log.info("dataset: %s", counts)
    return ds


def sample_subset(dataset: Dataset, level: str, topics: Sequence[Topic] | None = None) -> tuple[Dataset, list[dict]]:
    """Draw the ``full``, ``q1080`` or ``q180`` subset.

    ``q1080`` takes the first six made-up terms (generation order) of every
    topic, ``q180`` the first one; for each, the rank-1 pair of every source
    contributes its three questions. Returns the subset and a shortfall list
    naming every topic or term that could not contribute its full share.
    """
    if level == "full":
        return Dataset(list(dataset.questions), list(dataset.topics), dict(dataset.counts)), []
    if level not in LEVELS:
        raise DataError(f"unknown level {level!r}")
    per_topic = LEVELS[level]
    topics = list(topics if topics is not None else dataset.topics)

    by_topic: dict[int, list[tuple[int, str]]] = {}
    for q in dataset.questions:
        entry = (q.term_position, q.hypothetical_phrase)
        bucket = by_topic.setdefault(q.topic_index, [])
        if entry not in bucket:
            bucket.append(entry)
    topic_ids = [t.index for t in topics] if topics else sorted(by_topic)

    chosen_terms: set[tuple[int, str]] = set()
    shortfall: list[dict] = []
    for t in topic_ids:
        terms = sorted(by_topic.get(t, []))[:per_topic]
        if len(terms) < per_topic:
            shortfall.append({"topic_index": t, "terms_expected": per_topic, "terms_found": len(terms)})
        chosen_terms.update((t, phrase) for _, phrase in terms)

    picked = [
        q
        for q in dataset.questions
        if q.rank == 1 and (q.topic_index, q.hypothetical_phrase) in chosen_terms
    ]
    expected = len(SOURCES) * QUESTIONS_PER_PAIR
    per_term = Counter((q.topic_index, q.hypothetical_phrase) for q in picked)
    for key in sorted(chosen_terms):
        if per_term[key] < expected:
            shortfall.append(
                {"topic_index": key[0], "term": key[1], "questions_expected": expected, "questions_found": per_term[key]}
            )
    sub = Dataset(picked, topics, {})
    sub.counts = sub.tallies()
    return sub, shortfall


def check_dataset(questions: Iterable[Question]) -> list[str]:
    """Read-back gate: ids of questions whose text lost one of its terms."""
    return [q.id for q in questions if not both_terms_present(q.text, q.term_a.phrase, q.term_b.phrase)]
