"""Topics, made-up terms, web validation, similar valid terms and term pairs."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from termbench import prompts
from termbench.errors import ParseError, RateLimitError
from termbench.jsonl import append_jsonl, iter_jsonl
from termbench.parsing import parse_list, parse_numbered_items
from termbench.providers.base import ChatRequest, digest_of
from termbench.textnorm import full_normalize
from termbench.vectorindex import knn

log = logging.getLogger(__name__)

SOURCES = ("llm_suggestion", "title_sim", "text_sim")
TOPIC_COUNT = 20


@dataclass(frozen=True)
class Topic:
    name: str
    explanation: str
    index: int

    def __post_init__(self) -> None:
        if not self.explanation.strip():
            raise ValueError(f"topic {self.name!r} has no explanation")

    @property
    def line(self) -> str:
        return prompts.topic_line(self.name, self.explanation)

    @classmethod
    def from_dict(cls, d: dict) -> "Topic":
        return cls(d["name"], d["explanation"], d["index"])


@dataclass
class HypotheticalTerm:
    phrase: str
    made_up_definition: str
    topic: Topic
    position: int  # 1-based order of generation within the topic
    web_validated: bool = False
    total_results: int | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def line(self) -> str:
        return f"{self.phrase}: {self.made_up_definition}"

    @classmethod
    def from_dict(cls, d: dict) -> "HypotheticalTerm":
        return cls(
            phrase=d["phrase"],
            made_up_definition=d["made_up_definition"],
            topic=Topic.from_dict(d["topic"]),
            position=d["position"],
            web_validated=d.get("web_validated", False),
            total_results=d.get("total_results"),
            flags=list(d.get("flags", [])),
        )


@dataclass(frozen=True)
class ValidTerm:
    phrase: str
    definition: str
    source: str
    similarity_rank: int
    page_id: str
    distance: float | None = None

    @property
    def line(self) -> str:
        return f"{self.phrase}: {self.definition}"

    @classmethod
    def from_dict(cls, d: dict) -> "ValidTerm":
        return cls(d["phrase"], d["definition"], d["source"], d["similarity_rank"], d["page_id"], d.get("distance"))


@dataclass
class TermPair:
    """A made-up term joined with one similar valid term.

    ``substitute`` is the same source's term ``per_source`` ranks further
    down; it is the main term of the valid question and the replacement for
    the made-up term in the replaced question.
    """

    pair_id: str
    hypothetical: HypotheticalTerm
    valid: ValidTerm
    substitute: ValidTerm
    source: str
    rank: int
    duplicate_sources: list[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, d: dict) -> "TermPair":
        return cls(
            pair_id=d["pair_id"],
            hypothetical=HypotheticalTerm.from_dict(d["hypothetical"]),
            valid=ValidTerm.from_dict(d["valid"]),
            substitute=ValidTerm.from_dict(d["substitute"]),
            source=d["source"],
            rank=d["rank"],
            duplicate_sources=list(d.get("duplicate_sources", [])),
        )


@dataclass
class TermGates:
    """Local filters on generated phrases.

    Modes are ``"drop"`` (reject the term) or ``"warn"`` (keep it, add a flag).
    """

    forbidden_words: tuple[str, ...] = tuple(w for w in prompts.FORBIDDEN_WORDS if w != "-")
    forbidden_mode: str = "drop"
    hyphen_mode: str = "warn"
    min_words: int = 4
    word_count_mode: str = "warn"

    def check(self, phrase: str) -> tuple[bool, list[str]]:
        keep = True
        flags: list[str] = []
        tokens = {t.lower() for t in re.findall(r"[^\W_]+", phrase)}
        banned = sorted(tokens & {w.lower() for w in self.forbidden_words})
        if banned:
            flags.append("forbidden:" + ",".join(banned))
            keep &= self.forbidden_mode != "drop"
        if "-" in phrase:
            flags.append("hyphen")
            keep &= self.hyphen_mode != "drop"
        if len(phrase.split()) < self.min_words:
            flags.append(f"words<{self.min_words}")
            keep &= self.word_count_mode != "drop"
        return keep, flags


def parse_topics(text: str) -> list[Topic]:
    topics = []
    seen = set()
    for number, label, expl in parse_numbered_items(text):
        if not expl or number in seen:
            continue
        seen.add(number)
        topics.append(Topic(name=label, explanation=expl, index=len(topics) + 1))
    return topics


def generate_topics(chat, model_id: str = "", count: int = TOPIC_COUNT, attempts: int = 3) -> list[Topic]:
    """Ask for the ``count`` most popular internet topics with explanations.

    A short list triggers a corrective follow-up, up to ``attempts`` replies
    in total. Raises :class:`ParseError` carrying the last raw reply.
    """
    req = ChatRequest(prompts.ONLINE_EXPERT_SYSTEM, (prompts.topics_user(count),), temperature=1.0, model_id=model_id)
    reply = ""
    for attempt in range(attempts):
        reply = chat.chat(req)
        topics = parse_topics(reply)
        if len(topics) >= count:
            return topics[:count]
        log.warning("topic list had %d/%d items (attempt %d)", len(topics), count, attempt + 1)
        req = req.follow_up(reply, prompts.TOPICS_RETRY_USER.format(count=count))
    raise ParseError(f"fewer than {count} topics after {attempts} attempts", raw=reply)


def _term_names(text: str) -> list[str]:
    items = parse_numbered_items(text)
    if items:
        return [label for _, label, _ in items]
    return [p.split(":", 1)[0].strip() for p in parse_list(text)]


def generate_hypothetical_terms(
    topic: Topic,
    chat,
    model_id: str = "",
    count: int = 50,
    gates: TermGates | None = None,
    attempts: int = 2,
) -> list[HypotheticalTerm]:
    """Made-up terms for one topic, each with an invented explanation.

    Two-turn exchange: the term list, then explanations for every term.
    Terms failing a gate in ``drop`` mode, or left without an explanation,
    are discarded.
    """
    gates = gates or TermGates()
    req = ChatRequest(
        prompts.ONLINE_EXPERT_SYSTEM,
        (prompts.terms_user(topic.line, count),),
        temperature=1.0,
        model_id=model_id,
    )
    names: list[str] = []
    reply = ""
    for _ in range(attempts):
        reply = chat.chat(req)
        try:
            names = _term_names(reply)
        except ParseError:
            names = []
        if names:
            break
        req = req.follow_up(reply, prompts.TERMS_RETRY_USER.format(count=count))
    if not names:
        raise ParseError(f"no term list for topic {topic.name!r}", raw=reply)

    explained = chat.chat(req.follow_up(reply, prompts.EXPLANATIONS_USER))
    by_name: dict[str, str] = {}
    by_number: dict[int, str] = {}
    for number, label, expl in parse_numbered_items(explained):
        if expl:
            by_name.setdefault(full_normalize(label), expl)
            by_number.setdefault(number, expl)

    terms = []
    seen = set()
    for position, name in enumerate(names[:count], start=1):
        norm = full_normalize(name) if name.strip() else ""
        if not norm or norm in seen:
            continue
        seen.add(norm)
        expl = by_name.get(norm) or by_number.get(position)
        if not expl:
            log.info("dropping %r: no explanation", name)
            continue
        keep, flags = gates.check(name)
        if flags:
            log.info("term %r flagged %s", name, flags)
        if keep:
            terms.append(HypotheticalTerm(name, expl, topic, position, flags=flags))
    return terms


def validate_nonexistence(
    terms: Sequence[HypotheticalTerm],
    search,
    checkpoint: str | Path | None = None,
) -> list[HypotheticalTerm]:
    """Keep only terms whose quoted web search reports zero results.

    With ``checkpoint``, every search outcome is appended as it arrives; on
    :class:`RateLimitError` the error propagates and a later call with the
    same checkpoint skips phrases already searched.
    """
    done: dict[str, int] = {}
    if checkpoint and Path(checkpoint).exists():
        for row in iter_jsonl(checkpoint):
            done[row["phrase"]] = row["total_results"]
    kept = []
    for term in terms:
        total = done.get(term.phrase)
        if total is None:
            try:
                total = search.web_search_exact(term.phrase).total_results
            except RateLimitError:
                log.warning("search quota hit after %d/%d terms; resume later", len(done), len(terms))
                raise
            done[term.phrase] = total
            if checkpoint:
                append_jsonl(checkpoint, {"phrase": term.phrase, "total_results": total})
        if total == 0:
            kept.append(
                HypotheticalTerm(
                    term.phrase, term.made_up_definition, term.topic, term.position, True, 0, list(term.flags)
                )
            )
    log.info("web validation kept %d of %d terms (%d excluded)", len(kept), len(terms), len(terms) - len(kept))
    return kept


def _valid_terms(term: HypotheticalTerm, pages: Iterable, source: str, distances=None) -> list[ValidTerm]:
    own = full_normalize(term.phrase)
    out: list[ValidTerm] = []
    seen = set()
    for i, page in enumerate(pages):
        if page.page_id in seen or full_normalize(page.title) == own:
            continue
        seen.add(page.page_id)
        dist = None if distances is None else distances[i]
        out.append(ValidTerm(page.title, page.definition, source, len(out) + 1, page.page_id, dist))
    return out


def retrieve_llm_suggestions(
    term: HypotheticalTerm,
    chat,
    corpus,
    model_id: str = "",
    count: int = 50,
) -> list[ValidTerm]:
    """Similar real terms suggested by the model, kept only if they are exact
    corpus titles. Survivors keep the model's order as their rank."""
    req = ChatRequest(
        prompts.suggestions_system(count),
        (prompts.SUGGESTIONS_USER.format(topic=term.topic.line, term=term.line),),
        temperature=0.0,
        model_id=model_id,
    )
    reply = chat.chat(req)
    try:
        items = parse_list(reply)
    except ParseError:
        try:
            items = parse_list(chat.chat(req.follow_up(reply, prompts.LIST_RETRY_USER)))
        except ParseError:
            log.warning("no parseable suggestion list for %r; skipping", term.phrase)
            return []
    pages = [p for p in (corpus.lookup_exact_title(i) for i in items) if p is not None]
    return _valid_terms(term, pages, "llm_suggestion")


def _similar(term, query: str, index, corpus, embedder, k: int, source: str) -> list[ValidTerm]:
    neighbors = knn(index, query, min(k, len(index)), embedder)
    pages = [corpus.get(n.page_id) for n in neighbors]
    return _valid_terms(term, pages, source, [n.distance for n in neighbors])


def retrieve_title_similar(term: HypotheticalTerm, index_title, corpus, embedder, k: int = 50) -> list[ValidTerm]:
    return _similar(term, term.phrase, index_title, corpus, embedder, k, "title_sim")


def retrieve_text_similar(term: HypotheticalTerm, index_definition, corpus, embedder, k: int = 50) -> list[ValidTerm]:
    return _similar(term, term.made_up_definition, index_definition, corpus, embedder, k, "text_sim")


def pair_id_for(term: HypotheticalTerm, valid: ValidTerm, source: str, rank: int) -> str:
    return digest_of(
        {
            "topic": term.topic.index,
            "hypothetical": term.phrase,
            "source": source,
            "rank": rank,
            "page_id": valid.page_id,
        }
    )[:16]


def assemble_term_pairs(
    term: HypotheticalTerm,
    suggestions: Sequence[ValidTerm],
    title_hits: Sequence[ValidTerm],
    text_hits: Sequence[ValidTerm],
    per_source: int = 3,
) -> list[TermPair]:
    """Top ``per_source`` terms of each source, each paired with the made-up
    term and given the term ``per_source`` ranks below it as substitute.

    Every source needs ``2 * per_source`` terms; otherwise the made-up term
    is dropped and an empty list returned. A page chosen by two sources keeps
    both pairs, each listing the other source in ``duplicate_sources``.
    """
    lists = dict(zip(SOURCES, (suggestions, title_hits, text_hits)))
    short = {s: len(v) for s, v in lists.items() if len(v) < 2 * per_source}
    if short:
        log.info("dropping %r: too few similar terms %s", term.phrase, short)
        return []
    chosen = {s: {v.page_id for v in lists[s][:per_source]} for s in SOURCES}
    pairs = []
    for source in SOURCES:
        ranked = lists[source]
        for r in range(per_source):
            valid, substitute = ranked[r], ranked[r + per_source]
            dups = [s for s in SOURCES if s != source and valid.page_id in chosen[s]]
            pairs.append(
                TermPair(pair_id_for(term, valid, source, r + 1), term, valid, substitute, source, r + 1, dups)
            )
    return pairs
