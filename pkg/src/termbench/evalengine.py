"""Term-level checks, term and answer labels, and the benchmark score.

For each of the two terms of a question the answer goes through up to three
checks: inclusion (is the term in the answer at all), acceptance (does the
answer treat it as real, unreal or unknown, judged by an evaluator agent) and,
for accepted valid terms only, meaning (is it used in its real sense). The
term label follows from those results; the answer label is the worse of the
two term labels.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from termbench import prompts
from termbench.errors import DataError, ParseError, UndefinedScoreError
from termbench.jsonl import append_jsonl, iter_jsonl
from termbench.parsing import extract_json_object
from termbench.providers.base import ChatRequest
from termbench.textnorm import contains_term

log = logging.getLogger(__name__)

VALID, HALLUCINATION, IRRELEVANT = "valid", "hallucination", "irrelevant"
LABELS = (VALID, HALLUCINATION, IRRELEVANT)
ACCEPTANCE = {"MENTIONED": "accept", "UNREAL": "refuse", "UNKNOWN": "unknown"}


class AgentFailure(Exception):
    """The evaluator agent gave no usable label, even after a reprompt."""

    def __init__(self, raw: list[str]) -> None:
        super().__init__("evaluator reply could not be parsed")
        self.raw = raw


@dataclass
class TermEvaluation:
    phrase: str
    kind: str
    present: bool
    acceptance: str | None = None
    meaning_ok: bool | None = None
    label: str | None = None
    evaluation_type: str | None = None  # inclusion | acceptance | meaning
    agent_raw: dict = field(default_factory=dict)
    status: str = "ok"  # ok | evaluation_failed

    @classmethod
    def from_dict(cls, d: dict) -> "TermEvaluation":
        return cls(**d)


@dataclass
class AnswerEvaluation:
    question_id: str
    model_id: str
    evaluator_id: str
    term_evals: list[TermEvaluation]
    label: str | None
    status: str = "ok"

    @classmethod
    def from_dict(cls, d: dict) -> "AnswerEvaluation":
        d = dict(d)
        d["term_evals"] = [TermEvaluation.from_dict(t) for t in d["term_evals"]]
        return cls(**d)


@dataclass(frozen=True)
class Score:
    hts: float
    error_rate: float
    denominator: int
    numerator: int


def term_label(present: bool, kind: str, acceptance: str | None = None, meaning_ok: bool | None = None) -> str:
    if not present:
        return IRRELEVANT
    if acceptance not in ("accept", "refuse", "unknown"):
        raise ValueError(f"acceptance required for a present term, got {acceptance!r}")
    if kind == "hypothetical":
        return HALLUCINATION if acceptance == "accept" else VALID
    if kind != "valid":
        raise ValueError(f"unknown term kind {kind!r}")
    if acceptance == "unknown":
        return IRRELEVANT
    if acceptance == "refuse":
        return HALLUCINATION
    if meaning_ok is None:
        raise ValueError("meaning result required for an accepted valid term")
    return VALID if meaning_ok else HALLUCINATION


def answer_label(first: str, second: str) -> str:
    pair = (first, second)
    if HALLUCINATION in pair:
        return HALLUCINATION
    if IRRELEVANT in pair:
        return IRRELEVANT
    return VALID


def evaluation_type(present: bool, kind: str, acceptance: str | None) -> str:
    """Which check decided the term label."""
    if not present:
        return "inclusion"
    if kind == "valid" and acceptance == "accept":
        return "meaning"
    return "acceptance"


def inclusion_check(answer: str, phrase: str) -> bool:
    return bool(contains_term(answer, phrase))


def _ask_agent(agent, req: ChatRequest, key: str, parse) -> tuple[object, list[str]]:
    raw: list[str] = []
    for attempt in range(2):
        reply = agent.chat(req)
        raw.append(reply)
        try:
            value = parse(extract_json_object(reply).get(key))
        except (ParseError, ValueError):
            value = None
        if value is not None:
            return value, raw
        if attempt == 0:
            req = req.follow_up(reply, prompts.AGENT_RETRY_USER.format(field=key))
    raise AgentFailure(raw)


def _certainty(value) -> str | None:
    return ACCEPTANCE.get(str(value).strip().upper()) if value is not None else None


def _verified(value) -> bool | None:
    if isinstance(value, bool):
        return value
    text = str(value).strip().upper() if value is not None else ""
    return {"TRUE": True, "FALSE": False}.get(text)


def acceptance_check(answer: str, question: str, phrase: str, agent, evaluator_id: str = "") -> tuple[str, list[str]]:
    req = ChatRequest(
        prompts.ACCEPTANCE_SYSTEM,
        (prompts.acceptance_user(phrase, question, answer),),
        temperature=0.0,
        model_id=evaluator_id,
    )
    return _ask_agent(agent, req, "certainty", _certainty)


def meaning_check(
    answer: str, question: str, phrase: str, definition: str, agent, evaluator_id: str = ""
) -> tuple[bool, list[str]]:
    req = ChatRequest(
        prompts.MEANING_SYSTEM,
        (prompts.meaning_user(phrase, definition, question, answer),),
        temperature=0.0,
        model_id=evaluator_id,
    )
    return _ask_agent(agent, req, "verified", _verified)


def evaluate_term(answer: str, question: str, term, agent, evaluator_id: str = "") -> TermEvaluation:
    """Run the checks for one term; ``term`` has phrase, kind and definition."""
    ev = TermEvaluation(term.phrase, term.kind, inclusion_check(answer, term.phrase))
    if not ev.present:
        ev.label = IRRELEVANT
        ev.evaluation_type = "inclusion"
        return ev
    try:
        ev.acceptance, ev.agent_raw["acceptance"] = acceptance_check(answer, question, term.phrase, agent, evaluator_id)
        if term.kind == "valid" and ev.acceptance == "accept":
            ev.meaning_ok, ev.agent_raw["meaning"] = meaning_check(
                answer, question, term.phrase, term.definition, agent, evaluator_id
            )
    except AgentFailure as exc:
        ev.agent_raw["acceptance" if ev.acceptance is None else "meaning"] = exc.raw
        ev.status = "evaluation_failed"
        return ev
    ev.label = term_label(ev.present, ev.kind, ev.acceptance, ev.meaning_ok)
    ev.evaluation_type = evaluation_type(ev.present, ev.kind, ev.acceptance)
    return ev


def evaluate_answer(question, response, agent, evaluator_id: str = "") -> AnswerEvaluation:
    evals = [evaluate_term(response.text, question.text, t, agent, evaluator_id) for t in question.terms]
    if any(e.status != "ok" for e in evals):
        return AnswerEvaluation(question.id, response.model_id, evaluator_id, evals, None, "evaluation_failed")
    return AnswerEvaluation(question.id, response.model_id, evaluator_id, evals, answer_label(evals[0].label, evals[1].label))


def evaluate_all(
    questions: Sequence,
    responses: Sequence,
    agent,
    evaluator_id: str = "",
    parallelism: int = 1,
    checkpoint: str | Path | None = None,
) -> tuple[list[AnswerEvaluation], dict]:
    """Evaluate every answered question, in dataset order.

    Returns the evaluations and a coverage report. Questions without a
    response and answers whose evaluation failed are counted there and left
    out of scoring.
    """
    by_id = {r.question_id: r for r in responses}
    done: dict[str, AnswerEvaluation] = {}
    if checkpoint and Path(checkpoint).exists():
        for row in iter_jsonl(checkpoint):
            ev = AnswerEvaluation.from_dict(row)
            done[ev.question_id] = ev
    lock = threading.Lock()

    def run(q) -> AnswerEvaluation:
        if q.id in done:
            return done[q.id]
        ev = evaluate_answer(q, by_id[q.id], agent, evaluator_id)
        if checkpoint:
            with lock:
                append_jsonl(checkpoint, ev)
        return ev

    answered = [q for q in questions if q.id in by_id]
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        evaluations = list(pool.map(run, answered))
    failed = [e.question_id for e in evaluations if e.status != "ok"]
    coverage = {
        "questions": len(questions),
        "answered": len(answered),
        "no_response": len(questions) - len(answered),
        "evaluation_failed": len(failed),
        "evaluation_failed_ids": failed,
        "scored": len(evaluations) - len(failed),
    }
    return evaluations, coverage


def hypoterm_score(evaluations: Sequence[AnswerEvaluation], kinds: Mapping[str, str]) -> Score:
    """Share of valid answers among scored answers to hypothetical questions.

    ``kinds`` maps question id to question kind. Raises
    :class:`UndefinedScoreError` when no hypothetical question was scored.
    """
    scored = [e for e in evaluations if e.status == "ok" and e.label is not None]
    missing = [e.question_id for e in scored if e.question_id not in kinds]
    if missing:
        raise DataError(f"{len(missing)} evaluations refer to unknown questions, e.g. {missing[0]}")
    hyp = [e for e in scored if kinds[e.question_id] == "hypothetical"]
    if not hyp:
        raise UndefinedScoreError("no scored answers to hypothetical questions")
    valid = sum(1 for e in hyp if e.label == VALID)
    hts = 100.0 * valid / len(hyp)
    return Score(hts=hts, error_rate=100.0 - hts, denominator=len(hyp), numerator=valid)
