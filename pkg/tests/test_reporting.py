import csv
import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_pairs
from termbench.errors import DataError
from termbench.evalengine import (
    HALLUCINATION,
    IRRELEVANT,
    LABELS,
    VALID,
    AnswerEvaluation,
    TermEvaluation,
    answer_label,
    hypoterm_score,
    term_label,
)
from termbench.questions import assemble_dataset
from termbench.reporting import (
    answer_shares,
    check_outcomes,
    confusion_matrix,
    confusion_report,
    distribution_report,
    read_human_labels,
    score_summary,
)
from termbench.synthetic import SyntheticChat


@pytest.fixture(scope="module")
def questions():
    ds = assemble_dataset(make_pairs(n_topics=1, n_terms=2), SyntheticChat(drop_term_every=0))
    return ds.questions


def term_eval(phrase, kind, present, acceptance=None, meaning_ok=None):
    label = term_label(present, kind, acceptance, meaning_ok)
    return TermEvaluation(phrase, kind, present, acceptance, meaning_ok, label)


def evaluation(q, outcomes):
    tes = [term_eval(t.phrase, t.kind, *o) for t, o in zip(q.terms, outcomes)]
    return AnswerEvaluation(q.id, "m", "judge", tes, answer_label(tes[0].label, tes[1].label))


def test_all_valid_is_degenerate_100(questions):
    evs = [evaluation(q, [(True, "accept", True) if t.kind == "valid" else (True, "refuse") for t in q.terms]) for q in questions]
    dists = distribution_report(evs, {q.id: q for q in questions})
    for d in dists.values():
        for group, pct in d.percentages.items():
            assert pct[VALID] == 100.0, (d.grouping, group)
    shares = answer_shares(evs, {q.id: q for q in questions})
    assert shares["hypothetical"]["percent"][VALID] == 100.0
    assert hypoterm_score(evs, {q.id: q.kind for q in questions}).hts == 100.0


def test_hand_tally_of_ten(questions):
    hyp = [q for q in questions if q.kind == "hypothetical"][:4]
    val = [q for q in questions if q.kind == "valid"][:6]

    def outcome_for(q, hyp_outcome, valid_outcome):
        return [hyp_outcome if t.kind == "hypothetical" else valid_outcome for t in q.terms]

    ok = (True, "accept", True)
    evs = [
        evaluation(hyp[0], outcome_for(hyp[0], (True, "refuse"), ok)),  # v v -> v
        evaluation(hyp[1], outcome_for(hyp[1], (True, "accept"), ok)),  # h v -> h
        evaluation(hyp[2], outcome_for(hyp[2], (False,), ok)),  # i v -> i
        evaluation(hyp[3], outcome_for(hyp[3], (True, "unknown"), (True, "refuse"))),  # v h -> h
        evaluation(val[0], [ok, ok]),
        evaluation(val[1], [ok, (True, "accept", False)]),
        evaluation(val[2], [ok, (True, "unknown")]),
        evaluation(val[3], [(False,), (False,)]),
        evaluation(val[4], [(True, "refuse"), (False,)]),
        evaluation(val[5], [ok, ok]),
    ]
    by_id = {q.id: q for q in questions}
    shares = answer_shares(evs, by_id)
    assert shares["hypothetical"]["counts"] == {VALID: 1, HALLUCINATION: 2, IRRELEVANT: 1}
    assert shares["valid"]["counts"] == {VALID: 2, HALLUCINATION: 2, IRRELEVANT: 2}

    dists = distribution_report(evs, by_id)
    tt = dists["term_type"].counts
    assert tt["hypothetical"] == {VALID: 2, HALLUCINATION: 1, IRRELEVANT: 1}
    # 4 valid terms from hypothetical questions plus 12 from valid questions
    assert tt["valid"] == {VALID: 9, HALLUCINATION: 3, IRRELEVANT: 4}
    assert sum(sum(c.values()) for c in dists["valid_term_source"].counts.values()) == 16

    et = dists["evaluation_type"].counts
    assert et["inclusion"] == {VALID: 16, HALLUCINATION: 0, IRRELEVANT: 4}
    assert et["acceptance"] == {VALID: 12, HALLUCINATION: 3, IRRELEVANT: 1}
    assert et["meaning"] == {VALID: 9, HALLUCINATION: 1, IRRELEVANT: 0}
    assert dists["term_type"].percentages["hypothetical"][VALID] == 50.0


def test_check_outcomes_follow_the_order():
    assert check_outcomes(term_eval("x", "valid", False)) == [("inclusion", IRRELEVANT)]
    assert check_outcomes(term_eval("x", "hypothetical", True, "accept")) == [
        ("inclusion", VALID),
        ("acceptance", HALLUCINATION),
    ]
    assert [c for c, _ in check_outcomes(term_eval("x", "valid", True, "accept", False))] == [
        "inclusion",
        "acceptance",
        "meaning",
    ]


def test_failed_evaluations_are_left_out(questions):
    q = questions[0]
    failed = AnswerEvaluation(q.id, "m", "j", [], None, "evaluation_failed")
    assert distribution_report([failed], {q.id: q})["term_type"].counts == {}
    assert answer_shares([failed], {q.id: q}) == {}


def test_six_disagreements_in_ninety():
    ids = [f"q{i}" for i in range(90)]
    human = {qid: LABELS[i % 3] for i, qid in enumerate(ids)}
    agent = dict(human)
    for qid in ids[:6]:
        agent[qid] = LABELS[(LABELS.index(human[qid]) + 1) % 3]
    cm = confusion_matrix(human, agent)
    assert cm.total == 90
    assert round(cm.error_rate, 2) == 6.67


def test_identical_labels_give_zero_error():
    labels = {f"q{i}": LABELS[i % 3] for i in range(30)}
    cm = confusion_matrix(labels, labels)
    assert cm.error_rate == 0.0
    assert [cm.counts[i][i] for i in range(3)] == [10, 10, 10]


@given(st.lists(st.tuples(st.sampled_from(LABELS), st.sampled_from(LABELS)), min_size=1, max_size=200))
def test_confusion_matches_tally(pairs):
    human = {f"q{i}": h for i, (h, _) in enumerate(pairs)}
    agent = {f"q{i}": a for i, (_, a) in enumerate(pairs)}
    cm = confusion_matrix(human, agent)
    for i, h in enumerate(LABELS):
        assert sum(cm.counts[i]) == sum(1 for x, _ in pairs if x == h)
        for j, a in enumerate(LABELS):
            assert cm.counts[i][j] == pairs.count((h, a))
    for j, a in enumerate(LABELS):
        assert sum(row[j] for row in cm.counts) == sum(1 for _, y in pairs if y == a)
    off = sum(1 for h, a in pairs if h != a)
    assert cm.error_rate == pytest.approx(100.0 * off / len(pairs))


def test_human_label_file(tmp_path, questions):
    rng = random.Random(3)
    evs = [evaluation(q, [(True, "accept", True) if t.kind == "valid" else (True, "refuse") for t in q.terms]) for q in questions[:12]]
    path = tmp_path / "human.jsonl"
    with open(path, "w") as fh:
        for e in evs:
            fh.write(json.dumps({"question_id": e.question_id, "label": rng.choice(LABELS)}) + "\n")
        fh.write(json.dumps({"question_id": "x", "label": "maybe"}) + "\n")
        fh.write("garbage\n")
    labels, rejects = read_human_labels(path)
    assert len(labels) == 12 and [r["line"] for r in rejects] == [13, 14]
    cm = confusion_report(evs, path)
    assert cm.total == 12
    assert sum(cm.counts[i][0] for i in range(3)) == 12  # agent said valid everywhere


def entry(model, evs, qs):
    by_id = {q.id: q for q in qs}
    score = hypoterm_score(evs, {q.id: q.kind for q in qs})
    return {
        "model_id": model,
        "evaluator_id": "judge",
        "score": score.__dict__,
        "shares": answer_shares(evs, by_id),
        "distribution": distribution_report(evs, by_id),
        "coverage": {"questions": len(qs)},
    }


def test_score_summary_two_models(tmp_path, questions):
    ok = [evaluation(q, [(True, "accept", True) if t.kind == "valid" else (True, "refuse") for t in q.terms]) for q in questions]
    bad = [evaluation(q, [(True, "accept", True) if t.kind == "valid" else (True, "accept") for t in q.terms]) for q in questions]
    cm = confusion_matrix({e.question_id: e.label for e in ok}, {e.question_id: e.label for e in bad})
    payload = score_summary([entry("m-good", ok, questions), entry("m-bad", bad, questions)], tmp_path, cm)
    assert [m["score"]["hts"] for m in payload["models"]] == [100.0, 0.0]
    for name in ("report.json", "report.txt", "shares.csv", "distribution.csv", "confusion.json"):
        assert (tmp_path / name).exists()
    text = (tmp_path / "report.txt").read_text()
    assert "m-good" in text and "m-bad" in text and "100.0" in text
    rows = list(csv.DictReader(open(tmp_path / "shares.csv")))
    assert {r["model_id"] for r in rows} == {"m-good", "m-bad"}
    assert all(r["percent"].count(".") == 1 and len(r["percent"].split(".")[1]) == 1 for r in rows)


def test_empty_summary_is_an_error(tmp_path):
    with pytest.raises(DataError):
        score_summary([], tmp_path)
