"""Acceptance checks, one per criterion, each reporting a PASS/FAIL line.

Lines are collected in ``RESULTS`` and printed in the terminal summary (see
``conftest.py``), so they appear in plain ``pytest`` output too. Run this
file directly with ``python tests/test_acceptance.py`` for just the lines.
"""

import filecmp
import functools
import os
import random
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import make_pairs, topics_of  # noqa: E402
from test_textnorm import CASES as MATCH_CASES  # noqa: E402
from termbench import cli  # noqa: E402
from termbench.benchgen import TermPair  # noqa: E402
from termbench.corpus import Corpus, ingest_dump  # noqa: E402
from termbench.errors import UndefinedScoreError  # noqa: E402
from termbench.evalengine import (  # noqa: E402
    HALLUCINATION,
    IRRELEVANT,
    LABELS,
    VALID,
    AnswerEvaluation,
    answer_label,
    hypoterm_score,
    term_label,
)
from termbench.fixtures import write_synthetic_dump  # noqa: E402
from termbench.jsonl import read_json  # noqa: E402
from termbench.providers import MockEmbedder  # noqa: E402
from termbench.questions import assemble_dataset, sample_subset  # noqa: E402
from termbench.reporting import REFERENCE, confusion_matrix  # noqa: E402
from termbench.synthetic import SyntheticChat  # noqa: E402
from termbench.textnorm import contains_term, replace_term  # noqa: E402
from termbench.vectorindex import build_index, knn_vector  # noqa: E402

RESULTS: list[str] = []


class Skip(Exception):
    pass


def criterion(name, budget_s):
    """Wrap a check so it records one line and fails on error or overrun."""

    def wrap(fn):
        @functools.wraps(fn)
        def test(*args, **kwargs):
            start = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except Skip as exc:
                RESULTS.append(f"SKIP {name}: {exc}")
                pytest.skip(str(exc))
            except Exception as exc:
                RESULTS.append(f"FAIL {name}: {type(exc).__name__}: {exc}")
                raise
            elapsed = time.perf_counter() - start
            if elapsed > budget_s:
                RESULTS.append(f"FAIL {name}: took {elapsed:.1f}s, budget {budget_s}s")
                pytest.fail(f"{name} took {elapsed:.1f}s")
            RESULTS.append(f"PASS {name}: {detail} ({elapsed:.2f}s)")

        return test

    return wrap


# label calculus

H, V, I = HALLUCINATION, VALID, IRRELEVANT
CASE_TABLE = {
    (False, "valid", None, None): I,
    (False, "hypothetical", None, None): I,
    (True, "valid", "unknown", None): I,
    (True, "valid", "refuse", None): H,
    (True, "valid", "accept", False): H,
    (True, "valid", "accept", True): V,
    (True, "hypothetical", "accept", None): H,
    (True, "hypothetical", "refuse", None): V,
    (True, "hypothetical", "unknown", None): V,
}
ANSWER_TABLE = {
    (V, V): V, (V, H): H, (V, I): I,
    (H, V): H, (H, H): H, (H, I): H,
    (I, V): I, (I, H): H, (I, I): I,
}


@criterion("label calculus", 1)
def test_label_calculus():
    for args, want in CASE_TABLE.items():
        assert term_label(*args) == want, args
    for (a, b), want in ANSWER_TABLE.items():
        assert answer_label(a, b) == want, (a, b)
    return f"{len(CASE_TABLE)} term cases, {len(ANSWER_TABLE)} answer pairs"


# string matching

REPLACE_IN = (
    "How does the concept of publicity relate to the phenomenon of information cascade flux "
    "in the context of news and current events?"
)
REPLACE_OUT = (
    "How does the concept of publicity relate to the phenomenon of Reputation "
    "in the context of news and current events?"
)


@criterion("string-match suite", 1)
def test_string_match_suite():
    stages = Counter()
    for text, sub, stage in MATCH_CASES:
        report = contains_term(text, sub)
        assert bool(report) is (stage is not None), (text, sub)
        if stage:
            assert report.stage == stage, (text, sub, report.stage)
            stages[stage] += 1
    assert len(MATCH_CASES) >= 20 and set(stages) == {"raw", "bracket_stripped", "punct_stripped"}
    assert replace_term(REPLACE_IN, "Information Cascade Flux", "Reputation").encode() == REPLACE_OUT.encode()
    return f"{len(MATCH_CASES)} cases over stages {dict(stages)}, replacement sample byte-exact"


# dataset arithmetic


def _failing_chat(pairs, hyp_fail, valid_fail):
    from termbench import prompts
    from termbench.providers import ScriptedChat

    base = SyntheticChat(drop_term_every=0)
    hyp_bad = {p.valid.phrase for p in hyp_fail}
    valid_bad = {p.substitute.phrase for p in valid_fail}

    def reply(req):
        first = req.user_turns[0]
        if req.system_prompt == prompts.HYPOTHETICAL_QUESTION_SYSTEM and any(f"REAL TERM => {v}:" in first for v in hyp_bad):
            return "A question without its terms?"
        if req.system_prompt == prompts.VALID_QUESTION_SYSTEM and any(f"MAIN TERM => {v}:" in first for v in valid_bad):
            return "A question without its terms?"
        return base.chat(req)

    return ScriptedChat(reply)


@criterion("dataset arithmetic", 10)
def test_dataset_arithmetic():
    rng = random.Random(11)
    checked = []
    for n_topics, n_terms in ((1, 3), (2, 3), (3, 2)):
        pairs = make_pairs(n_topics=n_topics, n_terms=n_terms)
        n = n_topics * n_terms
        # duplicates: the last pair of each of the first terms repeats that term's first pair
        n_dup = rng.randint(1, n - 1)
        for k in range(n_dup):
            src, v = pairs[k * 9], pairs[k * 9 + 8]
            pairs[k * 9 + 8] = TermPair(v.pair_id, src.hypothetical, src.valid, src.substitute, v.source, v.rank)
        d = 3 * n_dup
        # failures come from the last term, which is never a duplicate
        picks = rng.sample(range(len(pairs) - 8, len(pairs)), 3)
        hyp_fail = [pairs[picks[0]]]
        valid_fail = [pairs[i] for i in picks[1:]]
        f = 3 * len(hyp_fail) + len(valid_fail)
        ds = assemble_dataset(pairs, _failing_chat(pairs, hyp_fail, valid_fail))
        assert ds.counts["duplicates"] == d and ds.counts["failures"] == f, (ds.counts, d, f)
        assert ds.counts["final"] == len(ds.questions) == 27 * n - d - f
        checked.append(f"n={n} d={d} f={f}")
    # published instance: 784 terms, 459 duplicates, 1201 failed candidates
    assert 27 * 784 - 459 - 1201 == 19508
    return "; ".join(checked) + "; 27*784-459-1201 = 19508"


# subsets and kind balance


_DATASET = {}


def _clean_dataset():
    if "ds" not in _DATASET:
        pairs = make_pairs(n_topics=20, n_terms=6)
        _DATASET["ds"] = assemble_dataset(pairs, SyntheticChat(drop_term_every=0), topics=topics_of(pairs))
    return _DATASET["ds"]


@criterion("subset cardinality", 10)
def test_subset_cardinality():
    ds = _clean_dataset()
    q1080, short1 = sample_subset(ds, "q1080")
    q180, short2 = sample_subset(ds, "q180")
    ids1080 = {q.id for q in q1080.questions}
    ids180 = {q.id for q in q180.questions}
    assert len(q1080.questions) == 1080 and len(q180.questions) == 180
    assert not short1 and not short2 and ids180 <= ids1080
    return "q1080 = 1080, q180 = 180, q180 within q1080"


@criterion("kind balance", 10)
def test_kind_balance():
    ds = _clean_dataset()
    kinds = Counter(q.kind for q in ds.questions)
    assert ds.counts["failures"] == 0 and ds.counts["duplicates"] == 0
    assert 3 * kinds["hypothetical"] == len(ds.questions)
    return f"{kinds['hypothetical']} of {len(ds.questions)} questions hypothetical"


# kNN oracle


def _brute_force(vectors, ids, query, k):
    rows = []
    for vec, pid in zip(vectors.tolist(), ids):
        rows.append((sum((a - b) ** 2 for a, b in zip(vec, query)) ** 0.5, str(pid)))
    rows.sort()
    return rows[:k]


@criterion("kNN oracle equivalence", 30)
def test_knn_oracle(tmp_path):
    corpora = 0
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        n_pages = int(rng.integers(50, 1001))
        d = tmp_path / f"c{seed}"
        write_synthetic_dump(d / "dump.jsonl", n_pages=n_pages, seed=seed, noisy=False)
        ingest_dump(d / "dump.jsonl", d / "store")
        corpus = Corpus(d / "store")
        emb = MockEmbedder(dimension=16, seed=seed)
        for kind in ("title", "definition"):
            index = build_index(corpus, kind, emb)
            vectors = np.asarray(index.vectors, dtype=np.float64)
            for text in ("quiet signal", corpus.titles()[int(rng.integers(len(corpus)))]):
                q = emb.embed([text])[0]
                for k in (1, 10, 50):
                    got = [n.page_id for n in knn_vector(index, q, k)]
                    want = [pid for _, pid in _brute_force(vectors, list(index.page_ids), np.asarray(q, dtype=np.float64).tolist(), k)]
                    assert got == want, (seed, kind, text, k)
        corpora += 1
    # exact ties
    vectors = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=np.float32)
    from termbench.vectorindex import VectorIndex

    tied = VectorIndex("title", ["d", "b", "c", "a"], vectors)
    assert [n.page_id for n in knn_vector(tied, np.zeros(2), 4)] == ["a", "b", "c", "d"]
    return f"{corpora} corpora x 2 indexes x 6 queries match the brute-force scan, ties by page id"


# score arithmetic


def _ev(qid, label):
    return AnswerEvaluation(qid, "m", "e", [], label)


@criterion("score arithmetic", 1)
def test_score_arithmetic():
    rng = random.Random(5)
    sets = 0
    for _ in range(200):
        n = rng.randint(1, 300)
        rows = [(rng.choice(["hypothetical", "valid"]), rng.choice(LABELS)) for _ in range(n)]
        kinds = {f"q{i}": k for i, (k, _) in enumerate(rows)}
        evals = [_ev(f"q{i}", lab) for i, (_, lab) in enumerate(rows)]
        hyp = [lab for k, lab in rows if k == "hypothetical"]
        if not hyp:
            with pytest.raises(UndefinedScoreError):
                hypoterm_score(evals, kinds)
            continue
        s = hypoterm_score(evals, kinds)
        assert s.numerator == hyp.count(V) and s.denominator == len(hyp)
        assert s.hts == 100.0 * hyp.count(V) / len(hyp)
        assert abs(s.hts + s.error_rate - 100.0) <= 1e-9
        sets += 1
    return f"{sets} random sets equal the recount"


# end-to-end determinism

PIPELINE = [
    ["corpus-ingest"],
    ["index-build"],
    ["gen-topics"],
    ["gen-terms"],
    ["validate-terms"],
    ["retrieve-valid"],
    ["compose"],
    ["sample", "--level", "q180"],
    ["respond", "--model", "mock-model", "--level", "q180"],
    ["evaluate", "--model", "mock-model"],
    ["report"],
]


def _files(root):
    return sorted(str(p.relative_to(root)) for p in root.rglob("*") if p.is_file() and "cache" not in p.relative_to(root).parts)


@criterion("end-to-end determinism", 60)
def test_end_to_end_determinism(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("terms_per_topic: 7\n")
    for name in ("a", "b"):
        for argv in PIPELINE:
            code = cli.main([*argv, "--mock", "--config", str(cfg), "--run-dir", str(tmp_path / name)])
            assert code == 0, (name, argv)
    a, b = tmp_path / "a", tmp_path / "b"
    files = _files(a)
    assert files == _files(b) and "report/report.json" in files
    _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    assert not mismatch and not errors, mismatch
    hts = read_json(a / "report" / "report.json")["models"][0]["score"]["hts"]
    return f"{len(files)} artifacts byte-identical across two runs, mock HTS {hts:.1f}%"


# confusion matrix


@criterion("confusion-matrix oracle", 1)
def test_confusion_oracle():
    rng = random.Random(9)
    for _ in range(100):
        n = rng.randint(1, 200)
        human = {f"q{i}": rng.choice(LABELS) for i in range(n)}
        agent = {f"q{i}": rng.choice(LABELS) for i in range(n)}
        cm = confusion_matrix(human, agent)
        tally = Counter((human[q], agent[q]) for q in human)
        for i, h in enumerate(LABELS):
            for j, a in enumerate(LABELS):
                assert cm.counts[i][j] == tally[(h, a)]
        assert cm.error_rate == pytest.approx(100.0 * sum(1 for q in human if human[q] != agent[q]) / n)
    same = {f"q{i}": LABELS[i % 3] for i in range(90)}
    assert confusion_matrix(same, same).error_rate == 0.0
    return "100 random label sets match the tally, identity gives 0% error"


# live run (reference only)


@criterion("live q180 run (reference-only)", 3600)
def test_live_q180():
    report_path = os.environ.get("TERMBENCH_LIVE_REPORT")
    if not report_path:
        raise Skip(
            "no live providers in this environment; run scripts/live_q180.py and set TERMBENCH_LIVE_REPORT. "
            f"References: {REFERENCE}"
        )
    report = read_json(report_path)
    scores = {m["model_id"]: m["score"]["hts"] for m in report["models"]}
    assert scores and all(0.0 <= v <= 100.0 for v in scores.values())
    return f"HTS {scores}; references {report['reference']}"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
