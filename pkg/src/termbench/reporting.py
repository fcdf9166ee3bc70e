"""Label distributions, answer-level shares, confusion matrices and report files.

Everything here is a pure function of stored evaluations. Percentages are
kept unrounded in JSON and rendered to one decimal in text and CSV; raw counts
travel alongside them.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from termbench.errors import DataError
from termbench.evalengine import HALLUCINATION, IRRELEVANT, LABELS, VALID, term_label
from termbench.jsonl import write_json

log = logging.getLogger(__name__)

GROUPINGS = ("term_type", "valid_term_source", "evaluation_type")

# Published figures for comparison only; never asserted.
REFERENCE = {
    "hts_full_set": {"gpt-3.5": 5.72, "llama2-70b": 5.64},
    "evaluator_error_rate": 6.66,
    "ui_model_hts_range": [1.0, 11.0],
}


def _pct(n: int, total: int) -> float:
    return 100.0 * n / total if total else 0.0


@dataclass
class LabelDistribution:
    grouping: str
    counts: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def percentages(self) -> dict[str, dict[str, float]]:
        out = {}
        for group, cells in self.counts.items():
            total = sum(cells.values())
            out[group] = {label: _pct(cells.get(label, 0), total) for label in LABELS}
        return out

    def rows(self) -> list[dict]:
        pct = self.percentages
        return [
            {"grouping": self.grouping, "group": g, "label": label, "count": self.counts[g].get(label, 0), "percent": pct[g][label]}
            for g in sorted(self.counts)
            for label in LABELS
        ]


def _scored(evaluations):
    return [e for e in evaluations if e.status == "ok" and e.label is not None]


def check_outcomes(te) -> list[tuple[str, str]]:
    """The label each check on its own gave a term, for every check it reached.

    Inclusion passes as valid and fails as irrelevant. Acceptance yields the
    case-table label, except that an accepted valid term counts as valid at
    this step. Meaning yields valid or hallucination.
    """
    if not te.present:
        return [("inclusion", IRRELEVANT)]
    out = [("inclusion", VALID)]
    if te.kind == "valid" and te.acceptance == "accept":
        out.append(("acceptance", VALID))
        out.append(("meaning", VALID if te.meaning_ok else HALLUCINATION))
    else:
        out.append(("acceptance", term_label(True, te.kind, te.acceptance)))
    return out


def distribution_report(evaluations: Sequence, questions: Mapping) -> dict[str, LabelDistribution]:
    """Term-level label counts grouped three ways.

    ``questions`` maps question id to question. Groups: term kind and source
    of valid terms (by final term label), and evaluation check (by the
    outcome of each check a term went through, see :func:`check_outcomes`).
    """
    dists = {g: LabelDistribution(g) for g in GROUPINGS}
    scored = _scored(evaluations)
    if not scored:
        log.warning("no scored evaluations; distribution report is empty")
        return dists

    def bump(grouping: str, group: str, label: str) -> None:
        cells = dists[grouping].counts.setdefault(group, {label: 0 for label in LABELS})
        cells[label] += 1

    for ev in scored:
        q = questions[ev.question_id]
        for term, te in zip(q.terms, ev.term_evals):
            bump("term_type", te.kind, te.label)
            if te.kind == "valid" and term.source:
                bump("valid_term_source", term.source, te.label)
            for check, outcome in check_outcomes(te):
                bump("evaluation_type", check, outcome)
    return dists


def answer_shares(evaluations: Sequence, questions: Mapping) -> dict[str, dict]:
    """Answer label counts and percentages per question kind."""
    counts: dict[str, Counter] = {}
    for ev in _scored(evaluations):
        counts.setdefault(questions[ev.question_id].kind, Counter())[ev.label] += 1
    out = {}
    for kind in sorted(counts):
        total = sum(counts[kind].values())
        out[kind] = {
            "total": total,
            "counts": {label: counts[kind][label] for label in LABELS},
            "percent": {label: _pct(counts[kind][label], total) for label in LABELS},
        }
    return out


@dataclass
class ConfusionMatrix:
    """Rows are human labels, columns agent labels, both in ``LABELS`` order."""

    counts: list[list[int]]
    question_ids: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(map(sum, self.counts))

    @property
    def error_rate(self) -> float:
        off = self.total - sum(self.counts[i][i] for i in range(len(LABELS)))
        return _pct(off, self.total)

    def to_dict(self) -> dict:
        return {
            "labels": list(LABELS),
            "rows": "human",
            "columns": "agent",
            "counts": self.counts,
            "total": self.total,
            "error_rate": self.error_rate,
        }


def read_human_labels(path: str | Path) -> tuple[dict[str, str], list[dict]]:
    labels: dict[str, str] = {}
    rejects: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                qid, label = row["question_id"], row["label"]
            except (ValueError, KeyError, TypeError) as exc:
                rejects.append({"line": lineno, "reason": f"malformed: {exc}"})
                continue
            if label not in LABELS:
                rejects.append({"line": lineno, "question_id": qid, "reason": f"unknown label {label!r}"})
                continue
            labels[qid] = label
    for r in rejects:
        log.warning("human labels line %d rejected: %s", r["line"], r["reason"])
    return labels, rejects


def confusion_matrix(human: Mapping[str, str], agent: Mapping[str, str]) -> ConfusionMatrix:
    idx = {label: i for i, label in enumerate(LABELS)}
    counts = [[0] * len(LABELS) for _ in LABELS]
    shared = sorted(set(human) & set(agent))
    for qid in shared:
        counts[idx[human[qid]]][idx[agent[qid]]] += 1
    return ConfusionMatrix(counts, shared)


def confusion_report(evaluations: Sequence, human_labels_file: str | Path) -> ConfusionMatrix:
    human, _ = read_human_labels(human_labels_file)
    agent = {e.question_id: e.label for e in _scored(evaluations)}
    return confusion_matrix(human, agent)


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.1f}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def render_text(entries: Sequence[dict]) -> str:
    lines = [f"{'model':<28} {'evaluator':<20} {'hyp. questions':>14} {'HTS %':>7} {'error %':>8}"]
    for e in entries:
        s = e["score"]
        lines.append(
            f"{e['model_id']:<28} {e.get('evaluator_id', ''):<20} {s['denominator']:>14} "
            f"{s['hts']:>7.1f} {s['error_rate']:>8.1f}"
        )
    for e in entries:
        lines.append("")
        lines.append(f"answer labels for {e['model_id']}:")
        for kind, share in e["shares"].items():
            cells = "  ".join(f"{label} {share['percent'][label]:.1f}%" for label in LABELS)
            lines.append(f"  {kind:<13} n={share['total']:<6} {cells}")
    ref = REFERENCE["hts_full_set"]
    lines.append("")
    lines.append(
        "published reference (not comparable at this scale): "
        + ", ".join(f"{m} HTS {v:.2f}%" for m, v in ref.items())
        + f"; evaluator error {REFERENCE['evaluator_error_rate']:.2f}%"
    )
    return "\n".join(lines) + "\n"


def score_summary(entries: Sequence[dict], out_dir: str | Path, confusion: ConfusionMatrix | None = None) -> dict:
    """Write report.json, report.txt, shares.csv and distribution.csv.

    Each entry holds ``model_id``, ``evaluator_id``, ``score`` (a dict with
    hts, error_rate, denominator, numerator), ``shares`` from
    :func:`answer_shares`, ``distribution`` from :func:`distribution_report`
    and ``coverage``.
    """
    if not entries:
        raise DataError("report requested but no model has been scored")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "models": [
            {
                "model_id": e["model_id"],
                "evaluator_id": e.get("evaluator_id", ""),
                "score": e["score"],
                "shares": e["shares"],
                "distribution": {g: d.rows() for g, d in e["distribution"].items()},
                "coverage": e.get("coverage", {}),
            }
            for e in entries
        ],
        "reference": REFERENCE,
    }
    if confusion is not None:
        payload["confusion"] = confusion.to_dict()
        write_json(out / "confusion.json", confusion.to_dict())
    write_json(out / "report.json", payload)
    (out / "report.txt").write_text(render_text(entries), encoding="utf-8")

    share_rows = [
        {"model_id": e["model_id"], "kind": kind, "label": label, "count": s["counts"][label], "percent": s["percent"][label]}
        for e in entries
        for kind, s in e["shares"].items()
        for label in LABELS
    ]
    (out / "shares.csv").write_text(_csv(share_rows, ["model_id", "kind", "label", "count", "percent"]), encoding="utf-8")
    dist_rows = [
        {"model_id": e["model_id"], **row} for e in entries for d in e["distribution"].values() for row in d.rows()
    ]
    (out / "distribution.csv").write_text(
        _csv(dist_rows, ["model_id", "grouping", "group", "label", "count", "percent"]), encoding="utf-8"
    )
    log.info("reference figures for comparison: %s", REFERENCE)
    return payload
