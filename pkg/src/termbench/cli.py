"""Command-line entry point: one subcommand per pipeline stage.

Every command works inside a run directory holding plain JSON/JSONL
artifacts and a ``manifest.json`` that records, per stage, its status, the
digest of its inputs and the digests of the files it wrote. Re-running a
finished stage whose inputs have not changed does nothing.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from pathlib import Path
from typing import Callable

from termbench import benchgen, corpus as corpus_mod, evalengine, questions as qmod, reporting, respond
from termbench.config import Config, load_config
from termbench.errors import DataError, PrerequisiteError, ProviderError, TermbenchError, UsageError
from termbench.jsonl import file_digest, read_json, read_jsonl, to_plain, write_json, write_jsonl
from termbench.providers import (
    CachedChat,
    CachedEmbedder,
    CachedSearch,
    CallCache,
    GoogleSearch,
    HttpChat,
    HttpEmbedder,
    MockEmbedder,
    MockSearch,
)
from termbench.providers.base import digest_of
from termbench.synthetic import SyntheticChat
from termbench.vectorindex import VectorIndex, build_index

log = logging.getLogger("termbench")

EXIT_OK, EXIT_USAGE, EXIT_PROVIDER, EXIT_DATA = 0, 1, 2, 3
LEVELS = ("full", "q1080", "q180")

TOPICS = "topics.jsonl"
TERMS = "terms.jsonl"
VALIDATED = "validated_terms.jsonl"
SEARCH_CKPT = "search_checkpoint.jsonl"
PAIRS = "pairs.jsonl"
DATASET = "dataset.jsonl"
DATASET_COUNTS = "dataset_counts.json"
REJECTIONS = "rejections.jsonl"
HUMAN_LABELS = "human_labels.jsonl"


def safe_name(model: str) -> str:
    return re.sub(r"[^\w.-]", "_", model)


class Run:
    """A run directory: manifest, lock, artifact paths and providers."""

    def __init__(self, run_dir: str | Path, config: Config, mock: bool) -> None:
        self.dir = Path(run_dir)
        self.config = config
        self.mock = mock
        self.dir.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.dir / "manifest.json"
        self.lock_path = self.dir / ".lock"
        self._lock_fd: int | None = None
        self.cache = CallCache(self.dir / "cache")
        if self.manifest_path.exists():
            self.manifest = read_json(self.manifest_path)
        else:
            self.manifest = {"run_id": "", "config_digest": "", "mock": mock, "stages": {}}
        self.manifest["run_id"] = digest_of({"config": config.digest, "mock": mock})[:12]
        self.manifest["config_digest"] = config.digest
        self.manifest["mock"] = mock

    # locking and manifest

    def __enter__(self) -> "Run":
        try:
            self._lock_fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as exc:
            raise UsageError(
                f"{self.dir} is in use by another command (lock file {self.lock_path}); "
                "remove the lock file if no other command is running"
            ) from exc
        os.write(self._lock_fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc) -> None:
        if self._lock_fd is not None:
            os.close(self._lock_fd)
            self.lock_path.unlink(missing_ok=True)
            self._lock_fd = None

    def save(self) -> None:
        write_json(self.manifest_path, self.manifest)

    def path(self, rel: str) -> Path:
        return self.dir / rel

    def stage_done(self, key: str) -> bool:
        return self.manifest["stages"].get(key, {}).get("status") == "done"

    def require(self, stage: str, prerequisite: str, key: str | None = None, what: str | None = None) -> None:
        if not self.stage_done(key or prerequisite):
            raise PrerequisiteError(stage, prerequisite, what or f"the output of `{prerequisite}`")

    def run_stage(self, key: str, inputs: list[str], params: dict, fn: Callable[[], tuple[list[str], dict]]) -> dict:
        """Run ``fn`` unless the stage is done with identical inputs.

        ``inputs`` are artifact paths relative to the run directory; their
        digests, ``params`` and the config digest form the input digest.
        ``fn`` returns the artifacts it wrote and a summary.
        """
        input_digest = digest_of(
            {
                "config": self.config.digest,
                "mock": self.mock,
                "params": params,
                "inputs": {rel: file_digest(self.path(rel)) for rel in inputs},
            }
        )
        entry = self.manifest["stages"].get(key)
        if (
            entry
            and entry.get("status") == "done"
            and entry.get("input_digest") == input_digest
            and all(self.path(rel).exists() and file_digest(self.path(rel)) == d for rel, d in entry["artifacts"].items())
        ):
            log.info("%s is up to date", key)
            return entry["summary"]
        self.manifest["stages"][key] = {"status": "running", "input_digest": input_digest, "artifacts": {}, "summary": {}}
        self.save()
        try:
            artifacts, summary = fn()
        except BaseException:
            self.manifest["stages"][key]["status"] = "failed"
            self.save()
            raise
        self.manifest["stages"][key] = {
            "status": "done",
            "input_digest": input_digest,
            "artifacts": {rel: file_digest(self.path(rel)) for rel in artifacts},
            "summary": summary,
        }
        self.save()
        return summary

    # providers

    def corpus(self) -> corpus_mod.Corpus:
        return corpus_mod.Corpus(self.path("corpus"))

    def generator(self, vocabulary=()):
        cfg = self.config.generator
        inner = SyntheticChat(vocabulary, model_id="synthetic-generator") if self.mock else HttpChat(
            cfg.base_url, cfg.model_id, cfg.api_key_env
        )
        return CachedChat(inner, self.cache)

    def generator_id(self) -> str:
        return "synthetic-generator" if self.mock else self.config.generator.model_id

    def model_under_test(self, model: str, known_terms=()):
        cfg = self.config.model(model)
        inner = SyntheticChat(known_terms=known_terms, model_id=model) if self.mock else HttpChat(
            cfg.base_url, cfg.model_id, cfg.api_key_env
        )
        return CachedChat(inner, self.cache)

    def evaluator(self, evaluator_id: str):
        cfg = self.config.evaluator
        inner = SyntheticChat(model_id=evaluator_id) if self.mock else HttpChat(cfg.base_url, evaluator_id, cfg.api_key_env)
        return CachedChat(inner, self.cache)

    def embedder(self):
        cfg = self.config.embedder
        inner = MockEmbedder(self.config.mock_dimension) if self.mock else HttpEmbedder(
            cfg.base_url, cfg.model_id, cfg.dimension, cfg.api_key_env
        )
        return CachedEmbedder(inner, self.cache)

    def search(self, real_titles=()):
        cfg = self.config.search
        inner = MockSearch(hits=real_titles, default_total=0) if self.mock else GoogleSearch(cfg.api_key_env, cfg.cx_env)
        return CachedSearch(inner, self.cache)

    # shared loaders

    def topics(self) -> list[benchgen.Topic]:
        return [benchgen.Topic.from_dict(d) for d in read_jsonl(self.path(TOPICS))]

    def dataset_questions(self) -> list[qmod.Question]:
        return [qmod.Question.from_dict(d) for d in read_jsonl(self.path(DATASET))]

    def level_questions(self, stage: str, level: str) -> list[qmod.Question]:
        qs = self.dataset_questions()
        if level == "full":
            return qs
        self.require(stage, "sample", f"sample:{level}", f"the {level} subset")
        ids = set(read_json(self.path(f"subsets/{level}.json"))["question_ids"])
        return [q for q in qs if q.id in ids]


# stage commands


def cmd_corpus_ingest(run: Run, args) -> None:
    dump = args.dump or run.config.corpus_dump
    if dump is None:
        if not run.mock:
            raise UsageError("corpus-ingest needs --dump PATH or corpus_dump in the config")
        from termbench.fixtures import write_synthetic_dump

        dump = write_synthetic_dump(run.path("synthetic_dump.jsonl"))
    dump = Path(dump)
    if not dump.exists():
        raise DataError(f"dump not found: {dump}")

    def work():
        stats = corpus_mod.ingest_dump(dump, run.path("corpus"), run.config.dump_date)
        files = [f"corpus/{n}" for n in (corpus_mod.PAGES_FILE, corpus_mod.INDEX_FILE, corpus_mod.STATS_FILE, corpus_mod.REJECTS_FILE)]
        return files, to_plain(stats)

    summary = run.run_stage("corpus-ingest", [], {"dump_digest": file_digest(dump)}, work)
    print(f"corpus: {summary['page_count']} pages ({summary['dropped_empty']} empty, {summary['rejected']} rejected)")


def cmd_index_build(run: Run, args) -> None:
    run.require("index-build", "corpus-ingest")

    def work():
        corpus = run.corpus()
        emb = run.embedder()
        out = []
        for kind in ("title", "definition"):
            rel = f"index/{kind}.idx"
            build_index(corpus, kind, emb, run.path(rel), checkpoint_dir=run.path(f"index/{kind}.chunks"))
            out.append(rel)
        return out, {"pages": len(corpus)}

    summary = run.run_stage("index-build", ["corpus/pages.jsonl"], {}, work)
    print(f"indexes built over {summary['pages']} pages")


def cmd_gen_topics(run: Run, args) -> None:
    def work():
        topics = benchgen.generate_topics(run.generator(), run.generator_id(), run.config.topic_count)
        write_jsonl(run.path(TOPICS), topics)
        return [TOPICS], {"topics": len(topics)}

    summary = run.run_stage("gen-topics", [], {}, work)
    print(f"{summary['topics']} topics")


def _vocabulary(run: Run) -> list[str]:
    return run.corpus().titles() if run.mock and run.stage_done("corpus-ingest") else []


def cmd_gen_terms(run: Run, args) -> None:
    run.require("gen-terms", "gen-topics")
    if run.mock:
        run.require("gen-terms", "corpus-ingest", what="a corpus (mock suggestions draw on its titles)")

    def work():
        chat = run.generator(_vocabulary(run))
        gates = benchgen.TermGates(**run.config.gates)
        terms = []
        for topic in run.topics():
            terms.extend(
                benchgen.generate_hypothetical_terms(topic, chat, run.generator_id(), run.config.terms_per_topic, gates)
            )
        write_jsonl(run.path(TERMS), terms)
        return [TERMS], {"terms": len(terms)}

    summary = run.run_stage("gen-terms", [TOPICS], {}, work)
    print(f"{summary['terms']} made-up terms")


def cmd_validate_terms(run: Run, args) -> None:
    run.require("validate-terms", "gen-terms")

    def work():
        terms = [benchgen.HypotheticalTerm.from_dict(d) for d in read_jsonl(run.path(TERMS))]
        titles = run.corpus().titles() if run.mock else ()
        kept = benchgen.validate_nonexistence(terms, run.search(titles), run.path(SEARCH_CKPT))
        write_jsonl(run.path(VALIDATED), kept)
        run.path(SEARCH_CKPT).unlink(missing_ok=True)
        return [VALIDATED], {"searched": len(terms), "kept": len(kept), "excluded": len(terms) - len(kept)}

    summary = run.run_stage("validate-terms", [TERMS], {}, work)
    print(f"web validation kept {summary['kept']} of {summary['searched']} terms")


def cmd_retrieve_valid(run: Run, args) -> None:
    run.require("retrieve-valid", "validate-terms")
    run.require("retrieve-valid", "index-build")

    def work():
        corpus = run.corpus()
        chat = run.generator(_vocabulary(run))
        emb = run.embedder()
        title_idx = VectorIndex.load(run.path("index/title.idx"))
        text_idx = VectorIndex.load(run.path("index/definition.idx"))
        cfg = run.config
        pairs, dropped = [], 0
        for d in read_jsonl(run.path(VALIDATED)):
            term = benchgen.HypotheticalTerm.from_dict(d)
            found = benchgen.assemble_term_pairs(
                term,
                benchgen.retrieve_llm_suggestions(term, chat, corpus, run.generator_id(), cfg.suggestion_count),
                benchgen.retrieve_title_similar(term, title_idx, corpus, emb, cfg.neighbor_count),
                benchgen.retrieve_text_similar(term, text_idx, corpus, emb, cfg.neighbor_count),
                cfg.per_source,
            )
            dropped += not found
            pairs.extend(found)
        write_jsonl(run.path(PAIRS), pairs)
        return [PAIRS], {"pairs": len(pairs), "terms_dropped": dropped}

    summary = run.run_stage("retrieve-valid", [VALIDATED, "index/title.idx", "index/definition.idx"], {}, work)
    print(f"{summary['pairs']} term pairs ({summary['terms_dropped']} terms without enough similar terms)")


def cmd_compose(run: Run, args) -> None:
    run.require("compose", "retrieve-valid")

    def work():
        pairs = [benchgen.TermPair.from_dict(d) for d in read_jsonl(run.path(PAIRS))]
        ds = qmod.assemble_dataset(pairs, run.generator(), run.generator_id(), run.topics(), args.parallelism)
        bad = qmod.check_dataset(ds.questions)
        if bad:
            raise DataError(f"{len(bad)} questions fail the read-back term check, e.g. {bad[0]}")
        write_jsonl(run.path(DATASET), ds.questions)
        write_jsonl(run.path(REJECTIONS), ds.rejections)
        counts = dict(ds.counts, provenance=ds.provenance)
        write_json(run.path(DATASET_COUNTS), counts)
        return [DATASET, REJECTIONS, DATASET_COUNTS], counts

    c = run.run_stage("compose", [PAIRS, TOPICS], {}, work)
    print(
        f"{c['final']} questions = {c['candidates']} candidates - {c['duplicates']} duplicates - {c['failures']} failures"
    )


def cmd_sample(run: Run, args) -> None:
    run.require("sample", "compose")
    level = args.level

    def work():
        ds = qmod.Dataset(run.dataset_questions(), run.topics())
        sub, shortfall = qmod.sample_subset(ds, level, run.topics())
        rel = f"subsets/{level}.json"
        write_json(run.path(rel), {"level": level, "question_ids": [q.id for q in sub.questions], "shortfall": shortfall, "counts": sub.counts})
        return [rel], {"questions": len(sub.questions), "shortfall": len(shortfall)}

    summary = run.run_stage(f"sample:{level}", [DATASET, TOPICS], {"level": level}, work)
    print(f"{level}: {summary['questions']} questions" + (f" ({summary['shortfall']} shortfall entries)" if summary["shortfall"] else ""))


def _need_model(args, command: str) -> str:
    if not args.model:
        raise UsageError(f"{command} needs --model")
    return args.model


def cmd_respond(run: Run, args) -> None:
    run.require("respond", "compose")
    model = _need_model(args, "respond")
    qs = run.level_questions("respond", args.level)
    rel = f"responses/{safe_name(model)}.jsonl"

    def work():
        known = {t.phrase for q in qs for t in q.terms} if run.mock else ()
        ckpt = run.path(f"responses/{safe_name(model)}.partial.jsonl")
        got = respond.collect_responses(qs, run.model_under_test(model, known), model, checkpoint=ckpt, parallelism=args.parallelism)
        if got.missing:
            write_jsonl(run.path(f"responses/{safe_name(model)}.missing.jsonl"), got.missing)
            raise ProviderError(f"{len(got.missing)} questions unanswered; rerun `respond` to resume")
        write_jsonl(run.path(rel), got.responses)
        ckpt.unlink(missing_ok=True)
        return [rel], {"responses": len(got.responses), "level": args.level}

    inputs = [DATASET] + ([f"subsets/{args.level}.json"] if args.level != "full" else [])
    summary = run.run_stage(f"responses:{model}", inputs, {"level": args.level, "model": model}, work)
    print(f"{summary['responses']} responses from {model}")


def cmd_import_responses(run: Run, args) -> None:
    run.require("import-responses", "compose")
    model = _need_model(args, "import-responses")
    rel = f"responses/{safe_name(model)}.jsonl"

    def work():
        rows, rejects = respond.import_responses(args.file, run.dataset_questions(), model)
        write_jsonl(run.path(rel), rows)
        return [rel], {"responses": len(rows), "rejected": len(rejects), "rejects": rejects}

    summary = run.run_stage(f"responses:{model}", [DATASET], {"file": file_digest(args.file), "model": model}, work)
    print(f"imported {summary['responses']} responses ({summary['rejected']} rejected lines)")


def _evaluated_models(run: Run, args) -> list[str]:
    if args.model:
        return [args.model]
    models = sorted(k.split(":", 1)[1] for k, v in run.manifest["stages"].items() if k.startswith("evaluations:") and v["status"] == "done")
    if not models:
        raise PrerequisiteError("report", "evaluate", "evaluations")
    return models


def cmd_evaluate(run: Run, args) -> None:
    model = _need_model(args, "evaluate")
    run.require("evaluate", "respond", f"responses:{model}", f"responses from {model}")
    evaluator_id = args.evaluator or ("synthetic-evaluator" if run.mock else run.config.evaluator.model_id)
    rel = f"evaluations/{safe_name(model)}.jsonl"
    resp_rel = f"responses/{safe_name(model)}.jsonl"

    def work():
        responses = [respond.Response.from_dict(d) for d in read_jsonl(run.path(resp_rel))]
        ckpt = run.path(f"evaluations/{safe_name(model)}.partial.jsonl")
        evals, coverage = evalengine.evaluate_all(
            run.dataset_questions(), responses, run.evaluator(evaluator_id), evaluator_id, args.parallelism, ckpt
        )
        write_jsonl(run.path(rel), evals)
        ckpt.unlink(missing_ok=True)
        cov_rel = f"evaluations/{safe_name(model)}.coverage.json"
        write_json(run.path(cov_rel), dict(coverage, evaluator_id=evaluator_id))
        return [rel, cov_rel], {k: v for k, v in coverage.items() if k != "evaluation_failed_ids"}

    summary = run.run_stage(f"evaluations:{model}", [DATASET, resp_rel], {"evaluator": evaluator_id}, work)
    print(f"evaluated {summary['answered']} answers of {model} ({summary['evaluation_failed']} evaluation failures)")


def cmd_label(run: Run, args, read: Callable[[str], str] = input) -> None:
    model = _need_model(args, "label")
    run.require("label", "respond", f"responses:{model}", f"responses from {model}")
    qs = {q.id: q for q in run.level_questions("label", args.level)}
    responses = [respond.Response.from_dict(d) for d in read_jsonl(run.path(f"responses/{safe_name(model)}.jsonl"))]
    path = run.path(HUMAN_LABELS)
    done = {d["question_id"] for d in read_jsonl(path)} if path.exists() else set()
    todo = [r for r in responses if r.question_id in qs and r.question_id not in done]
    keys = {"v": "valid", "h": "hallucination", "i": "irrelevant"}
    from termbench.jsonl import append_jsonl

    print(f"{len(todo)} answers to label ({len(done)} already labeled). Keys: v valid, h hallucination, i irrelevant, s skip, q quit.")
    for n, r in enumerate(todo, start=1):
        q = qs[r.question_id]
        print(f"\n[{n}/{len(todo)}] {q.kind} question: {q.text}")
        print(f"terms: {q.term_a.phrase} ({q.term_a.kind}), {q.term_b.phrase} ({q.term_b.kind})")
        print(f"answer: {r.text}")
        while True:
            try:
                key = read("label> ").strip().lower()
            except EOFError:
                key = "q"
            if key in keys or key in ("s", "q"):
                break
            print("please type v, h, i, s or q")
        if key == "q":
            break
        if key == "s":
            continue
        append_jsonl(path, {"question_id": r.question_id, "label": keys[key], "model_id": model})


def cmd_report(run: Run, args) -> None:
    models = _evaluated_models(run, args)
    for m in models:
        run.require("report", "evaluate", f"evaluations:{m}", f"evaluations for {m}")
    qs = {q.id: q for q in run.dataset_questions()}
    kinds = {qid: q.kind for qid, q in qs.items()}

    def work():
        entries = []
        confusion = None
        for m in models:
            evals = [evalengine.AnswerEvaluation.from_dict(d) for d in read_jsonl(run.path(f"evaluations/{safe_name(m)}.jsonl"))]
            coverage = read_json(run.path(f"evaluations/{safe_name(m)}.coverage.json"))
            score = evalengine.hypoterm_score(evals, kinds)
            entries.append(
                {
                    "model_id": m,
                    "evaluator_id": coverage.get("evaluator_id", ""),
                    "score": to_plain(score),
                    "shares": reporting.answer_shares(evals, qs),
                    "distribution": reporting.distribution_report(evals, qs),
                    "coverage": coverage,
                }
            )
            if confusion is None and run.path(HUMAN_LABELS).exists():
                confusion = reporting.confusion_report(evals, run.path(HUMAN_LABELS))
        reporting.score_summary(entries, run.path("report"), confusion)
        files = ["report/report.json", "report/report.txt", "report/shares.csv", "report/distribution.csv"]
        if confusion is not None:
            files.append("report/confusion.json")
        return files, {"models": {e["model_id"]: e["score"] for e in entries}}

    inputs = [DATASET] + [f"evaluations/{safe_name(m)}.jsonl" for m in models]
    if run.path(HUMAN_LABELS).exists():
        inputs.append(HUMAN_LABELS)
    run.run_stage("report", inputs, {"models": models}, work)
    print(run.path("report/report.txt").read_text(encoding="utf-8"), end="")


COMMANDS = {
    "corpus-ingest": cmd_corpus_ingest,
    "index-build": cmd_index_build,
    "gen-topics": cmd_gen_topics,
    "gen-terms": cmd_gen_terms,
    "validate-terms": cmd_validate_terms,
    "retrieve-valid": cmd_retrieve_valid,
    "compose": cmd_compose,
    "sample": cmd_sample,
    "respond": cmd_respond,
    "import-responses": cmd_import_responses,
    "evaluate": cmd_evaluate,
    "label": cmd_label,
    "report": cmd_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--run-dir", default="run", help="directory holding the run's artifacts (default: ./run)")
    common.add_argument("--model", help="model under test")
    common.add_argument("--level", choices=LEVELS, default="full", help="question subset (default: full)")
    common.add_argument("--evaluator", help="evaluator model id (overrides the config)")
    common.add_argument("--parallelism", type=int, default=None, help="concurrent provider calls")
    common.add_argument("--mock", action="store_true", help="use offline deterministic providers")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="termbench", description="Build and score a made-up-term question benchmark.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "corpus-ingest":
            p.add_argument("--dump", help="encyclopedia dump in JSONL")
        if name == "import-responses":
            p.add_argument("file", help="JSONL of {question_id, text}")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"termbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if args.parallelism is None:
            args.parallelism = config.parallelism
        if args.parallelism < 1:
            raise UsageError("--parallelism must be at least 1")
        with Run(args.run_dir, config, args.mock) as run:
            COMMANDS[args.command](run, args)
    except UsageError as exc:
        print(f"termbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProviderError as exc:
        print(f"termbench: provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (DataError, TermbenchError) as exc:
        print(f"termbench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
