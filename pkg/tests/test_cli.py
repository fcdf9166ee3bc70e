import filecmp
import json
from pathlib import Path

import pytest

from conftest import make_pairs, topics_of
from termbench import cli
from termbench.config import Config
from termbench.jsonl import read_json, read_jsonl, write_jsonl
from termbench.questions import assemble_dataset
from termbench.synthetic import SyntheticChat

PIPELINE = [
    ["corpus-ingest"],
    ["index-build"],
    ["gen-topics"],
    ["gen-terms"],
    ["validate-terms"],
    ["retrieve-valid"],
    ["compose"],
    ["sample", "--level", "q180"],
    ["respond", "--model", "mut", "--level", "q180"],
    ["evaluate", "--model", "mut"],
    ["report"],
]


def small_config(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("terms_per_topic: 7\n")
    return path


def run_cli(run_dir, cfg, *argv):
    return cli.main([*argv, "--mock", "--config", str(cfg), "--run-dir", str(run_dir)])


def run_pipeline(run_dir, cfg):
    for argv in PIPELINE:
        assert run_cli(run_dir, cfg, *argv) == 0, argv


def tree(root):
    return sorted(str(p.relative_to(root)) for p in Path(root).rglob("*") if p.is_file() and "cache" not in p.parts)


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("e2e")
    cfg = small_config(base)
    run_pipeline(base / "a", cfg)
    run_pipeline(base / "b", cfg)
    return base, cfg


def test_mock_pipeline_is_byte_identical(two_runs):
    base, _ = two_runs
    a, b = base / "a", base / "b"
    files = tree(a)
    assert files == tree(b)
    assert "report/report.json" in files and "dataset.jsonl" in files
    _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    assert mismatch == [] and errors == []


def test_report_scores_are_in_range(two_runs):
    base, _ = two_runs
    report = read_json(base / "a" / "report" / "report.json")
    score = report["models"][0]["score"]
    assert 0.0 <= score["hts"] <= 100.0
    assert score["hts"] + score["error_rate"] == pytest.approx(100.0, abs=1e-9)
    assert report["reference"]["hts_full_set"] == {"gpt-3.5": 5.72, "llama2-70b": 5.64}


def test_rerun_is_a_no_op(two_runs, capsys):
    base, cfg = two_runs
    run_dir = base / "a"
    before = (run_dir / "manifest.json").read_bytes()
    mtime = (run_dir / "dataset.jsonl").stat().st_mtime_ns
    assert run_cli(run_dir, cfg, "compose") == 0
    assert (run_dir / "manifest.json").read_bytes() == before
    assert (run_dir / "dataset.jsonl").stat().st_mtime_ns == mtime


def test_lineage_traces_each_question(two_runs):
    run_dir = two_runs[0] / "a"
    pairs = {p["pair_id"]: p for p in read_jsonl(run_dir / "pairs.jsonl")}
    topics = {t["index"] for t in read_jsonl(run_dir / "topics.jsonl")}
    for q in read_jsonl(run_dir / "dataset.jsonl"):
        pair = pairs[q["pair_id"]]
        assert pair["hypothetical"]["phrase"] == q["hypothetical_phrase"]
        assert q["topic_index"] in topics
        assert q["request_digest"] or q["method"] == "replaced"


def test_compose_before_retrieve_names_the_prerequisite(tmp_path, capsys):
    code = run_cli(tmp_path / "r", small_config(tmp_path), "compose")
    assert code == cli.EXIT_USAGE
    assert "run `retrieve-valid` first" in capsys.readouterr().err


def test_usage_errors(tmp_path, capsys):
    assert cli.main(["no-such-command"]) == cli.EXIT_USAGE
    assert cli.main(["sample", "--level", "q7"]) == cli.EXIT_USAGE
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("nonsense_key: 1\n")
    assert cli.main(["gen-topics", "--config", str(cfg), "--run-dir", str(tmp_path / "r")]) == cli.EXIT_USAGE


def test_missing_dump_is_a_data_error(tmp_path):
    code = run_cli(tmp_path / "r", small_config(tmp_path), "corpus-ingest", "--dump", str(tmp_path / "nope.jsonl"))
    assert code == cli.EXIT_DATA


def test_locked_run_dir_is_refused(tmp_path):
    run_dir = tmp_path / "r"
    run_dir.mkdir()
    (run_dir / ".lock").write_text("123")
    assert run_cli(run_dir, small_config(tmp_path), "gen-topics") == cli.EXIT_USAGE


def seeded_run(tmp_path):
    """A run directory whose compose stage holds a clean 20-topic x 6-term dataset."""
    pairs = make_pairs(n_topics=20, n_terms=6)
    topics = topics_of(pairs)
    ds = assemble_dataset(pairs, SyntheticChat(drop_term_every=0), topics=topics)
    run = cli.Run(tmp_path / "r", Config(), mock=True)

    def work():
        write_jsonl(run.path(cli.TOPICS), topics)
        write_jsonl(run.path(cli.DATASET), ds.questions)
        return [cli.TOPICS, cli.DATASET], dict(ds.counts)

    run.run_stage("compose", [], {}, work)
    return run


def test_sample_q180_on_full_shaped_data(tmp_path):
    run = seeded_run(tmp_path)
    for level, n in (("q1080", 1080), ("q180", 180)):
        assert cli.main(["sample", "--level", level, "--mock", "--run-dir", str(run.dir)]) == 0
        manifest = read_json(run.path(f"subsets/{level}.json"))
        assert len(manifest["question_ids"]) == n and manifest["shortfall"] == []


class Args:
    model = "mut"
    level = "q180"


def test_label_loop_records_answers(tmp_path):
    run = seeded_run(tmp_path)
    assert cli.main(["sample", "--level", "q180", "--mock", "--run-dir", str(run.dir)]) == 0
    assert cli.main(["respond", "--model", "mut", "--level", "q180", "--mock", "--run-dir", str(run.dir)]) == 0
    run = cli.Run(run.dir, Config(), mock=True)
    keys = iter(["v", "x", "h", "s", "i", "q"])
    cli.cmd_label(run, Args(), read=lambda prompt: next(keys))
    rows = read_jsonl(run.path(cli.HUMAN_LABELS))
    assert [r["label"] for r in rows] == ["valid", "hallucination", "irrelevant"]
    # a second session skips what is already labeled
    cli.cmd_label(run, Args(), read=lambda prompt: "q")
    first_unlabeled = [json.loads(line)["question_id"] for line in run.path(cli.HUMAN_LABELS).read_text().splitlines()]
    assert len(set(first_unlabeled)) == 3


def test_import_responses_then_evaluate(tmp_path):
    run = seeded_run(tmp_path)
    qs = list(read_jsonl(run.path(cli.DATASET)))[:30]
    answers = tmp_path / "answers.jsonl"
    write_jsonl(answers, [{"question_id": q["id"], "text": f"{q['term_a']['phrase']} and more."} for q in qs])
    base = ["--mock", "--run-dir", str(run.dir), "--model", "ext"]
    assert cli.main(["import-responses", str(answers), *base]) == 0
    assert cli.main(["evaluate", *base]) == 0
    cov = read_json(run.path("evaluations/ext.coverage.json"))
    assert cov["answered"] == 30 and cov["no_response"] == len(read_jsonl(run.path(cli.DATASET))) - 30
