"""Run every stage on the offline providers, from corpus ingestion to the report."""

import argparse
import sys

from termbench.cli import main as termbench

STAGES = [
    ["corpus-ingest"],
    ["index-build"],
    ["gen-topics"],
    ["gen-terms"],
    ["validate-terms"],
    ["retrieve-valid"],
    ["compose"],
    ["sample", "--level", "q1080"],
    ["sample", "--level", "q180"],
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--run-dir", default="run-mock")
    ap.add_argument("--config", help="optional YAML config (e.g. a smaller terms_per_topic)")
    ap.add_argument("--level", default="q180", choices=["full", "q1080", "q180"])
    ap.add_argument("--models", nargs="+", default=["mock-model"])
    args = ap.parse_args()

    common = ["--mock", "--run-dir", args.run_dir] + (["--config", args.config] if args.config else [])
    steps = list(STAGES)
    for model in args.models:
        steps.append(["respond", "--model", model, "--level", args.level])
        steps.append(["evaluate", "--model", model])
    steps.append(["report"])
    for step in steps:
        code = termbench(step + common)
        if code:
            print(f"stage {' '.join(step)} exited with {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
