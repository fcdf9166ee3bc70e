"""Score one or more live models on the 180-question subset.

Expects a run directory whose dataset was already built (either live or with
``--mock``) and a config naming the models and the evaluator endpoint. API
keys are read from the environment variables the config names.

On success the report path is printed; point TERMBENCH_LIVE_REPORT at it to
let the acceptance suite check the live criterion.
"""

import argparse
import sys
from pathlib import Path

from termbench.cli import main as termbench


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", required=True)
    ap.add_argument("--run-dir", required=True)
    ap.add_argument("--models", nargs="+", required=True)
    ap.add_argument("--evaluator")
    args = ap.parse_args()

    common = ["--config", args.config, "--run-dir", args.run_dir]
    evaluator = ["--evaluator", args.evaluator] if args.evaluator else []
    steps = [["sample", "--level", "q180"]]
    for model in args.models:
        steps.append(["respond", "--model", model, "--level", "q180"])
        steps.append(["evaluate", "--model", model] + evaluator)
    steps.append(["report"])
    for step in steps:
        code = termbench(step + common)
        if code:
            print(f"stage {' '.join(step)} exited with {code}", file=sys.stderr)
            return code
    print(Path(args.run_dir, "report", "report.json").resolve())
    return 0


if __name__ == "__main__":
    sys.exit(main())
