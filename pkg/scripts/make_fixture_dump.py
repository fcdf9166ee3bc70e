"""Write a synthetic encyclopedia dump in JSONL for offline runs."""

import argparse

from termbench.fixtures import write_synthetic_dump


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help="output JSONL path")
    ap.add_argument("--pages", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--clean", action="store_true", help="omit the malformed, empty and duplicate records")
    args = ap.parse_args()
    path = write_synthetic_dump(args.out, n_pages=args.pages, seed=args.seed, noisy=not args.clean)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
