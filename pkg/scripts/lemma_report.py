#!/usr/bin/env python3
"""Run the standalone functional-inequality checks and print the report."""

import argparse
import sys

from chemoflow.analysis import FieldCorpus, format_report, run_lemma_checks


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--members", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--output", default=None)
    args = ap.parse_args()

    rows = run_lemma_checks(FieldCorpus(n_members=args.members, seed=args.seed))
    text = format_report(rows)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    print(text, end="")
    return 0 if all(r.passed for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
