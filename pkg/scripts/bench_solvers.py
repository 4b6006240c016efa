#!/usr/bin/env python3
"""Solver timing sweep over problem sizes; writes the bench JSON report."""

import argparse

from tomobpdn import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="bench_report.json")
    parser.add_argument("--config", default=None, help="bench config JSON override")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    argv = ["bench", "--out", args.out]
    if args.config:
        argv += ["--config", args.config]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    code = cli.main(argv)
    if code == 0:
        print(f"wrote {args.out}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
