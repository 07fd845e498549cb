"""Benchmark command line: micro kernels and full-tree workloads.

`micro` times the codec kernels (decompress, select, find, random-order
insert) over synthetic delta blocks of a chosen bit width. `db` builds a
database from clustered keys and times insert, lookup, cursor, sum, and a
filtered average. Results go to stdout as CSV, or to --out with figures
rendered next to the file. The exit code is nonzero when a correctness
pass fails.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from ..codecs import CODEC_NAMES
from .data import MicroSpec
from .harness import (MICRO_OPS, CorrectnessError, emit_csv, run_db_battery,
                      run_micro, soft_sanity_flags)


def _codec_names(arg: str) -> List[str]:
    if arg == "all":
        return list(CODEC_NAMES)
    names = [c.strip().lower() for c in arg.split(",") if c.strip()]
    unknown = [c for c in names if c not in CODEC_NAMES]
    if unknown or not names:
        raise argparse.ArgumentTypeError(
            f"unknown codec(s) {', '.join(unknown) or arg!r}; "
            f"choose from {', '.join(CODEC_NAMES)} or 'all'")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="packtree-bench",
        description="Codec and tree benchmarks with CSV output.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--codec", type=_codec_names, default="all",
                        help="comma-separated codec names, or 'all'")
        sp.add_argument("--block-size", type=int, choices=(128, 256),
                        default=None, help="keys per block")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--runs", type=int, default=3)
        sp.add_argument("--out", default=None,
                        help="CSV file; figures are rendered next to it")

    micro = sub.add_parser("micro",
                           help="codec kernels on synthetic delta blocks")
    common(micro)
    micro.add_argument("--b", type=int, default=8,
                       help="delta bit width, 0..24")
    micro.add_argument("--n", type=int, default=1 << 17,
                       help="integers processed per run")

    db = sub.add_parser("db", help="full-tree workloads on clustered keys")
    common(db)
    db.add_argument("--n", type=int, default=200_000,
                    help="keys in the database")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    codecs = args.codec if isinstance(args.codec, list) else _codec_names(
        args.codec)
    reports = []
    try:
        if args.command == "micro":
            spec = MicroSpec(b=args.b, seed=args.seed)
            for codec in codecs:
                for op in MICRO_OPS:
                    reports.append(run_micro(codec, spec, op, runs=args.runs,
                                             n=args.n,
                                             block_size=args.block_size))
        else:
            for codec in codecs:
                reports.extend(run_db_battery(codec, n=args.n,
                                              block_size=args.block_size,
                                              seed=args.seed,
                                              runs=args.runs))
    except CorrectnessError as exc:
        print(f"correctness failure: {exc}", file=sys.stderr)
        return 1
    for note in soft_sanity_flags(reports):
        print(note, file=sys.stderr)
    if args.out:
        with open(args.out, "w", newline="") as f:
            emit_csv(reports, f)
        from .plots import render_figures
        for path in render_figures(reports, args.out):
            print(f"wrote {path}", file=sys.stderr)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        emit_csv(reports, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
