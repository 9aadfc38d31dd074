"""Command-line entry point: ``p2hnns {build,groundtruth,bench,info}``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import struct
import sys
from pathlib import Path

from . import bench
from .data import FORMATS, DataError, DegenerateQueryError, file_fingerprint, load_vectors
from .oracle import GroundTruth
from .serialize import read_header

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("p2hnns")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv(conv):
    def parse(text):
        try:
            return [conv(tok) for tok in text.split(",") if tok.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _common(p: argparse.ArgumentParser, *, algo=True) -> None:
    p.add_argument("--data", required=True, help="vector file")
    p.add_argument("--format", default="fvecs", choices=FORMATS)
    if algo:
        p.add_argument("--algo", type=_csv(str), default=["bc"], help=f"comma list of {','.join(bench.ALGORITHMS)}")
        p.add_argument("--n0", type=_csv(int), default=[100], help="comma list of leaf sizes")
    p.add_argument("--k", type=_csv(int), default=[10], help="comma list of k values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--out", default="out/bench")
    p.add_argument("--cache", default=None, help="ground-truth cache directory")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="p2hnns", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("build", help="build and save Ball-Tree / BC-Tree indexes")
    _common(p)

    p = sub.add_parser("groundtruth", help="compute or reuse cached exact top-k answers")
    _common(p, algo=False)

    p = sub.add_parser("bench", help="run a parameter sweep and write CSV/JSON reports")
    _common(p)
    p.add_argument("--budget", type=_csv(str), default=["inf"], help="comma list: inf, 500, 5%%, 0.05")
    p.add_argument("--preference", type=_csv(str), default=["center"], help="center and/or lower_bound")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--gt", default=None, help="explicit ground-truth file")

    p = sub.add_parser("info", help="describe an index, ground-truth or data file")
    p.add_argument("path", nargs="?", help="index (.p2ht) or ground-truth (.p2hg) file")
    p.add_argument("--data", default=None)
    p.add_argument("--format", default="fvecs", choices=FORMATS)
    return parser


def _config(args) -> bench.BenchConfig:
    try:
        return bench.BenchConfig(
            data=args.data,
            fmt=args.format,
            algorithms=getattr(args, "algo", ["bc"]),
            leaf_sizes=getattr(args, "n0", [100]),
            ks=args.k,
            budgets=getattr(args, "budget", [None]),
            preferences=getattr(args, "preference", ["center"]),
            seed=args.seed,
            num_queries=args.queries,
            out=args.out,
            reps=getattr(args, "reps", 1),
            threads=getattr(args, "threads", 1),
            cache_dir=args.cache,
            gt_path=getattr(args, "gt", None),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _info(args) -> dict:
    out = {}
    if args.path:
        buf = Path(args.path).read_bytes()
        if buf[:4] == b"P2HG":
            gt = GroundTruth.from_bytes(buf)
            out["groundtruth"] = dict(queries=len(gt), k_max=gt.k_max, bytes=len(buf))
        else:
            out["index"] = dict(read_header(buf), bytes=len(buf))
    if args.data:
        data = load_vectors(args.data, args.format)
        out["data"] = dict(n=data.n, d=data.d, fingerprint=f"{file_fingerprint(args.data):016x}")
    if not out:
        raise UsageError("info needs an index/ground-truth path or --data")
    return out


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "info":
            result = _info(args)
        else:
            cfg = _config(args)
            if args.command == "build":
                result = bench.cmd_build(cfg)
            elif args.command == "groundtruth":
                result = bench.cmd_groundtruth(cfg)
            else:
                report = bench.cmd_bench(cfg)
                result = dict(csv=str(Path(cfg.out).with_suffix(".csv")), json=str(Path(cfg.out).with_suffix(".json")),
                              points=len(report["points"]), rows=len(report["rows"]))
    except UsageError as exc:
        print(f"p2hnns: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DegenerateQueryError, OSError, struct.error) as exc:
        print(f"p2hnns: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(result, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
