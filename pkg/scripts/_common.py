"""Shared helpers for the experiment scripts."""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from p2hnns.data import clustered_points, gaussian_points, load_vectors


def add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="vector file; synthetic data when omitted")
    p.add_argument("--format", default="fvecs")
    p.add_argument("--synthetic", choices=["gauss", "clustered"], default="clustered")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--dim", type=int, default=16, help="raw coordinates per synthetic point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--out", default=None, help="write results as JSON here")


def load(args):
    if args.data:
        return load_vectors(args.data, args.format)
    make = gaussian_points if args.synthetic == "gauss" else clustered_points
    return make(args.n, args.dim, seed=args.seed)


def mean(xs) -> float:
    return float(np.mean(xs))


def dump(rows, out) -> None:
    for row in rows:
        print("  ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(json.dumps(rows, indent=2))
