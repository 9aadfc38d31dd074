"""Build time as n doubles, and the BC-minus-Ball index size gap."""

import argparse
import time

from _common import dump

from p2hnns import ball_tree, bc_tree
from p2hnns.data import gaussian_points
from p2hnns.serialize import SCALAR_SIZE, index_bytes


def cpu_best(build, data, n0, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.process_time()
        build(data, n0, seed=0)
        best = min(best, time.process_time() - t0)
    return best


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[100_000, 200_000, 400_000, 800_000])
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--n0", type=int, default=100)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--out", default=None)
    args = p.parse_args()

    rows, prev = [], {}
    for n in args.sizes:
        data = gaussian_points(n, args.dim, seed=n)
        row = dict(n=n)
        for kind, mod in (("ball", ball_tree), ("bc", bc_tree)):
            secs = cpu_best(mod.build, data, args.n0, args.reps)
            row[f"{kind}_s"] = secs
            row[f"{kind}_ratio"] = secs / prev[kind] if kind in prev else float("nan")
            row[f"{kind}_bytes"] = len(index_bytes(mod.build(data, args.n0, seed=0)))
            prev[kind] = secs
        row["extra_bytes_per_point"] = (row["bc_bytes"] - row["ball_bytes"]) / n / SCALAR_SIZE
        rows.append(row)
    dump(rows, args.out)


if __name__ == "__main__":
    main()
