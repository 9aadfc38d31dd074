"""Effect of the leaf capacity N0 on build cost, index size and exact-search work."""

import argparse
import time

from _common import add_data_args, dump, load, mean

from p2hnns import ball_tree, bc_tree
from p2hnns.data import generate_queries
from p2hnns.serialize import index_bytes


def main():
    p = argparse.ArgumentParser(description=__doc__)
    add_data_args(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n0", type=int, nargs="+", default=[100, 200, 500, 1000, 2000, 5000, 10000])
    args = p.parse_args()

    data = load(args)
    queries = generate_queries(data, args.queries, seed=args.seed + 1)
    rows = []
    for n0 in args.n0:
        for kind, mod in (("ball", ball_tree), ("bc", bc_tree)):
            t0 = time.perf_counter()
            tree = mod.build(data, n0, seed=args.seed)
            build_s = time.perf_counter() - t0
            t0 = time.perf_counter()
            counters = [tree.search(q, args.k)[1] for q in queries]
            ms = (time.perf_counter() - t0) * 1e3 / len(queries)
            rows.append(dict(
                kind=kind,
                n0=n0,
                build_s=build_s,
                index_mb=len(index_bytes(tree)) / 2**20,
                candidates=mean([c.candidates_verified for c in counters]),
                ms_per_query=ms,
            ))
    dump(rows, args.out)


if __name__ == "__main__":
    main()
