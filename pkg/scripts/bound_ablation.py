"""Point-level bound ablation: BC-Tree with and without its ball and cone bounds, plus Ball-Tree."""

import argparse
import time

from _common import add_data_args, dump, load, mean

from p2hnns import ball_tree, bc_tree
from p2hnns.data import generate_queries

VARIANTS = {"bc": (True, True), "bc_wo_cone": (True, False), "bc_wo_ball": (False, True), "bc_wo_both": (False, False)}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    add_data_args(p)
    p.add_argument("--k", type=int, nargs="+", default=[1, 10, 20, 40])
    p.add_argument("--n0", type=int, default=100)
    args = p.parse_args()

    data = load(args)
    ball = ball_tree.build(data, args.n0, seed=args.seed)
    bc = bc_tree.build(data, args.n0, seed=args.seed)
    queries = generate_queries(data, args.queries, seed=args.seed + 1)
    rows = []
    for k in args.k:
        searches = {"ball": lambda q: ball.search(q, k)}
        for name, (use_ball, use_cone) in VARIANTS.items():
            searches[name] = lambda q, ub=use_ball, uc=use_cone: bc_tree.search(bc, q, k, use_ball=ub, use_cone=uc)
        for name, run in searches.items():
            t0 = time.perf_counter()
            counters = [run(q)[1] for q in queries]
            ms = (time.perf_counter() - t0) * 1e3 / len(queries)
            rows.append(dict(
                algo=name,
                k=k,
                candidates=mean([c.candidates_verified for c in counters]),
                center_ips=mean([c.center_ip_count for c in counters]),
                leaves=mean([c.leaves_scanned for c in counters]),
                ms_per_query=ms,
            ))
    dump(rows, args.out)


if __name__ == "__main__":
    main()
