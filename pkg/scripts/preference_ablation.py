"""Center vs lower-bound branch preference on a BC-Tree: recall and work per budget."""

import argparse
import time

from _common import add_data_args, dump, load, mean

from p2hnns import bc_tree
from p2hnns.bench import budget_label, parse_budget, resolve_budget
from p2hnns.data import generate_queries
from p2hnns.oracle import exact_topk, recall


def main():
    p = argparse.ArgumentParser(description=__doc__)
    add_data_args(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n0", type=int, default=100)
    p.add_argument("--budgets", default="1%,2%,5%,10%,20%,30%,50%,inf")
    args = p.parse_args()

    data = load(args)
    tree = bc_tree.build(data, args.n0, seed=args.seed)
    queries = generate_queries(data, args.queries, seed=args.seed + 1)
    truth = [exact_topk(data, q, args.k) for q in queries]
    rows = []
    for pref in ("center", "lower_bound"):
        for token in args.budgets.split(","):
            budget = parse_budget(token)
            cap = resolve_budget(budget, data.n, args.k)
            t0 = time.perf_counter()
            runs = [tree.search(q, args.k, budget=cap, preference=pref) for q in queries]
            ms = (time.perf_counter() - t0) * 1e3 / len(queries)
            rows.append(dict(
                preference=pref,
                budget=budget_label(budget),
                recall=mean([recall(r, t, args.k) for (r, _), t in zip(runs, truth)]),
                candidates=mean([c.candidates_verified for _, c in runs]),
                nodes=mean([c.nodes_visited for _, c in runs]),
                ms_per_query=ms,
            ))
    dump(rows, args.out)


if __name__ == "__main__":
    main()
