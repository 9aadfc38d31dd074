"""Benchmark harness: index builds, ground truth, parameter sweeps and reports."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import ball_tree, bc_tree
from .data import DataError, PointSet, file_fingerprint, generate_queries, load_vectors
from .oracle import GroundTruth, cached_ground_truth, exact_topk, recall
from .serialize import index_bytes, save_index

ALGORITHMS = ("ball", "bc", "bc_wo_cone", "bc_wo_ball", "bc_wo_both", "oracle")
CSV_SCHEMA = "p2hnns-bench v1"
CSV_FIELDS = (
    "algo",
    "n0",
    "k",
    "budget",
    "preference",
    "rep",
    "query",
    "recall",
    "time_us",
    "candidates_verified",
    "center_ip_count",
    "nodes_visited",
    "leaves_scanned",
)
COUNTERS = ("candidates_verified", "center_ip_count", "nodes_visited", "leaves_scanned")

# bc variants -> (use_ball, use_cone)
_BC_FLAGS = {
    "bc": (True, True),
    "bc_wo_cone": (True, False),
    "bc_wo_ball": (False, True),
    "bc_wo_both": (False, False),
}


def tree_kind(algo: str) -> Optional[str]:
    if algo == "ball":
        return "ball"
    if algo in _BC_FLAGS:
        return "bc"
    return None


def parse_budget(token) -> object:
    """``"inf"`` -> None, ``"5%"``/``"0.05"`` -> fraction of n, ``"500"`` -> absolute cap."""
    if token is None:
        return None
    if isinstance(token, (int, float)) and not isinstance(token, bool):
        if math.isinf(token):
            return None
        return float(token) if isinstance(token, float) else int(token)
    tok = str(token).strip().lower()
    if tok in ("inf", "none", "exact", "∞"):
        return None
    try:
        if tok.endswith("%"):
            frac = float(tok[:-1]) / 100.0
        elif any(ch in tok for ch in ".e"):
            frac = float(tok)
        else:
            value = int(tok)
            if value < 1:
                raise ValueError
            return value
    except ValueError:
        raise ValueError(f"bad budget {token!r}") from None
    if not 0.0 < frac <= 1.0:
        raise ValueError(f"budget fraction {token!r} outside (0, 1]")
    return frac


def resolve_budget(budget, n: int, k: int) -> Optional[int]:
    """Absolute verification cap; fractions of ``n`` round up and never go below ``k``."""
    if budget is None:
        return None
    if isinstance(budget, float):
        return max(math.ceil(budget * n), k)
    return int(budget)


def budget_label(budget) -> str:
    if budget is None:
        return "inf"
    if isinstance(budget, float):
        return f"{budget * 100:g}%"
    return str(budget)


@dataclass
class BenchConfig:
    data: str = ""
    fmt: str = "fvecs"
    algorithms: list = field(default_factory=lambda: ["bc"])
    leaf_sizes: list = field(default_factory=lambda: [100])
    ks: list = field(default_factory=lambda: [10])
    budgets: list = field(default_factory=lambda: [None])
    preferences: list = field(default_factory=lambda: ["center"])
    seed: int = 0
    num_queries: int = 100
    out: str = "bench"
    reps: int = 1
    threads: int = 1
    cache_dir: Optional[str] = None
    gt_path: Optional[str] = None

    def __post_init__(self):
        for name in ("algorithms", "leaf_sizes", "ks", "budgets", "preferences"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithm(s) {bad}; expected {ALGORITHMS}")
        bad = [p for p in self.preferences if p not in ball_tree.PREFERENCES]
        if bad:
            raise ValueError(f"unknown preference(s) {bad}")
        if self.reps < 1 or self.threads < 1 or self.num_queries < 1:
            raise ValueError("reps, threads and queries must be positive")
        if any(k < 1 for k in self.ks) or any(n0 < 1 for n0 in self.leaf_sizes):
            raise ValueError("k and N0 must be positive")
        self.budgets = [parse_budget(b) for b in self.budgets]


def load_dataset(cfg: BenchConfig):
    """Load the configured data set; returns ``(points, fingerprint)``."""
    path = Path(cfg.data)
    if not path.is_file():
        raise DataError(f"data file {cfg.data!r} not found")
    return load_vectors(path, cfg.fmt), file_fingerprint(path)


def build_tree(kind: str, data: PointSet, leaf_size: int, seed: int):
    """Build one index; returns ``(tree, seconds)``."""
    mod = ball_tree if kind == "ball" else bc_tree
    t0 = time.perf_counter()
    tree = mod.build(data, leaf_size, seed)
    return tree, time.perf_counter() - t0


def run_query(tree, data: PointSet, algo: str, q, k: int, budget, preference: str):
    """One timed query; returns ``(topk, counters dict, microseconds)``."""
    t0 = time.perf_counter_ns()
    if algo == "oracle":
        topk = exact_topk(data, q, k)
        counters = dict(candidates_verified=data.n, center_ip_count=0, nodes_visited=0, leaves_scanned=0)
    elif algo == "ball":
        topk, c = ball_tree.search(tree, q, k, budget, preference)
        counters = asdict(c)
    else:
        use_ball, use_cone = _BC_FLAGS[algo]
        topk, c = bc_tree.search(tree, q, k, budget, preference, use_ball=use_ball, use_cone=use_cone)
        counters = asdict(c)
    return topk, counters, (time.perf_counter_ns() - t0) / 1000.0


def _summary(values) -> dict:
    a = np.asarray(values, dtype=np.float64)
    return {"mean": float(a.mean()), "min": float(a.min()), "max": float(a.max())}


def _index_path(out: str, kind: str, leaf_size: int, many: bool) -> Path:
    path = Path(out)
    if not many:
        return path
    return path.with_name(f"{path.stem}.{kind}.n0{leaf_size}{path.suffix or '.p2ht'}")


def cmd_build(cfg: BenchConfig) -> list[dict]:
    """Build and persist one index per (tree kind, N0); returns build stats."""
    data, fp = load_dataset(cfg)
    kinds = sorted({tree_kind(a) for a in cfg.algorithms} - {None})
    if not kinds:
        raise ValueError("nothing to build: choose ball or a bc variant")
    many = len(kinds) * len(cfg.leaf_sizes) > 1
    stats = []
    for kind in kinds:
        for n0 in cfg.leaf_sizes:
            tree, secs = build_tree(kind, data, n0, cfg.seed)
            path = _index_path(cfg.out, kind, n0, many)
            path.parent.mkdir(parents=True, exist_ok=True)
            size = save_index(tree, path)
            stats.append(
                dict(kind=kind, n0=n0, path=str(path), build_time_s=secs, index_bytes=size,
                     num_nodes=tree.num_nodes, n=data.n, d=data.d, data_fingerprint=f"{fp:016x}")
            )
    return stats


def cmd_groundtruth(cfg: BenchConfig) -> dict:
    data, fp = load_dataset(cfg)
    queries = generate_queries(data, cfg.num_queries, cfg.seed)
    cache = cfg.cache_dir or str(Path(cfg.out).parent / "gt_cache")
    gt, path, hit = cached_ground_truth(cache, data, queries, cfg.seed, max(cfg.ks), data_fingerprint=fp)
    return dict(path=str(path), hit=hit, k_max=gt.k_max, queries=len(gt), data_fingerprint=f"{fp:016x}")


def cmd_bench(cfg: BenchConfig) -> dict:
    """Run the full sweep and write ``<out>.csv`` and ``<out>.json``."""
    data, fp = load_dataset(cfg)
    queries = generate_queries(data, cfg.num_queries, cfg.seed)
    k_need = max(cfg.ks)
    if cfg.gt_path:
        gt = GroundTruth.load(cfg.gt_path)
        if len(gt) != len(queries):
            raise DataError(f"ground truth has {len(gt)} queries, {len(queries)} configured")
    else:
        cache = cfg.cache_dir or str(Path(cfg.out).parent / "gt_cache")
        gt, _, _ = cached_ground_truth(cache, data, queries, cfg.seed, k_need, data_fingerprint=fp)
    if gt.k_max < min(k_need, data.n):
        raise DataError(f"ground truth holds {gt.k_max} neighbours, k={k_need} requested")
    report = run_sweep(cfg, data, queries, gt)
    report["dataset"] = dict(path=cfg.data, format=cfg.fmt, n=data.n, d=data.d, fingerprint=f"{fp:016x}")
    write_report(report, cfg.out)
    return report


def run_sweep(cfg: BenchConfig, data: PointSet, queries, gt: GroundTruth) -> dict:
    """Sweep every (algo, N0, k, budget, preference) point over all queries and reps."""
    rows, points, indexes = [], [], []
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for n0 in cfg.leaf_sizes:
            trees = {}
            for kind in sorted({tree_kind(a) for a in cfg.algorithms} - {None}):
                tree, secs = build_tree(kind, data, n0, cfg.seed)
                trees[kind] = tree
                indexes.append(dict(kind=kind, n0=n0, build_time_s=secs, index_bytes=len(index_bytes(tree)),
                                    num_nodes=tree.num_nodes))
            for algo in cfg.algorithms:
                tree = trees.get(tree_kind(algo))
                for k in cfg.ks:
                    k_eff = min(k, data.n)
                    for budget in cfg.budgets:
                        cap = resolve_budget(budget, data.n, k_eff)
                        for pref in cfg.preferences:
                            point_rows = _run_point(pool, cfg, tree, data, queries, gt, algo, n0, k_eff, budget, cap, pref)
                            rows.extend(point_rows)
                            points.append(_aggregate(point_rows, cfg.reps))
    finally:
        if pool is not None:
            pool.shutdown()
    config = asdict(cfg)
    config["budgets"] = [budget_label(b) for b in cfg.budgets]
    return dict(schema=CSV_SCHEMA, config=config, indexes=indexes, points=points, rows=rows)


def _run_point(pool, cfg, tree, data, queries, gt, algo, n0, k, budget, cap, pref) -> list[dict]:
    def one(qi):
        topk, counters, us = run_query(tree, data, algo, queries[qi], k, cap, pref)
        return qi, recall(topk, gt.topk(qi, k), k), us, counters

    rows = []
    for rep in range(cfg.reps):
        results = pool.map(one, range(len(queries))) if pool else map(one, range(len(queries)))
        for qi, rec, us, counters in results:
            rows.append(dict(algo=algo, n0=n0, k=k, budget=budget_label(budget), preference=pref, rep=rep,
                             query=qi, recall=rec, time_us=us, **counters))
    return rows


def _aggregate(rows: list[dict], reps: int) -> dict:
    head = {key: rows[0][key] for key in ("algo", "n0", "k", "budget", "preference")}
    head["rows"] = len(rows)
    head["recall"] = _summary([r["recall"] for r in rows])
    head["time_us"] = _summary([r["time_us"] for r in rows])
    head["time_us_per_rep"] = [
        float(np.mean([r["time_us"] for r in rows if r["rep"] == rep])) for rep in range(reps)
    ]
    for name in COUNTERS:
        vals = [r[name] for r in rows]
        head[name] = dict(_summary(vals), total=int(sum(vals)))
    return head


def write_report(report: dict, out) -> tuple[Path, Path]:
    """Write per-row CSV and aggregate JSON next to each other."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out.with_suffix(".csv")
    json_path = out.with_suffix(".json")
    with open(csv_path, "w", newline="") as f:
        f.write(f"# {CSV_SCHEMA}\n")
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in report["rows"]:
            writer.writerow({key: repr(v) if isinstance(v, float) else v for key, v in row.items()})
    doc = {key: v for key, v in report.items() if key != "rows"}
    json_path.write_text(json.dumps(doc, indent=2))
    return csv_path, json_path


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as f:
        first = f.readline().strip()
        if first != f"# {CSV_SCHEMA}":
            raise DataError(f"unexpected CSV schema line {first!r}")
        return list(csv.DictReader(f))
