"""Brute-force exact top-k, recall, and the on-disk ground-truth cache."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DataError, HyperplaneQuery, PointSet

GT_MAGIC = b"P2HG"
GT_VERSION = 1
TIE_TOL = 1e-6


def exact_topk(data: PointSet, q: HyperplaneQuery, k: int) -> list[tuple[int, float]]:
    """The ``k`` smallest ``|<x, q>|``, ordered by (distance, id)."""
    if not 1 <= k <= data.n:
        raise ValueError(f"k={k} outside [1, {data.n}]")
    coeffs = getattr(q, "coeffs", q)
    dist = np.abs(data.values @ np.asarray(coeffs, dtype=np.float64))
    if k < data.n:
        # keep every point tied with the k-th distance before the exact sort
        kth = np.partition(dist, k - 1)[k - 1]
        cand = np.flatnonzero(dist <= kth)
    else:
        cand = np.arange(data.n)
    top = cand[np.lexsort((data.ids[cand], dist[cand]))][:k]
    return [(int(data.ids[i]), float(dist[i])) for i in top]


def recall(result, truth, k: int) -> float:
    """Fraction of the exact top-``k`` found in ``result``.

    ``result`` and ``truth`` hold ``(id, distance)`` pairs. A returned point
    outside ``truth`` still counts when its distance equals the k-th true
    distance within 1e-6, so ties at the boundary are not penalized.
    """
    if not truth:
        raise ValueError("empty ground truth")
    truth = list(truth)[:k]
    true_ids = {int(i) for i, _ in truth}
    kth = float(truth[-1][1])
    hits = 0
    seen = set()
    for pid, dist in result:
        pid = int(pid)
        if pid in seen:
            continue
        seen.add(pid)
        if pid in true_ids or abs(float(dist) - kth) <= TIE_TOL:
            hits += 1
    return min(hits, k) / k


@dataclass(eq=False)
class GroundTruth:
    ids: np.ndarray  # (num_queries, k_max) uint32
    dists: np.ndarray  # (num_queries, k_max) float32
    query_fingerprint: int = 0
    data_fingerprint: int = 0

    @property
    def k_max(self) -> int:
        return self.ids.shape[1]

    def __len__(self) -> int:
        return self.ids.shape[0]

    def topk(self, qi: int, k: int) -> list[tuple[int, float]]:
        if k > self.k_max:
            raise DataError(f"ground truth holds {self.k_max} neighbours, {k} requested")
        return [(int(i), float(d)) for i, d in zip(self.ids[qi, :k], self.dists[qi, :k])]

    def to_bytes(self) -> bytes:
        nq, k_max = self.ids.shape
        recs = np.empty((nq, k_max), dtype=[("id", "<u4"), ("dist", "<f4")])
        recs["id"] = self.ids
        recs["dist"] = self.dists
        return GT_MAGIC + struct.pack("<III", GT_VERSION, k_max, nq) + recs.tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "GroundTruth":
        if len(buf) < 16 or buf[:4] != GT_MAGIC:
            raise DataError("not a ground-truth file (bad magic)")
        version, k_max, nq = struct.unpack_from("<III", buf, 4)
        if version != GT_VERSION:
            raise DataError(f"unsupported ground-truth version {version}")
        if len(buf) != 16 + 8 * k_max * nq:
            raise DataError("truncated ground-truth file")
        recs = np.frombuffer(buf, dtype=[("id", "<u4"), ("dist", "<f4")], offset=16).reshape(nq, k_max)
        return cls(recs["id"].copy(), recs["dist"].copy())

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "GroundTruth":
        return cls.from_bytes(Path(path).read_bytes())


def queries_fingerprint(queries) -> int:
    h = hashlib.blake2b(digest_size=8)
    for q in queries:
        h.update(np.ascontiguousarray(q.coeffs, dtype="<f8").tobytes())
    return int.from_bytes(h.digest(), "little")


def compute_ground_truth(data: PointSet, queries, k_max: int) -> GroundTruth:
    k_max = min(k_max, data.n)
    rows = [exact_topk(data, q, k_max) for q in queries]
    ids = np.array([[i for i, _ in r] for r in rows], dtype=np.uint32).reshape(len(rows), k_max)
    dists = np.array([[d for _, d in r] for r in rows], dtype=np.float32).reshape(len(rows), k_max)
    return GroundTruth(ids, dists, queries_fingerprint(queries), data.fingerprint())


def cache_path(cache_dir, data_fingerprint: int, query_seed: int, num_queries: int, k_max: int) -> Path:
    name = f"gt_{data_fingerprint:016x}_s{query_seed}_q{num_queries}_k{k_max}.p2hg"
    return Path(cache_dir) / name


def cached_ground_truth(cache_dir, data: PointSet, queries, query_seed: int, k_max: int, data_fingerprint=None):
    """Load the ground truth from ``cache_dir`` or compute and store it.

    Returns ``(ground_truth, path, hit)``.
    """
    fp = data.fingerprint() if data_fingerprint is None else data_fingerprint
    k_max = min(k_max, data.n)
    path = cache_path(cache_dir, fp, query_seed, len(queries), k_max)
    if path.exists():
        gt = GroundTruth.load(path)
        if len(gt) == len(queries) and gt.k_max == k_max:
            gt.data_fingerprint = fp
            gt.query_fingerprint = queries_fingerprint(queries)
            return gt, path, True
    gt = compute_ground_truth(data, queries, k_max)
    gt.data_fingerprint = fp
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    gt.save(tmp)
    tmp.replace(path)
    return gt, path, False
