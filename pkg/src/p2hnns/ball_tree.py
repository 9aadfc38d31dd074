"""Ball-Tree construction and depth-first branch-and-bound top-k search.

Nodes live in flat arrays indexed by pre-order id. Points are physically
permuted during construction so every node covers the contiguous span
``points[start:start + size]``; ``order`` maps span positions back to ids.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Optional

import numpy as np

from .bounds import node_ball_bound
from .data import HyperplaneQuery, PointSet

_EPS = float(np.finfo(np.float64).eps)

PREFERENCES = ("center", "lower_bound")

# on_prune(kind, what, lam): kind "node" passes a node id, kind "point" an
# array of point ids. Called whenever a subtree or point is skipped.
PruneHook = Callable[[str, object, float], None]


@dataclass
class Counters:
    center_ip_count: int = 0
    candidates_verified: int = 0
    nodes_visited: int = 0
    leaves_scanned: int = 0


class SearchState:
    """Bounded max-heap of the best ``k`` verified points plus counters."""

    def __init__(self, k: int, budget: Optional[float] = None):
        self.k = k
        self.budget = math.inf if budget is None else budget
        self.counters = Counters()
        self._heap: list[tuple[float, int]] = []  # (-distance, -id)

    @property
    def lam(self) -> float:
        if len(self._heap) < self.k:
            return math.inf
        return -self._heap[0][0]

    @property
    def remaining(self) -> float:
        return self.budget - self.counters.candidates_verified

    def exhausted(self) -> bool:
        return self.counters.candidates_verified >= self.budget

    def offer(self, dist: float, pid: int) -> bool:
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, (-dist, -pid))
            return True
        if dist < -self._heap[0][0]:
            heapq.heapreplace(self._heap, (-dist, -pid))
            return True
        return False

    def result(self) -> list[tuple[int, float]]:
        return sorted(((-i, -d) for d, i in self._heap), key=lambda t: (t[1], t[0]))


@dataclass(eq=False)
class BallTree:
    data: PointSet
    leaf_size: int
    seed: int
    order: np.ndarray  # (n,) point ids in span order
    points: np.ndarray  # (n, d) float64 rows of data in span order
    centers: np.ndarray  # (m, d) float64
    radii: np.ndarray  # (m,)
    sizes: np.ndarray  # (m,) int64
    starts: np.ndarray  # (m,) int64
    left: np.ndarray  # (m,) int64, -1 at leaves
    right: np.ndarray  # (m,) int64, -1 at leaves
    center_norms: np.ndarray = field(init=False)

    kind: ClassVar[str] = "ball"

    def __post_init__(self):
        self.center_norms = np.sqrt(np.einsum("ij,ij->i", self.centers, self.centers))
        self._nav = None

    @property
    def num_nodes(self) -> int:
        return len(self.sizes)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.left < 0)

    def node_ids(self, node: int) -> np.ndarray:
        s = self.starts[node]
        return self.order[s:s + self.sizes[node]]

    def nav(self):
        """Plain-list copies of the topology arrays; indexing lists is faster in the search loop."""
        if self._nav is None:
            self._nav = (
                self.left.tolist(),
                self.right.tolist(),
                self.radii.tolist(),
                self.starts.tolist(),
                self.sizes.tolist(),
            )
        return self._nav

    def search(self, q: HyperplaneQuery, k: int, budget=None, preference: str = "center", **kw):
        return search(self, q, k, budget=budget, preference=preference, **kw)


# --------------------------------------------------------------------------
# construction


def _sqdist(seg: np.ndarray, p: np.ndarray) -> np.ndarray:
    diff = seg - p
    return np.einsum("ij,ij->i", diff, diff)


def _argmax_lowest_id(dist: np.ndarray, ids: np.ndarray) -> int:
    hits = np.flatnonzero(dist == dist.max())
    if len(hits) == 1:
        return int(hits[0])
    return int(hits[np.argmin(ids[hits])])


def _seed_grow(seg: np.ndarray, ids: np.ndarray, v: int):
    d_l = _sqdist(seg, seg[v])
    pl = _argmax_lowest_id(d_l, ids)
    d_l = _sqdist(seg, seg[pl])
    pr = _argmax_lowest_id(d_l, ids)
    return pl, pr, d_l


def split_positions(seg: np.ndarray, ids: np.ndarray, v: int) -> tuple[int, int]:
    """Seed-grow pivots as positions into ``seg``, starting from position ``v``."""
    pl, pr, _ = _seed_grow(seg, ids, v)
    return pl, pr


def split(points, ids=None, rng=None) -> tuple[int, int]:
    """Pick two far-apart pivots of ``points`` and return their ids.

    ``pivot_l`` is the point furthest from a random seed point and
    ``pivot_r`` the point furthest from ``pivot_l``; ties go to the lowest id.
    """
    seg = np.asarray(points, dtype=np.float64)
    if seg.ndim == 1:
        seg = seg[:, None]
    if len(seg) < 2:
        raise ValueError("split needs at least two points")
    ids = np.arange(len(seg)) if ids is None else np.asarray(ids)
    rng = np.random.default_rng() if rng is None else rng
    pl, pr = split_positions(seg, ids, int(rng.integers(len(seg))))
    return int(ids[pl]), int(ids[pr])


def _partition(seg: np.ndarray, ids: np.ndarray, sqn: np.ndarray, rng: np.random.Generator) -> int:
    """Reorder ``seg``/``ids``/``sqn`` in place into (left, right); return the left size."""
    size = len(seg)
    pl, pr, d_l = _seed_grow(seg, ids, int(rng.integers(size)))
    if pl == pr:
        # every point coincides with the pivot: halve by position
        return (size + 1) // 2
    to_left = d_l <= _sqdist(seg, seg[pr])
    n_left = int(to_left.sum())
    perm = np.concatenate([np.flatnonzero(to_left), np.flatnonzero(~to_left)])
    seg[:] = seg[perm]
    ids[:] = ids[perm]
    sqn[:] = sqn[perm]
    return n_left


def _radius(seg: np.ndarray, center: np.ndarray, sqn: np.ndarray) -> float:
    """Max distance from ``center`` to the rows of ``seg``, given their squared norms.

    Expands the squared distance to avoid a temporary copy of ``seg``; the
    result is padded by the expansion's rounding error so it always covers.
    """
    cc = float(center @ center)
    r2 = float((sqn - 2.0 * (seg @ center)).max()) + cc
    pad = 8 * _EPS * (float(sqn.max()) + cc)
    return math.sqrt(max(r2, 0.0) + pad)


def grow(data: PointSet, leaf_size: int, seed: int, top_down_centers: bool = True) -> dict:
    """Recursive seed-grow partitioning shared by both tree kinds.

    With ``top_down_centers`` each node's mean and radius are computed before
    it is split; otherwise ``centers``/``radii`` are left for the caller.
    """
    if data.n < 1:
        raise ValueError("cannot build a tree on an empty point set")
    if leaf_size < 1:
        raise ValueError("leaf size must be at least 1")
    n = data.n
    points = data.values.astype(np.float64)
    order = np.arange(n, dtype=np.int64)
    sqn = np.einsum("ij,ij->i", points, points)
    rng = np.random.default_rng(seed)
    starts, sizes, left, right, centers, radii = [], [], [], [], [], []
    stack = [(0, n, -1, 0)]
    while stack:
        start, size, parent, side = stack.pop()
        nid = len(starts)
        starts.append(start)
        sizes.append(size)
        left.append(-1)
        right.append(-1)
        if parent >= 0:
            (left if side == 0 else right)[parent] = nid
        seg = points[start:start + size]
        if top_down_centers:
            c = seg.mean(axis=0)
            centers.append(c)
            radii.append(_radius(seg, c, sqn[start:start + size]))
        if size <= leaf_size:
            continue
        n_left = _partition(seg, order[start:start + size], sqn[start:start + size], rng)
        stack.append((start + n_left, size - n_left, nid, 1))
        stack.append((start, n_left, nid, 0))
    return dict(
        points=points,
        order=order,
        sqnorms=sqn,
        starts=np.array(starts, dtype=np.int64),
        sizes=np.array(sizes, dtype=np.int64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        centers=np.array(centers) if top_down_centers else None,
        radii=np.array(radii) if top_down_centers else None,
    )


def build(data: PointSet, leaf_size: int = 100, seed: int = 0) -> BallTree:
    g = grow(data, leaf_size, seed)
    del g["sqnorms"]
    return BallTree(data=data, leaf_size=leaf_size, seed=seed, **g)


# --------------------------------------------------------------------------
# search


def _check_query(tree: BallTree, q: HyperplaneQuery, k: int, preference: str) -> None:
    if q.d != tree.data.d:
        raise ValueError(f"query dimension {q.d} does not match data dimension {tree.data.d}")
    if not 1 <= k <= tree.data.n:
        raise ValueError(f"k={k} outside [1, {tree.data.n}]")
    if preference not in PREFERENCES:
        raise ValueError(f"unknown preference {preference!r}")


def _left_first(ip_l, ip_r, r_l, r_r, q_norm, preference) -> bool:
    if preference == "center":
        return abs(ip_l) <= abs(ip_r)
    return node_ball_bound(ip_l, q_norm, r_l) <= node_ball_bound(ip_r, q_norm, r_r)


def exhaustive_scan(tree: BallTree, node: int, q: HyperplaneQuery, state: SearchState) -> None:
    s = int(tree.starts[node])
    m = int(min(tree.sizes[node], state.remaining))
    dists = np.abs(tree.points[s:s + m] @ q.coeffs)
    state.counters.candidates_verified += m
    order = tree.order
    for i in np.flatnonzero(dists < state.lam).tolist():
        state.offer(float(dists[i]), int(order[s + i]))


def search(
    tree: BallTree,
    q: HyperplaneQuery,
    k: int,
    budget=None,
    preference: str = "center",
    on_prune: Optional[PruneHook] = None,
):
    """Top-k points by ``|<x, q>|``; returns ``(topk, counters)``.

    ``topk`` is a list of ``(id, distance)`` sorted by distance then id.
    With ``budget=None`` the answer is exact; otherwise traversal stops
    after ``budget`` candidate verifications.
    """
    _check_query(tree, q, k, preference)
    left, right, radii, _, _ = tree.nav()
    centers = tree.centers
    qv, qn = q.coeffs, q.norm
    state = SearchState(k, budget)
    c = state.counters
    c.center_ip_count += 1
    stack = [(0, float(centers[0] @ qv))]
    while stack and not state.exhausted():
        node, ip = stack.pop()
        c.nodes_visited += 1
        lam = state.lam
        if not node_ball_bound(ip, qn, radii[node]) < lam:
            if on_prune is not None:
                on_prune("node", node, lam)
            continue
        lc = left[node]
        if lc < 0:
            c.leaves_scanned += 1
            exhaustive_scan(tree, node, q, state)
            continue
        rc = right[node]
        ip_l = float(centers[lc] @ qv)
        ip_r = float(centers[rc] @ qv)
        c.center_ip_count += 2
        if _left_first(ip_l, ip_r, radii[lc], radii[rc], qn, preference):
            stack.append((rc, ip_r))
            stack.append((lc, ip_l))
        else:
            stack.append((lc, ip_l))
            stack.append((rc, ip_r))
    return state.result(), c
