"""BC-Tree: a Ball-Tree with per-point ball and cone data in its leaves.

Internal centers are combined from the children's centers and sizes, and
the search derives the right child's center inner product from the parent
and left child instead of computing it. Inside a leaf, points are kept in
descending order of their distance to the leaf center so the point-level
ball bound can cut off the rest of the leaf at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np

from .ball_tree import BallTree, PruneHook, SearchState, _check_query, _left_first, _radius, exhaustive_scan, grow
from .bounds import (
    QueryLeafContext,
    child_ip,
    cone_entries_many,
    node_ball_bound,
    point_ball_bound_many,
    point_cone_bound_many,
    query_leaf_context,
)
from .data import HyperplaneQuery, PointSet


@dataclass(eq=False)
class BCTree(BallTree):
    r_x: np.ndarray  # (n,) aligned with order
    x_cos: np.ndarray
    x_sin: np.ndarray

    kind: ClassVar[str] = "bc"

    def search(self, q: HyperplaneQuery, k: int, budget=None, preference: str = "center", **kw):
        return search(self, q, k, budget=budget, preference=preference, **kw)


def _leaf_sort(order: np.ndarray, r_x: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Permutation sorting by (label, -r_x, id); same as lexsort but cheaper."""
    n = len(order)
    by_id = np.empty(n, dtype=np.int64)
    by_id[order] = np.arange(n)
    by_r = by_id[np.argsort(-r_x[by_id], kind="stable")]
    rank = np.empty(n, dtype=np.int64)
    rank[by_r] = np.arange(n)
    return np.argsort(label * n + rank, kind="stable")


def build(data: PointSet, leaf_size: int = 100, seed: int = 0) -> BCTree:
    g = grow(data, leaf_size, seed, top_down_centers=False)
    points, order, sqn = g["points"], g["order"], g["sqnorms"]
    starts, sizes, left, right = g["starts"], g["sizes"], g["left"], g["right"]
    m, d = len(sizes), data.d
    centers = np.empty((m, d))
    radii = np.empty(m)

    # leaves tile 0..n-1 in pre-order, so all leaf work is done in one pass
    leaves = np.flatnonzero(left < 0)
    l_start, l_size = starts[leaves], sizes[leaves]
    leaf_centers = np.add.reduceat(points, l_start, axis=0) / l_size[:, None]
    per_point = np.repeat(leaf_centers, l_size, axis=0)
    label = np.repeat(np.arange(len(leaves)), l_size)
    r_x, x_cos, x_sin = cone_entries_many(points, per_point)
    perm = _leaf_sort(order, r_x, label)
    points[:] = points[perm]
    order[:] = order[perm]
    sqn[:] = sqn[perm]
    r_x, x_cos, x_sin = r_x[perm], x_cos[perm], x_sin[perm]
    centers[leaves] = leaf_centers
    radii[leaves] = r_x[l_start]  # largest r_x comes first in each leaf

    # pre-order ids: every child has a larger id than its parent
    for node in np.flatnonzero(left >= 0)[::-1]:
        lc, rc = left[node], right[node]
        s, size = int(starts[node]), int(sizes[node])
        c = (sizes[lc] * centers[lc] + sizes[rc] * centers[rc]) / size
        centers[node] = c
        radii[node] = _radius(points[s:s + size], c, sqn[s:s + size])
    return BCTree(
        data=data,
        leaf_size=leaf_size,
        seed=seed,
        order=order,
        points=points,
        centers=centers,
        radii=radii,
        sizes=sizes,
        starts=starts,
        left=left,
        right=right,
        r_x=r_x,
        x_cos=x_cos,
        x_sin=x_sin,
    )


def _leaf_bounds(tree, s, m, ctx, lam, use_ball, use_cone):
    """Combined point bounds of a leaf and the batch-break position for ``lam``."""
    if use_ball:
        lb_ball = point_ball_bound_many(ctx.ip_node, ctx.q_norm, tree.r_x[s:s + m])
        end = int(np.searchsorted(lb_ball, lam, side="left"))
    else:
        lb_ball, end = None, m
    lb_cone = None
    if use_cone:
        lb_cone = point_cone_bound_many(ctx.q_cos, ctx.q_sin, tree.x_cos[s:s + end], tree.x_sin[s:s + end])
    return lb_ball, lb_cone, end


def scan_with_pruning(
    tree: BCTree,
    node: int,
    q: HyperplaneQuery,
    ctx: QueryLeafContext,
    state: SearchState,
    use_ball: bool = True,
    use_cone: bool = True,
    on_prune: Optional[PruneHook] = None,
) -> None:
    """Scan one leaf, skipping points whose bounds already reach ``lam``.

    Semantically a sequential walk over the stored order: a point is verified
    iff its bounds are below the ``lam`` in force when the walk reaches it.
    Only heap improvements move ``lam``, and only points closer than the
    starting ``lam`` can improve, so those few are replayed in order and the
    rest is settled in one vectorized pass. A leaf that could exhaust the
    budget part-way is handed to :func:`scan_rounds`.
    """
    if not (use_ball or use_cone):
        exhaustive_scan(tree, node, q, state)
        return
    s, m = int(tree.starts[node]), int(tree.sizes[node])
    lam0 = state.lam
    lb_ball, lb_cone, end = _leaf_bounds(tree, s, m, ctx, lam0, use_ball, use_cone)
    if use_ball and use_cone:
        lb = np.maximum(lb_ball[:end], lb_cone)
    else:
        lb = lb_ball[:end] if use_ball else lb_cone
    cand = np.flatnonzero(lb < lam0)
    if len(cand) == 0:
        if on_prune is not None:
            on_prune("point", tree.order[s:s + m], lam0)
        return
    if len(cand) > state.remaining:
        scan_rounds(tree, node, q, ctx, state, use_ball, use_cone, on_prune)
        return
    order = tree.order
    dists = np.abs(tree.points[s + cand] @ q.coeffs)
    cut_at, cut_lam = [], []  # lam changes right after cand[cut_at[i]]
    for i in np.flatnonzero(dists < lam0).tolist():
        lam = state.lam
        if lb[cand[i]] < lam and dists[i] < lam:
            state.offer(float(dists[i]), int(order[s + cand[i]]))
            if state.lam < lam:
                cut_at.append(i)
                cut_lam.append(state.lam)
    if cut_at:
        lam_seen = np.array([lam0] + cut_lam)[np.searchsorted(cut_at, np.arange(len(cand)), side="left")]
        verified = lb[cand] < lam_seen
    else:
        lam_seen = None
        verified = np.ones(len(cand), dtype=bool)
    state.counters.candidates_verified += int(verified.sum())
    if on_prune is None:
        return
    skipped = np.ones(m, dtype=bool)
    skipped[cand[verified]] = False
    lam_at = np.full(m, lam0)
    if lam_seen is not None:
        lam_at[cand] = lam_seen
        # points between candidates are skipped under the lam of the next candidate
        nxt = np.searchsorted(cand, np.arange(m), side="left")
        inner = nxt < len(cand)
        lam_at[inner] = lam_seen[nxt[inner]]
        lam_at[~inner] = state.lam
    for lam in np.unique(lam_at[skipped]):
        on_prune("point", order[s + np.flatnonzero(skipped & (lam_at == lam))], float(lam))


def scan_rounds(
    tree: BCTree,
    node: int,
    q: HyperplaneQuery,
    ctx: QueryLeafContext,
    state: SearchState,
    use_ball: bool = True,
    use_cone: bool = True,
    on_prune: Optional[PruneHook] = None,
) -> None:
    """Reference leaf scan that honours the budget point by point.

    Evaluated in rounds: each round verifies, in one batch, every surviving
    point up to and including the first one that improves the heap.
    """
    s, m = int(tree.starts[node]), int(tree.sizes[node])
    order = tree.order
    lam = state.lam
    lb_ball, lb_cone, end = _leaf_bounds(tree, s, m, ctx, lam, use_ball, use_cone)
    keep = np.arange(end)
    if use_cone:
        cone_ok = lb_cone < lam
        if on_prune is not None and not cone_ok.all():
            on_prune("point", order[s + keep[~cone_ok]], lam)
        keep = keep[cone_ok]
    dists = np.abs(tree.points[s + keep] @ q.coeffs)

    pos = 0
    while pos < len(keep):
        if state.exhausted():
            return
        lam = state.lam
        cand = keep[pos:]
        cut = int(np.searchsorted(lb_ball[cand], lam, side="left")) if use_ball else len(cand)
        ok = lb_cone[cand[:cut]] < lam if use_cone else np.ones(cut, dtype=bool)
        better = np.flatnonzero(ok & (dists[pos:pos + cut] < lam))
        hit = int(better[0]) if len(better) else None
        span = cut if hit is None else hit + 1
        n_ver = int(ok[:span].sum())
        if n_ver > state.remaining:
            state.counters.candidates_verified += int(state.remaining)
            return
        state.counters.candidates_verified += n_ver
        if on_prune is not None and not ok[:span].all():
            on_prune("point", order[s + cand[:span][~ok[:span]]], lam)
        if hit is None:
            if on_prune is not None and cut < len(cand):
                on_prune("point", order[s + cand[cut:]], lam)
            break
        state.offer(float(dists[pos + hit]), int(order[s + cand[hit]]))
        pos += hit + 1
    if on_prune is not None and end < m:
        on_prune("point", order[s + end:s + m], state.lam)


def search(
    tree: BCTree,
    q: HyperplaneQuery,
    k: int,
    budget=None,
    preference: str = "center",
    use_ball: bool = True,
    use_cone: bool = True,
    on_prune: Optional[PruneHook] = None,
):
    """Top-k search; same contract as :func:`p2hnns.ball_tree.search`.

    ``use_ball`` / ``use_cone`` switch the point-level bounds off for
    ablation; with both off leaves are scanned exhaustively.
    """
    _check_query(tree, q, k, preference)
    left, right, radii, _, sizes = tree.nav()
    centers, center_norms = tree.centers, tree.center_norms
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
            ctx = query_leaf_context(ip, float(center_norms[node]), qn)
            scan_with_pruning(tree, node, q, ctx, state, use_ball, use_cone, on_prune)
            continue
        rc = right[node]
        ip_l = float(centers[lc] @ qv)
        c.center_ip_count += 1
        ip_r = child_ip(ip, ip_l, sizes[node], sizes[lc], sizes[rc])
        if _left_first(ip_l, ip_r, radii[lc], radii[rc], qn, preference):
            stack.append((rc, ip_r))
            stack.append((lc, ip_l))
        else:
            stack.append((lc, ip_l))
            stack.append((rc, ip_r))
    return state.result(), c
