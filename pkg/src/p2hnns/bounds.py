"""Distance and lower-bound formulas for point-to-hyperplane search.

Everything here is stateless. Scalar functions take plain floats; the
``*_many`` variants vectorize over the points of a leaf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvariantError(ValueError):
    """Node sizes that violate ``|N| = |N.lc| + |N.rc|``."""


@dataclass(frozen=True)
class ConeEntry:
    """Per-point cone data relative to its leaf center.

    ``x_cos = |x| cos(phi)``, ``x_sin = |x| sin(phi)`` where ``phi`` is the
    angle between ``x`` and the center, and ``r_x = |x - center|``.
    """

    x_cos: float
    x_sin: float
    r_x: float


@dataclass(frozen=True)
class QueryLeafContext:
    ip_node: float
    q_cos: float
    q_sin: float
    q_norm: float


def p2h_distance(x, q) -> float:
    """``|<x, q>|`` for a dimension-appended point and a normalized query."""
    coeffs = getattr(q, "coeffs", q)
    x = np.asarray(x, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if x.shape != coeffs.shape:
        raise ValueError(f"dimension mismatch: point {x.shape} vs query {coeffs.shape}")
    return abs(float(np.dot(x, coeffs)))


def node_ball_bound(ip_qc: float, q_norm: float, radius: float) -> float:
    """Lower bound of ``|<x, q>|`` over a ball with center inner product ``ip_qc``."""
    return max(abs(ip_qc) - q_norm * radius, 0.0)


def point_ball_bound(ip_qc: float, q_norm: float, r_x: float) -> float:
    return max(abs(ip_qc) - q_norm * r_x, 0.0)


def point_ball_bound_many(ip_qc: float, q_norm: float, r_x: np.ndarray) -> np.ndarray:
    return np.maximum(abs(ip_qc) - q_norm * r_x, 0.0)


def query_leaf_context(ip_node: float, center_norm: float, q_norm: float) -> QueryLeafContext:
    """Split ``q`` into components along and across the leaf center.

    A center at the origin has no direction; ``q_cos`` is then 0, which
    collapses the cone bound to the trivially sound value 0.
    """
    q_cos = ip_node / center_norm if center_norm > 0.0 else 0.0
    q_sin = math.sqrt(max(q_norm * q_norm - q_cos * q_cos, 0.0))
    return QueryLeafContext(ip_node, q_cos, q_sin, q_norm)


def point_cone_bound(ctx: QueryLeafContext, entry: ConeEntry) -> float:
    a = ctx.q_cos * entry.x_cos
    b = ctx.q_sin * entry.x_sin
    lo, hi = a - b, a + b  # |x||q|cos(theta + phi), |x||q|cos|theta - phi|
    if lo > 0.0 and ctx.q_cos > 0.0 and entry.x_cos > 0.0:
        return lo
    if hi < 0.0:
        return -hi
    return 0.0


def point_cone_bound_many(q_cos: float, q_sin: float, x_cos: np.ndarray, x_sin: np.ndarray) -> np.ndarray:
    a = q_cos * x_cos
    b = q_sin * x_sin
    lo = a - b
    hi = a + b
    first = (lo > 0.0) & (x_cos > 0.0) if q_cos > 0.0 else np.zeros(lo.shape, dtype=bool)
    return np.where(first, lo, np.where(hi < 0.0, -hi, 0.0))


def cone_entry(x, center) -> ConeEntry:
    """Cone data of ``x`` against ``center`` (both dimension-appended)."""
    x = np.asarray(x, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    x_norm = float(np.linalg.norm(x))
    r_x = float(np.linalg.norm(x - center))
    c_norm = float(np.linalg.norm(center))
    if x_norm * c_norm == 0.0 or r_x == 0.0:
        return ConeEntry(x_norm, 0.0, r_x)
    cos_phi = min(max(float(np.dot(x, center)) / (x_norm * c_norm), -1.0), 1.0)
    sin_phi = math.sqrt(max(1.0 - cos_phi * cos_phi, 0.0))
    return ConeEntry(x_norm * cos_phi, x_norm * sin_phi, r_x)


def cone_entries_many(points: np.ndarray, center: np.ndarray):
    """Vectorized ``cone_entry`` for the rows of ``points``.

    ``center`` is one shared center or one center per row. Returns
    ``(r_x, x_cos, x_sin)`` as float64 arrays.
    """
    center = np.broadcast_to(center, points.shape)
    diff = points - center
    r_x = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    x_norm = np.sqrt(np.einsum("ij,ij->i", points, points))
    c_norm = np.sqrt(np.einsum("ij,ij->i", center, center))
    denom = x_norm * c_norm
    degenerate = (denom == 0.0) | (r_x == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_phi = np.clip(np.einsum("ij,ij->i", points, center) / denom, -1.0, 1.0)
    cos_phi[degenerate] = 1.0
    sin_phi = np.sqrt(np.maximum(1.0 - cos_phi * cos_phi, 0.0))
    return r_x, x_norm * cos_phi, x_norm * sin_phi


def child_ip(ip_parent: float, ip_left: float, n: int, n_l: int, n_r: int) -> float:
    """Inner product of ``q`` with the right child's center, derived in O(1).

    Uses ``n * c = n_l * c_l + n_r * c_r`` for node centers that are means.
    """
    if n != n_l + n_r or n_r < 1 or n_l < 0:
        raise InvariantError(f"sizes {n_l} + {n_r} do not add up to {n}")
    return (n / n_r) * ip_parent - (n_l / n_r) * ip_left
