"""Exact and budgeted point-to-hyperplane nearest neighbour search with Ball-Trees and BC-Trees."""

from . import ball_tree, bc_tree, bounds, data, oracle, serialize
from .data import (
    DataError,
    DegenerateQueryError,
    HyperplaneQuery,
    PointSet,
    append_dimension,
    gaussian_points,
    generate_queries,
    load_vectors,
    normalize_query,
)
from .oracle import exact_topk, recall

__all__ = [
    "ball_tree",
    "bc_tree",
    "bounds",
    "data",
    "oracle",
    "serialize",
    "DataError",
    "DegenerateQueryError",
    "HyperplaneQuery",
    "PointSet",
    "append_dimension",
    "gaussian_points",
    "generate_queries",
    "load_vectors",
    "normalize_query",
    "exact_topk",
    "recall",
]
