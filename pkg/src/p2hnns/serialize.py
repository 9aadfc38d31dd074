"""Binary index files.

Layout, all little-endian::

    header  magic "P2HT" | version u32 | kind u8 | n u32 | d u32 | N0 u32 | seed u64
    nodes   pre-order records
            is_leaf u8 | size u32 | radius f64 | center d*f64
            leaf:   ids size*u32
            BC leaf additionally: r_x size*f64 | x_cos size*f64 | x_sin size*f64

Internal records are followed by their left subtree, then their right
subtree. The data points themselves are not stored; loading takes the
``PointSet`` the index was built on.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .ball_tree import BallTree
from .bc_tree import BCTree
from .data import DataError, PointSet

MAGIC = b"P2HT"
VERSION = 1
KINDS = {"ball": 0, "bc": 1}
SCALAR_SIZE = 8

_HEADER = struct.Struct("<4sIBIIIQ")
_NODE = struct.Struct("<BId")


def index_bytes(tree: BallTree) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, VERSION, KINDS[tree.kind], tree.data.n, tree.data.d, tree.leaf_size, tree.seed))
    is_bc = tree.kind == "bc"
    for node in range(tree.num_nodes):
        leaf = tree.is_leaf(node)
        size = int(tree.sizes[node])
        buf.write(_NODE.pack(int(leaf), size, float(tree.radii[node])))
        buf.write(tree.centers[node].astype("<f8").tobytes())
        if leaf:
            s = int(tree.starts[node])
            buf.write(tree.order[s:s + size].astype("<u4").tobytes())
            if is_bc:
                for arr in (tree.r_x, tree.x_cos, tree.x_sin):
                    buf.write(arr[s:s + size].astype("<f8").tobytes())
    return buf.getvalue()


def save_index(tree: BallTree, path) -> int:
    """Write ``tree`` to ``path`` and return the number of bytes written."""
    blob = index_bytes(tree)
    Path(path).write_bytes(blob)
    return len(blob)


def read_header(buf: bytes) -> dict:
    if len(buf) < _HEADER.size:
        raise DataError("truncated index header")
    magic, version, kind, n, d, leaf_size, seed = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise DataError("not an index file (bad magic)")
    if version != VERSION:
        raise DataError(f"unsupported index version {version}")
    names = {v: k for k, v in KINDS.items()}
    if kind not in names:
        raise DataError(f"unknown tree kind byte {kind}")
    return dict(kind=names[kind], n=n, d=d, leaf_size=leaf_size, seed=seed, version=version)


def index_from_bytes(buf: bytes, data: PointSet) -> BallTree:
    head = read_header(buf)
    n, d = head["n"], head["d"]
    if (data.n, data.d) != (n, d):
        raise DataError(f"index was built on n={n}, d={d}; got n={data.n}, d={data.d}")
    is_bc = head["kind"] == "bc"
    off = _HEADER.size
    starts, sizes, radii, centers, leaf_flags = [], [], [], [], []
    order = np.empty(n, dtype=np.int64)
    aux = np.empty((3, n)) if is_bc else None
    filled = 0
    try:
        while filled < n or not sizes:
            leaf, size, radius = _NODE.unpack_from(buf, off)
            off += _NODE.size
            centers.append(np.frombuffer(buf, "<f8", d, off))
            off += 8 * d
            sizes.append(size)
            radii.append(radius)
            leaf_flags.append(bool(leaf))
            starts.append(filled if leaf else -1)
            if leaf:
                order[filled:filled + size] = np.frombuffer(buf, "<u4", size, off)
                off += 4 * size
                if is_bc:
                    for j in range(3):
                        aux[j, filled:filled + size] = np.frombuffer(buf, "<f8", size, off)
                        off += 8 * size
                filled += size
    except (struct.error, ValueError) as exc:
        raise DataError(f"corrupt index file: {exc}") from None
    if off != len(buf) or filled != n:
        raise DataError("corrupt index file: trailing bytes or missing points")

    m = len(sizes)
    left = np.full(m, -1, dtype=np.int64)
    right = np.full(m, -1, dtype=np.int64)
    starts = np.array(starts, dtype=np.int64)
    # rebuild links from pre-order: each internal node's left child follows it,
    # its right child follows the left subtree
    pending = [] if leaf_flags[0] else [0]  # internal nodes still missing a child
    for node in range(1, m):
        if not pending:
            raise DataError("corrupt index file: node records do not form a tree")
        parent = pending[-1]
        if left[parent] < 0:
            left[parent] = node
        else:
            right[parent] = node
            pending.pop()
        if not leaf_flags[node]:
            pending.append(node)
    for node in range(m - 1, -1, -1):
        if starts[node] < 0:
            starts[node] = starts[left[node]]

    fields = dict(
        data=data,
        leaf_size=head["leaf_size"],
        seed=head["seed"],
        order=order,
        points=data.values[order].astype(np.float64),
        centers=np.array(centers, dtype=np.float64).reshape(m, d),
        radii=np.array(radii, dtype=np.float64),
        sizes=np.array(sizes, dtype=np.int64),
        starts=starts,
        left=left,
        right=right,
    )
    if is_bc:
        return BCTree(**fields, r_x=aux[0].copy(), x_cos=aux[1].copy(), x_sin=aux[2].copy())
    return BallTree(**fields)


def load_index(path, data: PointSet) -> BallTree:
    return index_from_bytes(Path(path).read_bytes(), data)
