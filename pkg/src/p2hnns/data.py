"""Point sets, hyperplane queries, vector-file ingestion and query generation.

Data points ``p`` in ``R^(d-1)`` are stored dimension-appended as
``x = (p; 1)`` so that the point-to-hyperplane distance of ``p`` to the
hyperplane ``q`` becomes ``|<x, q>|`` once the normal part of ``q`` has unit
length.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMATS = ("fvecs", "bvecs", "csv", "raw_f32")

_EPS = np.finfo(np.float64).eps


class DataError(ValueError):
    """Malformed, empty or non-finite input data."""


class DegenerateQueryError(ValueError):
    """A hyperplane whose normal vector is all zeros."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def append_dimension(raw) -> np.ndarray:
    """Return ``(raw; 1)``. Works on a single point or on an ``(n, d-1)`` matrix."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim == 0 or raw.shape[-1] < 1:
        raise DataError("a point needs at least one coordinate")
    if not np.all(np.isfinite(raw)):
        raise DataError("non-finite coordinate in input")
    ones = np.ones(raw.shape[:-1] + (1,), dtype=raw.dtype)
    return np.concatenate([raw, ones], axis=-1)


@dataclass(frozen=True, eq=False)
class PointSet:
    """Deduplicated, dimension-appended data points.

    ``values`` is an ``(n, d)`` float32 matrix whose last column is 1.
    ``ids`` are ``0..n-1`` in file order after deduplication.
    """

    values: np.ndarray
    ids: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def raw(self) -> np.ndarray:
        """The points without the appended coordinate."""
        return self.values[:, :-1]

    @classmethod
    def from_raw(cls, raw) -> "PointSet":
        raw = np.asarray(raw)
        if raw.ndim != 2 or raw.shape[0] == 0:
            raise DataError("expected a non-empty 2-d array of points")
        if raw.shape[1] < 1:
            raise DataError("points need at least one coordinate")
        raw = raw.astype(np.float32)
        if not np.all(np.isfinite(raw)):
            raise DataError("non-finite coordinate in input")
        values = np.empty((raw.shape[0], raw.shape[1] + 1), dtype=np.float32)
        values[:, :-1] = raw
        values[:, -1] = 1.0
        values = dedup_rows(values)
        return cls(_readonly(values), _readonly(np.arange(values.shape[0], dtype=np.int64)))

    def fingerprint(self) -> int:
        """64-bit hash of the stored values."""
        h = hashlib.blake2b(digest_size=8)
        h.update(struct.pack("<QQ", self.n, self.d))
        h.update(np.ascontiguousarray(self.values).tobytes())
        return int.from_bytes(h.digest(), "little")


def dedup_rows(values: np.ndarray) -> np.ndarray:
    """Drop rows that are bitwise equal to an earlier row, keeping file order."""
    values = np.ascontiguousarray(values)
    rows = values.view(np.dtype((np.void, values.dtype.itemsize * values.shape[1]))).ravel()
    _, first = np.unique(rows, return_index=True)
    if len(first) == values.shape[0]:
        return values
    return values[np.sort(first)]


@dataclass(frozen=True, eq=False)
class HyperplaneQuery:
    """Hyperplane ``{x : <x, coeffs> = 0}`` with a unit-length normal part."""

    coeffs: np.ndarray
    norm: float

    @property
    def d(self) -> int:
        return self.coeffs.shape[0]


def normalize_query(raw) -> HyperplaneQuery:
    """Rescale ``raw`` so its first ``d-1`` coordinates have unit norm.

    Inputs already normalized to within a few ulps are returned unscaled,
    which makes the operation exactly idempotent.
    """
    if isinstance(raw, HyperplaneQuery):
        raw = raw.coeffs
    q = np.array(raw, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] < 2:
        raise DataError("a query needs at least two coefficients")
    if not np.all(np.isfinite(q)):
        raise DataError("non-finite query coefficient")
    s = math.sqrt(float(np.dot(q[:-1], q[:-1])))
    if s == 0.0:
        raise DegenerateQueryError("hyperplane normal vector is all zeros")
    if abs(s - 1.0) > 8 * _EPS:
        q = q / s
    return HyperplaneQuery(_readonly(q), float(np.linalg.norm(q)))


def generate_queries(data: PointSet, count: int, seed: int) -> list[HyperplaneQuery]:
    """Random hyperplanes that cut through the data cloud.

    Each normal is an isotropic Gaussian direction. The offset places the
    hyperplane through a uniformly drawn data point, jittered by Gaussian
    noise with standard deviation 0.05 times the mean point norm.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    raw = data.raw.astype(np.float64)
    sigma = 0.05 * float(np.linalg.norm(raw, axis=1).mean())
    normals = rng.standard_normal((count, data.d - 1))
    anchors = rng.integers(0, data.n, size=count)
    noise = rng.normal(0.0, 1.0, size=count) * sigma
    queries = []
    for normal, a, eps in zip(normals, anchors, noise):
        length = np.linalg.norm(normal)
        while length == 0.0:  # pragma: no cover - probability zero
            normal = rng.standard_normal(data.d - 1)
            length = np.linalg.norm(normal)
        normal = normal / length
        offset = -float(np.dot(normal, raw[a])) + eps
        queries.append(normalize_query(np.append(normal, offset)))
    return queries


def gaussian_points(n: int, dim: int, seed: int) -> PointSet:
    """Standard Gaussian synthetic data set with ``dim`` raw coordinates."""
    rng = np.random.default_rng(seed)
    return PointSet.from_raw(rng.standard_normal((n, dim)).astype(np.float32))


def clustered_points(n: int, dim: int, seed: int, clusters: int = 50, spread: float = 0.1) -> PointSet:
    """Gaussian mixture with unit-variance cluster centers."""
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((clusters, dim))
    labels = rng.integers(0, clusters, size=n)
    raw = centers[labels] + spread * rng.standard_normal((n, dim))
    return PointSet.from_raw(raw.astype(np.float32))


# --------------------------------------------------------------------------
# file formats


def load_vectors(path, fmt: str) -> PointSet:
    return PointSet.from_raw(read_raw(path, fmt))


def read_raw(path, fmt: str) -> np.ndarray:
    """Read the raw ``(n, d-1)`` vectors of a file without appending or dedup."""
    if fmt not in FORMATS:
        raise DataError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    buf = Path(path).read_bytes()
    empty = not buf.strip() if fmt == "csv" else not buf
    if empty:
        raise DataError(f"{path}: empty file")
    if fmt == "fvecs":
        return _read_xvecs(buf, np.dtype("<f4"), path)
    if fmt == "bvecs":
        return _read_xvecs(buf, np.dtype("u1"), path)
    if fmt == "raw_f32":
        return _read_raw_f32(buf, path)
    return _read_csv(buf.decode("ascii", errors="strict"), path)


def _read_xvecs(buf: bytes, dtype: np.dtype, path) -> np.ndarray:
    if len(buf) < 4:
        raise DataError(f"{path}: truncated record header")
    dim = struct.unpack_from("<i", buf, 0)[0]
    if dim < 1:
        raise DataError(f"{path}: record dimension {dim} is not positive")
    rec = 4 + dim * dtype.itemsize
    if len(buf) % rec:
        raise DataError(f"{path}: file size {len(buf)} is not a multiple of record size {rec}")
    n = len(buf) // rec
    if dtype.itemsize == 4:
        table = np.frombuffer(buf, dtype="<i4").reshape(n, dim + 1)
        dims = table[:, 0]
        payload = table[:, 1:].view(dtype)
    else:
        table = np.frombuffer(buf, dtype=np.uint8).reshape(n, rec)
        dims = table[:, :4].copy().view("<i4").ravel()
        payload = table[:, 4:]
    if np.any(dims != dim):
        bad = int(np.nonzero(dims != dim)[0][0])
        raise DataError(f"{path}: record {bad} has dimension {int(dims[bad])}, expected {dim}")
    return np.array(payload, dtype=np.float32)


def _read_raw_f32(buf: bytes, path) -> np.ndarray:
    if len(buf) < 8:
        raise DataError(f"{path}: truncated raw_f32 header")
    n, dim = struct.unpack_from("<II", buf, 0)
    if n == 0 or dim == 0:
        raise DataError(f"{path}: empty raw_f32 payload")
    if len(buf) != 8 + 4 * n * dim:
        raise DataError(f"{path}: expected {8 + 4 * n * dim} bytes, found {len(buf)}")
    return np.frombuffer(buf, dtype="<f4", offset=8).reshape(n, dim).astype(np.float32)


def _read_csv(text: str, path) -> np.ndarray:
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError:
            raise DataError(f"{path}:{lineno}: not a comma-separated list of numbers") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"{path}:{lineno}: {len(row)} columns, expected {width}")
        rows.append(row)
    return np.array(rows, dtype=np.float32)


def write_vectors(path, raw, fmt: str) -> None:
    """Write raw ``(n, d-1)`` vectors in one of the supported formats."""
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise ValueError("expected a 2-d array")
    n, dim = raw.shape
    with open(path, "wb") as f:
        if fmt == "raw_f32":
            f.write(struct.pack("<II", n, dim))
            f.write(raw.astype("<f4").tobytes())
        elif fmt in ("fvecs", "bvecs"):
            dtype = "<f4" if fmt == "fvecs" else "u1"
            head = struct.pack("<i", dim)
            for row in raw.astype(dtype):
                f.write(head)
                f.write(row.tobytes())
        elif fmt == "csv":
            for row in raw.astype(np.float32):
                f.write((",".join(repr(float(v)) for v in row) + "\n").encode())
        else:
            raise DataError(f"unknown format {fmt!r}")


def file_fingerprint(path) -> int:
    """64-bit hash of a file's raw bytes."""
    h = hashlib.blake2b(digest_size=8)
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return int.from_bytes(h.digest(), "little")
