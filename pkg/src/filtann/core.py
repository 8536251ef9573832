"""Datasets, identifiers and distance kernels."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ._jit import JIT_ENABLED, jit
from .errors import DomainError, UsageError


class DistanceKind(enum.IntEnum):
    L2_SQUARED = 0
    COSINE = 1

    @classmethod
    def parse(cls, value: "str | int | DistanceKind") -> "DistanceKind":
        if isinstance(value, DistanceKind):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower()
        aliases = {"l2": cls.L2_SQUARED, "l2sq": cls.L2_SQUARED, "l2_squared": cls.L2_SQUARED,
                   "cos": cls.COSINE, "cosine": cls.COSINE}
        if key not in aliases:
            raise UsageError(f"unknown distance kind {value!r}")
        return aliases[key]


NODE_ID_DTYPE = np.int64


@dataclass
class Dataset:
    """Fixed-dimension float32 vectors plus per-node ``id`` and ``label`` attributes.

    Node identity is the row offset.  ``ids`` is the filterable id attribute,
    which defaults to the offset itself.
    """

    data: np.ndarray
    ids: np.ndarray = field(default=None)  # type: ignore[assignment]
    labels: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2 or data.shape[1] == 0:
            raise UsageError(f"dataset must be a 2-d array with dim >= 1, got shape {data.shape}")
        if not np.isfinite(data).all():
            raise UsageError("dataset contains NaN or Inf values")
        n = data.shape[0]
        ids = np.arange(n, dtype=np.uint64) if self.ids is None else np.asarray(self.ids, dtype=np.uint64)
        labels = np.zeros(n, dtype=np.uint32) if self.labels is None else np.asarray(self.labels, dtype=np.uint32)
        if ids.shape != (n,) or labels.shape != (n,):
            raise UsageError("attribute arrays must have one entry per vector")
        self.data, self.ids, self.labels = data, ids, labels

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.n

    def norms(self) -> np.ndarray:
        """Row norms in float64, accumulated in the same order as the kernels."""
        return _row_norms(self.data)

    def check_kind(self, kind: DistanceKind) -> None:
        if DistanceKind.parse(kind) == DistanceKind.COSINE and self.n and (self.norms() == 0.0).any():
            raise DomainError("cosine distance is undefined for all-zero vectors")


class DistanceCounter:
    """Caller-owned sink counting distance evaluations."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def add(self, amount: int = 1) -> None:
        self.count += amount

    def __repr__(self) -> str:
        return f"DistanceCounter({self.count})"


# -- kernels ---------------------------------------------------------------
# Squared L2 and dot products accumulate in float64.  The compiled reductions
# allow reassociation (SIMD); every caller hands them contiguous float32 rows
# so in-memory and in-frame evaluation share one instruction sequence.  The
# numpy fallback agrees to ~1e-12 relative.

if JIT_ENABLED:

    @jit(fastmath=True)
    def l2_kernel(a, b):
        acc = 0.0
        for i in range(a.shape[0]):
            t = np.float64(a[i]) - np.float64(b[i])
            acc += t * t
        return acc

    @jit(fastmath=True)
    def dot_kernel(a, b):
        acc = 0.0
        for i in range(a.shape[0]):
            acc += np.float64(a[i]) * np.float64(b[i])
        return acc

else:

    def l2_kernel(a, b):
        t = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
        return float(t @ t)

    def dot_kernel(a, b):
        return float(np.asarray(a, dtype=np.float64) @ np.asarray(b, dtype=np.float64))


@jit(inline=True)
def cosine_from_parts(dot, na, nb):
    d = 1.0 - dot / (na * nb)
    if d < 0.0:
        return 0.0
    if d > 2.0:
        return 2.0
    return d


@jit
def _row_norms(data):
    out = np.empty(data.shape[0], dtype=np.float64)
    for v in range(data.shape[0]):
        out[v] = np.sqrt(dot_kernel(data[v], data[v]))
    return out


@jit(inline=True)
def row_query_distance(data, norms, kind, v, q, qnorm):
    """Distance between stored row ``v`` and query ``q`` (float64)."""
    if kind == 0:
        return l2_kernel(data[v], q)
    return cosine_from_parts(dot_kernel(data[v], q), norms[v], qnorm)


@jit(inline=True)
def row_row_distance(data, norms, kind, u, v):
    if kind == 0:
        return l2_kernel(data[u], data[v])
    return cosine_from_parts(dot_kernel(data[u], data[v]), norms[u], norms[v])


def query_norm(q: np.ndarray) -> float:
    return float(np.sqrt(dot_kernel(q, q)))


# -- public distance functions ----------------------------------------------

def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise UsageError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def l2_squared(a, b) -> float:
    """Sum of squared coordinate differences."""
    a, b = _pair(a, b)
    return float(l2_kernel(a, b))


def cosine_distance(a, b) -> float:
    """``1 - cos(a, b)``, in ``[0, 2]``.  Raises :class:`DomainError` on a zero vector."""
    a, b = _pair(a, b)
    na, nb = query_norm(a), query_norm(b)
    if na == 0.0 or nb == 0.0:
        raise DomainError("cosine distance is undefined for all-zero vectors")
    return float(cosine_from_parts(dot_kernel(a, b), na, nb))


def distance(kind, a, b, counter: DistanceCounter | None = None) -> float:
    kind = DistanceKind.parse(kind)
    d = l2_squared(a, b) if kind == DistanceKind.L2_SQUARED else cosine_distance(a, b)
    if counter is not None:
        counter.add(1)
    return d


def as_query(q, dim: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).ravel()
    if q.shape[0] != dim:
        raise UsageError(f"query has dim {q.shape[0]}, index has dim {dim}")
    if not np.isfinite(q).all():
        raise UsageError("query contains NaN or Inf values")
    return np.ascontiguousarray(q)
