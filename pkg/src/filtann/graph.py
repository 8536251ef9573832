"""Two-level degree-bounded proximity graph.

Each node owns two fixed-capacity slot regions.  A single int64 publication
word packs ``(version << 32) | degree``; the active region is ``version & 1``.
Appends write the next slot of the active region before bumping the degree.
Replacements write the inactive region and then flip the version.  A reader
loads the word once, copies the active region and re-checks the version, so
it sees either the old or the new list even while a build thread is writing.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any

import numpy as np

from ._jit import jit
from .core import DistanceKind
from .errors import UsageError

_DEG_MASK = 0xFFFFFFFF


class Layer(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


@jit(inline=True)
def read_list(slots, pub, i, out):
    """Copy node slot ``i``'s current list into ``out``; returns its length."""
    while True:
        p = pub[i]
        ver = p >> 32
        deg = p & _DEG_MASK
        r = ver & 1
        for j in range(deg):
            out[j] = slots[i, r, j]
        if (pub[i] >> 32) - ver < 2:
            return deg


@jit(inline=True)
def list_degree(pub, i):
    return pub[i] & _DEG_MASK


@jit(inline=True)
def publish_list(slots, pub, i, src, count):
    ver = (pub[i] >> 32) + 1
    r = ver & 1
    for j in range(count):
        slots[i, r, j] = src[j]
    pub[i] = (ver << 32) | count


@jit(inline=True)
def append_edge(slots, pub, i, x):
    p = pub[i]
    ver = p >> 32
    deg = p & _DEG_MASK
    slots[i, ver & 1, deg] = x
    pub[i] = (ver << 32) | (deg + 1)


class AdjacencyStore:
    """Fixed-capacity neighbor slots for one layer.

    ``universe`` is the number of dataset rows; stored ids are dataset
    offsets.  For the upper layer ``remap`` maps a dataset offset to its dense
    slot index (``-1`` for non-members).
    """

    def __init__(self, node_count: int, cap: int, universe: int, remap: np.ndarray | None = None):
        if cap < 1:
            raise UsageError("adjacency capacity must be >= 1")
        self.node_count = int(node_count)
        self.cap = int(cap)
        self.universe = int(universe)
        self.remap = remap
        self.slots = np.zeros((self.node_count, 2, self.cap), dtype=np.int32)
        self.pub = np.zeros(self.node_count, dtype=np.int64)
        # 1 when the node's current list came straight out of the pruning rule.
        self.last_pruned = np.zeros(self.node_count, dtype=np.uint8)

    def _slot(self, v: int) -> int:
        v = int(v)
        if not 0 <= v < self.universe:
            raise UsageError(f"node {v} outside universe of size {self.universe}")
        if self.remap is None:
            return v
        s = int(self.remap[v])
        if s < 0:
            raise UsageError(f"node {v} is not a member of this layer")
        return s

    @property
    def degrees(self) -> np.ndarray:
        return (self.pub & _DEG_MASK).astype(np.int64)

    def degree(self, v: int) -> int:
        return int(self.pub[self._slot(v)] & _DEG_MASK)

    def neighbors(self, v: int) -> list[int]:
        out = np.empty(self.cap, dtype=np.int32)
        deg = read_list(self.slots, self.pub, self._slot(v), out)
        return out[:deg].tolist()

    def set_neighbors(self, v: int, nbrs) -> None:
        slot = self._slot(v)
        arr = np.asarray(list(nbrs), dtype=np.int64)
        if arr.shape[0] > self.cap:
            raise UsageError(f"{arr.shape[0]} neighbors exceed capacity {self.cap}; prune first")
        if (arr == int(v)).any():
            raise UsageError(f"self-loop on node {v}")
        for x in arr:
            self._slot(int(x))
        publish_list(self.slots, self.pub, slot, arr.astype(np.int32), arr.shape[0])
        self.last_pruned[slot] = 0

    def lists(self) -> list[list[int]]:
        """Every slot's current list, in slot order."""
        out = np.empty(self.cap, dtype=np.int32)
        res = []
        for s in range(self.node_count):
            deg = read_list(self.slots, self.pub, s, out)
            res.append(out[:deg].tolist())
        return res

    def to_csr(self) -> tuple[np.ndarray, np.ndarray]:
        return _to_csr(self.slots, self.pub)

    @classmethod
    def from_csr(cls, offsets, edges, cap: int, universe: int, remap=None) -> "AdjacencyStore":
        offsets = np.asarray(offsets, dtype=np.int64)
        edges = np.asarray(edges, dtype=np.int32)
        store = cls(offsets.shape[0] - 1, cap, universe, remap)
        deg = np.diff(offsets)
        if (deg < 0).any() or (deg > cap).any():
            raise UsageError("CSR degrees outside [0, cap]")
        _fill_from_csr(store.slots, store.pub, offsets, edges)
        return store


@jit
def _to_csr(slots, pub):
    n = pub.shape[0]
    offsets = np.zeros(n + 1, dtype=np.uint64)
    total = 0
    for i in range(n):
        total += pub[i] & _DEG_MASK
        offsets[i + 1] = total
    edges = np.empty(total, dtype=np.uint32)
    buf = np.empty(slots.shape[2], dtype=np.int32)
    pos = 0
    for i in range(n):
        deg = read_list(slots, pub, i, buf)
        for j in range(deg):
            edges[pos] = buf[j]
            pos += 1
    return offsets, edges


@jit
def _fill_from_csr(slots, pub, offsets, edges):
    for i in range(pub.shape[0]):
        lo = offsets[i]
        hi = offsets[i + 1]
        for j in range(lo, hi):
            slots[i, 0, j - lo] = edges[j]
        pub[i] = hi - lo


@dataclass
class TwoLevelGraph:
    lower: AdjacencyStore
    upper: AdjacencyStore
    upper_members: np.ndarray
    entry: int
    params: Any
    kind: DistanceKind

    @property
    def n(self) -> int:
        return self.lower.node_count

    @property
    def upper_remap(self) -> np.ndarray:
        return self.upper.remap

    def store(self, layer: Layer) -> AdjacencyStore:
        return self.upper if Layer(layer) == Layer.UPPER else self.lower

    def neighbors(self, layer: Layer, v: int) -> list[int]:
        return self.store(layer).neighbors(v)

    def is_upper(self, v: int) -> bool:
        return bool(self.upper.remap[int(v)] >= 0)

    def edge_lists(self) -> tuple[list[list[int]], list[list[int]]]:
        return self.lower.lists(), self.upper.lists()


def make_upper_remap(n: int, members: np.ndarray) -> np.ndarray:
    remap = np.full(n, -1, dtype=np.int64)
    remap[np.asarray(members, dtype=np.int64)] = np.arange(len(members), dtype=np.int64)
    return remap


def neighbors(graph: TwoLevelGraph, layer: Layer, v: int) -> list[int]:
    return graph.neighbors(layer, v)


def set_neighbors(store: AdjacencyStore, v: int, nbrs) -> None:
    store.set_neighbors(v, nbrs)
