"""Two-level HNSW construction.

A fixed fraction of nodes (5% by default) forms the upper layer; the first
sampled node is the permanent entry point.  Every node is inserted into the
lower layer, and sampled nodes into the upper layer as well, with the usual
beam search / RNG prune / reverse-edge-with-shrink steps.

Workers pull 2048-node morsels and insert concurrently.  The search half of
an insert runs without locks against whatever the shared adjacency currently
holds; the edge-writing half is serialized by one lock.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import search_kernels as K
from ._jit import jit
from .core import Dataset, DistanceKind, row_row_distance
from .errors import UsageError
from .graph import AdjacencyStore, TwoLevelGraph, append_edge, make_upper_remap, publish_list, read_list
from .heaps import drain_max_heap_sorted, sort_pairs

MORSEL_SIZE = 2048


@dataclass(frozen=True)
class BuildParams:
    m_upper: int = 16
    m_lower: int | None = None
    ef_construction: int = 100
    sample_rate: float = 0.05
    threads: int = 1
    seed: int = 0
    kind: DistanceKind = DistanceKind.L2_SQUARED

    def __post_init__(self):
        if self.m_lower is None:
            object.__setattr__(self, "m_lower", 2 * self.m_upper)
        object.__setattr__(self, "kind", DistanceKind.parse(self.kind))
        if self.m_upper < 2:
            raise UsageError("m_upper must be >= 2")
        if self.m_lower < self.m_upper:
            raise UsageError("m_lower must be >= m_upper")
        if self.ef_construction < self.m_lower:
            raise UsageError("ef_construction must be >= m_lower")
        if not 0 < self.sample_rate <= 1:
            raise UsageError("sample_rate must lie in (0, 1]")
        if self.threads < 1:
            raise UsageError("threads must be >= 1")


def sample_upper(n: int, s: float, seed: int) -> np.ndarray:
    """``round(s*n)`` (at least one) distinct node ids, sorted."""
    if n <= 0:
        raise UsageError("cannot sample from an empty dataset")
    if not 0 < s <= 1:
        raise UsageError("sample rate must lie in (0, 1]")
    count = max(1, min(n, int(np.floor(s * n + 0.5))))
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=count, replace=False).astype(np.int64))


# -- kernels -----------------------------------------------------------------

@jit
def prune_sorted(data, norms, kind, cand_d, cand_i, count, cap, out):
    """RNG rule over candidates sorted by distance to the base node.

    A candidate is kept when it is strictly closer to the base node than to
    every previously kept candidate.  Returns the number kept (<= cap).
    """
    kept = 0
    for j in range(count):
        if kept >= cap:
            break
        u = cand_i[j]
        du = cand_d[j]
        ok = True
        for t in range(kept):
            if not du < row_row_distance(data, norms, kind, u, out[t]):
                ok = False
                break
        if ok:
            out[kept] = u
            kept += 1
    return kept


@jit
def _slot(remap, v):
    if remap.shape[0] == 0:
        return v
    return remap[v]


@jit
def link_k(data, norms, kind, slots, pub, last_pruned, remap, v, cand_d, cand_i, count, cap,
           kbuf, tmp, wd, wi):
    """Publish ``v``'s pruned forward list, then add reverse edges with shrink."""
    nk = prune_sorted(data, norms, kind, cand_d, cand_i, count, cap, kbuf)
    sv = _slot(remap, v)
    publish_list(slots, pub, sv, kbuf, nk)
    last_pruned[sv] = 1
    for a in range(nk):
        u = kbuf[a]
        su = _slot(remap, u)
        deg = read_list(slots, pub, su, tmp)
        present = False
        for j in range(deg):
            if tmp[j] == v:
                present = True
                break
        if present:
            continue
        if deg < cap:
            append_edge(slots, pub, su, v)
            last_pruned[su] = 0
            continue
        for j in range(deg):
            wi[j] = tmp[j]
            wd[j] = row_row_distance(data, norms, kind, u, tmp[j])
        wi[deg] = v
        wd[deg] = row_row_distance(data, norms, kind, u, v)
        sort_pairs(wd, wi, deg + 1)
        nk2 = prune_sorted(data, norms, kind, wd, wi, deg + 1, cap, tmp)
        publish_list(slots, pub, su, tmp, nk2)
        last_pruned[su] = 1
    return nk


@jit
def insert_search_k(ctx_up, ctx_lo, v, is_upper, entry, efc, qbuf, tag, st,
                    up_d, up_i, lo_d, lo_i):
    """Search half of an insert.  Fills sorted candidate lists for the upper
    layer (sampled nodes only) and the lower layer; returns their sizes."""
    data = ctx_lo[0]
    norms = ctx_lo[1]
    for i in range(qbuf.shape[0]):
        qbuf[i] = data[v, i]
    qnorm = norms[v]
    mask = np.zeros(1, dtype=np.bool_)
    entries = np.empty(1, dtype=np.int64)
    entry_d = np.empty(1, dtype=np.float64)
    cnt = st[11]
    seen = st[4]

    entries[0] = entry
    entry_d[0] = K.mem_dist(ctx_up, entry, qbuf, qnorm)
    seen[v] = tag
    ef_up = efc if is_upper else 1
    K.seed_k(st, entries, entry_d, 1, mask, False, ef_up, tag)
    rsize = K.search_loop_k(K.mem_nbrs_remapped, K.mem_dist, ctx_up, qbuf, qnorm, mask, False, K.ONEHOP_A,
                            K.ONEHOP_A, 1, 1, 1.0, 1.0, ef_up, tag, st)
    n_up = drain_max_heap_sorted(st[2], st[3], rsize, up_d, up_i)
    if not is_upper:
        n_up = n_up if n_up < 1 else 1

    seen[v] = tag + 1
    entries[0] = up_i[0]
    entry_d[0] = up_d[0]
    K.seed_k(st, entries, entry_d, 1, mask, False, efc, tag + 1)
    rsize = K.search_loop_k(K.mem_nbrs, K.mem_dist, ctx_lo, qbuf, qnorm, mask, False, K.ONEHOP_A,
                            K.ONEHOP_A, 1, 1, 1.0, 1.0, efc, tag + 1, st)
    n_lo = drain_max_heap_sorted(st[2], st[3], rsize, lo_d, lo_i)
    cnt[K.CSIZE] = 0
    cnt[K.RSIZE] = 0
    return n_up, n_lo


# -- driver ------------------------------------------------------------------

class _Workspace:
    def __init__(self, n: int, dim: int, params: BuildParams):
        efc = params.ef_construction
        cap = max(params.m_lower, params.m_upper)
        self.st = K.new_state(n, cap, efc, dim)
        self.qbuf = np.empty(dim, dtype=np.float64)
        self.up_d = np.empty(efc + 1, dtype=np.float64)
        self.up_i = np.empty(efc + 1, dtype=np.int64)
        self.lo_d = np.empty(efc + 1, dtype=np.float64)
        self.lo_i = np.empty(efc + 1, dtype=np.int64)
        self.kbuf = np.empty(cap, dtype=np.int32)
        self.tmp = np.empty(cap + 1, dtype=np.int32)
        self.wd = np.empty(cap + 1, dtype=np.float64)
        self.wi = np.empty(cap + 1, dtype=np.int64)
        self.tag = 1

    def next_tag(self) -> int:
        if self.tag > 2**31 - 8:
            self.st[4][:] = 0
            self.st[5][:] = 0
            self.tag = 1
        tag = self.tag
        self.tag += 2
        return tag


@dataclass
class GraphBuilder:
    """Shared construction state for one graph."""

    graph: TwoLevelGraph
    dataset: Dataset
    params: BuildParams
    inserted: np.ndarray = field(init=False)
    lock: threading.Lock = field(default_factory=threading.Lock, init=False)

    def __post_init__(self):
        self.inserted = np.zeros(self.dataset.n, dtype=np.bool_)
        self.inserted[self.graph.entry] = True
        norms = self.dataset.norms()
        g = self.graph
        kind = int(self.params.kind)
        self.ctx_up = (self.dataset.data, norms, kind, g.upper.slots, g.upper.pub, g.upper.remap)
        self.ctx_lo = (self.dataset.data, norms, kind, g.lower.slots, g.lower.pub, np.zeros(0, dtype=np.int64))
        self._local = threading.local()

    def workspace(self) -> _Workspace:
        ws = getattr(self._local, "ws", None)
        if ws is None:
            ws = self._local.ws = _Workspace(self.dataset.n, self.dataset.dim, self.params)
        return ws

    def insert(self, v: int) -> None:
        v = int(v)
        if not 0 <= v < self.dataset.n:
            raise UsageError(f"node {v} outside dataset")
        if self.inserted[v]:
            raise UsageError(f"node {v} already inserted")
        self.inserted[v] = True
        g = self.graph
        p = self.params
        ws = self.workspace()
        is_upper = bool(g.upper.remap[v] >= 0)
        n_up, n_lo = insert_search_k(self.ctx_up, self.ctx_lo, v, is_upper, g.entry, p.ef_construction,
                                     ws.qbuf, ws.next_tag(), ws.st, ws.up_d, ws.up_i, ws.lo_d, ws.lo_i)
        data, norms, kind = self.ctx_lo[0], self.ctx_lo[1], self.ctx_lo[2]
        with self.lock:
            if is_upper:
                link_k(data, norms, kind, g.upper.slots, g.upper.pub, g.upper.last_pruned, g.upper.remap, v,
                       ws.up_d, ws.up_i, n_up, g.upper.cap, ws.kbuf, ws.tmp, ws.wd, ws.wi)
            link_k(data, norms, kind, g.lower.slots, g.lower.pub, g.lower.last_pruned, self.ctx_lo[5], v,
                   ws.lo_d, ws.lo_i, n_lo, g.lower.cap, ws.kbuf, ws.tmp, ws.wd, ws.wi)

    def insert_many(self, nodes) -> None:
        for v in nodes:
            self.insert(v)


def init_graph(dataset: Dataset, params: BuildParams) -> TwoLevelGraph:
    """Empty two-level graph with sampled upper members; the entry is placed
    with no edges.  Attaches a :class:`GraphBuilder` as ``graph.builder``."""
    if dataset.n == 0:
        raise UsageError("cannot build an index over an empty dataset")
    dataset.check_kind(params.kind)
    n = dataset.n
    members = sample_upper(n, params.sample_rate, params.seed)
    remap = make_upper_remap(n, members)
    graph = TwoLevelGraph(
        lower=AdjacencyStore(n, params.m_lower, n),
        upper=AdjacencyStore(len(members), params.m_upper, n, remap),
        upper_members=members,
        entry=int(members[0]),
        params=params,
        kind=params.kind,
    )
    graph.builder = GraphBuilder(graph, dataset, params)
    return graph


def insert_node(graph: TwoLevelGraph, dataset: Dataset, v: int, params: BuildParams | None = None) -> None:
    builder = getattr(graph, "builder", None)
    if builder is None:
        raise UsageError("graph was not created by init_graph")
    if int(v) == graph.entry:
        # The entry is placed at initialization and carries no edges yet.
        return
    builder.insert(v)


def insertion_order(n: int, entry: int) -> np.ndarray:
    order = np.arange(n, dtype=np.int64)
    return order[order != entry]


def build(dataset: Dataset, params: BuildParams | None = None) -> TwoLevelGraph:
    params = params or BuildParams()
    graph = init_graph(dataset, params)
    builder = graph.builder
    order = insertion_order(dataset.n, graph.entry)
    morsels = [order[i:i + MORSEL_SIZE] for i in range(0, len(order), MORSEL_SIZE)]
    if params.threads == 1:
        for morsel in morsels:
            builder.insert_many(morsel)
    else:
        _parallel(builder, morsels, params.threads)
    del graph.builder
    return graph


def _parallel(builder: GraphBuilder, morsels, threads: int) -> None:
    next_morsel = iter(morsels)
    take = threading.Lock()
    errors: list[BaseException] = []

    def worker():
        try:
            while True:
                with take:
                    morsel = next(next_morsel, None)
                if morsel is None:
                    return
                builder.insert_many(morsel)
        except BaseException as exc:  # surfaced after join
            errors.append(exc)

    pool = [threading.Thread(target=worker, daemon=True) for _ in range(threads)]
    for t in pool:
        t.start()
    for t in pool:
        t.join()
    if errors:
        raise errors[0]


def select_neighbors_prune(w: int, candidates, cap: int, kind, dataset: Dataset) -> list[int]:
    """RNG-style neighbour selection for base node ``w``.

    ``candidates`` is a sequence of ``(node, distance_to_w)``; it is sorted by
    ``(distance, node)`` before scanning.
    """
    kind = DistanceKind.parse(kind)
    cands = sorted(((float(d), int(u)) for u, d in candidates if int(u) != int(w)))
    if not cands:
        return []
    cd = np.array([c[0] for c in cands], dtype=np.float64)
    ci = np.array([c[1] for c in cands], dtype=np.int64)
    out = np.empty(max(1, int(cap)), dtype=np.int32)
    kept = prune_sorted(dataset.data, dataset.norms(), int(kind), cd, ci, len(cands), int(cap), out)
    return out[:kept].tolist()
