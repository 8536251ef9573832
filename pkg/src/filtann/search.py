"""Filtered kNN search over a :class:`~filtann.graph.TwoLevelGraph`.

The selection is always supplied as a precomputed mask; search only tests
bits.  Exploration per popped candidate follows one of four fixed
heuristics, or is chosen per query (adaptive-g) or per candidate
(adaptive-l) from the estimated number of selected vectors in the
candidate's two-hop neighbourhood.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import search_kernels as K
from .core import Dataset, as_query, query_norm
from .errors import UsageError
from .graph import Layer, TwoLevelGraph


class Heuristic(enum.Enum):
    ONEHOP_A = "onehop-a"
    ONEHOP_S = "onehop-s"
    BLIND = "blind"
    DIRECTED = "directed"
    ADAPTIVE_G = "adaptive-g"
    ADAPTIVE_L = "adaptive-l"

    @property
    def code(self) -> int:
        return _CODES[self]

    @classmethod
    def parse(cls, value: "str | Heuristic") -> "Heuristic":
        if isinstance(value, Heuristic):
            return value
        key = str(value).strip().lower().replace("_", "-")
        key = {"adaptive-global": "adaptive-g", "adaptive-local": "adaptive-l"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise UsageError(f"unknown heuristic {value!r}") from None

    @classmethod
    def from_code(cls, code: int) -> "Heuristic":
        return _FROM_CODE[int(code)]


_CODES = {
    Heuristic.ONEHOP_A: K.ONEHOP_A,
    Heuristic.ONEHOP_S: K.ONEHOP_S,
    Heuristic.BLIND: K.BLIND,
    Heuristic.DIRECTED: K.DIRECTED,
    Heuristic.ADAPTIVE_G: K.ADAPTIVE_G,
    Heuristic.ADAPTIVE_L: K.ADAPTIVE_L,
}
_FROM_CODE = {v: k for k, v in _CODES.items()}
FIXED = (Heuristic.ONEHOP_A, Heuristic.ONEHOP_S, Heuristic.BLIND, Heuristic.DIRECTED)


@dataclass(frozen=True)
class SearchParams:
    k: int = 10
    efs: int = 100
    heuristic: Heuristic = Heuristic.ADAPTIVE_L
    lf: float = 3.0
    ub_onehop: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "heuristic", Heuristic.parse(self.heuristic))
        if self.k < 1 or self.efs < self.k:
            raise UsageError(f"need efs >= k >= 1, got k={self.k} efs={self.efs}")
        if self.lf < 1:
            raise UsageError("leniency factor must be >= 1")
        if not 0 < self.ub_onehop <= 1:
            raise UsageError("ub_onehop must lie in (0, 1]")


@dataclass
class SearchCounters:
    """Per-query work counters.

    ``t_dc``/``s_dc`` cover heuristic exploration in the searched layer;
    ``entry_dc`` holds distances spent on the unfiltered upper-layer descent
    and on seeding entries.  ``popped`` counts candidates that were expanded
    (the pop that triggers convergence is not counted).
    """

    t_dc: int = 0
    s_dc: int = 0
    popped: int = 0
    entry_dc: int = 0
    unselected_dc: int = 0
    hist: dict = field(default_factory=lambda: {h: 0 for h in FIXED})
    pins: int = 0
    misses: int = 0

    @classmethod
    def from_array(cls, cnt: np.ndarray) -> "SearchCounters":
        return cls(
            t_dc=int(cnt[K.T_DC]), s_dc=int(cnt[K.S_DC]), popped=int(cnt[K.POPPED]),
            entry_dc=int(cnt[K.ENTRY_DC]), unselected_dc=int(cnt[K.U_DC]),
            hist={h: int(cnt[K.HIST + h.code]) for h in FIXED},
        )

    @property
    def total_dc(self) -> int:
        return self.t_dc + self.entry_dc


@dataclass
class SearchResult:
    ids: np.ndarray
    distances: np.ndarray
    counters: SearchCounters

    def __len__(self) -> int:
        return len(self.ids)


def esv(sigma: float, m: int) -> float:
    """Expected selected vectors among a node's 1st and 2nd degree neighbours."""
    return sigma * (m + 1) * m


def choose_fixed(sigma: float, m: int, lf: float = 3.0, ub_onehop: float = 0.5) -> Heuristic:
    return Heuristic.from_code(K.choose_fixed_code(float(sigma), int(m), float(lf), float(ub_onehop)))


def _mask_bits(mask, n: int) -> tuple[np.ndarray, bool]:
    if mask is None:
        return np.ones(n, dtype=np.bool_), False
    bits = getattr(mask, "bits", mask)
    bits = np.asarray(bits, dtype=np.bool_)
    if bits.shape != (n,):
        raise UsageError(f"mask covers {bits.shape[0]} nodes, dataset has {n}")
    return bits, True


def _mem_ctx(graph: TwoLevelGraph, dataset: Dataset, norms: np.ndarray, layer: Layer):
    store = graph.store(layer)
    remap = store.remap if store.remap is not None else np.zeros(0, dtype=np.int64)
    return (dataset.data, norms, int(graph.kind), store.slots, store.pub, remap)


def _max_cap(graph: TwoLevelGraph) -> int:
    return max(graph.lower.cap, graph.upper.cap)


class SearchState:
    """Candidate queue C, result queue R, visited marks and counters for one
    query in one layer.  Used directly by the single-step exploration API."""

    def __init__(self, graph: TwoLevelGraph, dataset: Dataset, query, efs: int, mask=None):
        self.graph = graph
        self.dataset = dataset
        self.efs = int(efs)
        self.q = as_query(query, dataset.dim)
        self.qnorm = query_norm(self.q)
        self.mask, self.filtered = _mask_bits(mask, dataset.n)
        self.norms = dataset.norms()
        self.tag = 1
        self.st = K.new_state(dataset.n, _max_cap(graph), self.efs, dataset.dim)

    def ctx(self, layer: Layer = Layer.LOWER):
        return _mem_ctx(self.graph, self.dataset, self.norms, layer)

    def seed(self, entries, layer: Layer = Layer.LOWER) -> None:
        entries = np.asarray(entries, dtype=np.int64).ravel()
        if entries.size == 0:
            raise UsageError("at least one entry node is required")
        ctx = self.ctx(layer)
        dists = np.array([K.mem_dist(ctx, int(e), self.q, self.qnorm) for e in entries])
        self.st[11][K.ENTRY_DC] += entries.size
        K.seed_k(self.st, entries, dists, entries.size, self.mask, self.filtered, self.efs, self.tag)

    @property
    def counters(self) -> SearchCounters:
        return SearchCounters.from_array(self.st[11])

    def candidates(self) -> list[tuple[float, int]]:
        size = int(self.st[11][K.CSIZE])
        return sorted(zip(self.st[0][:size].tolist(), self.st[1][:size].tolist()))

    def results(self) -> list[tuple[float, int]]:
        size = int(self.st[11][K.RSIZE])
        return sorted(zip(self.st[2][:size].tolist(), self.st[3][:size].tolist()))

    def visited(self) -> set[int]:
        return set(np.flatnonzero(self.st[4] == self.tag).tolist())

    def _load(self, c_min: int, layer: Layer) -> int:
        fn = K.mem_nbrs_remapped if layer == Layer.UPPER else K.mem_nbrs
        return fn(self.ctx(layer), int(c_min), self.st[7])

    def _budget(self, layer: Layer) -> int:
        return self.graph.store(layer).cap


def _nbr_fn(layer: Layer):
    return K.mem_nbrs_remapped if layer == Layer.UPPER else K.mem_nbrs


def explore_onehop(state: SearchState, c_min: int, selected_only: bool, layer: Layer = Layer.LOWER) -> None:
    """Measure unvisited 1st-degree neighbours of ``c_min`` (only selected
    ones when ``selected_only``) and offer each one to the queues."""
    deg = state._load(c_min, layer)
    K.explore_onehop_k(K.mem_dist, state.ctx(layer), state.q, state.qnorm, state.mask, state.filtered,
                       deg, bool(selected_only), state.efs, state.tag, state.st)


def explore_blind(state: SearchState, c_min: int, budget: int | None = None, layer: Layer = Layer.LOWER) -> int:
    """Selected 1st-degree neighbours, then selected 2nd-degree neighbours
    through unselected bridges in adjacency order, up to ``budget`` measured."""
    deg = state._load(c_min, layer)
    budget = state._budget(layer) if budget is None else int(budget)
    return K.explore_blind_k(_nbr_fn(layer), K.mem_dist, state.ctx(layer), state.q, state.qnorm, state.mask,
                             state.filtered, deg, budget, state.efs, state.tag, state.st)


def explore_directed(state: SearchState, c_min: int, budget: int | None = None, layer: Layer = Layer.LOWER) -> int:
    """Like :func:`explore_blind` but measures every 1st-degree neighbour and
    expands bridges nearest-to-query first."""
    deg = state._load(c_min, layer)
    budget = state._budget(layer) if budget is None else int(budget)
    return K.explore_directed_k(_nbr_fn(layer), K.mem_dist, state.ctx(layer), state.q, state.qnorm, state.mask,
                                state.filtered, deg, budget, state.efs, state.tag, state.st)


def resolve_global(heuristic: Heuristic, sigma_g: float, m: int, lf: float, ub: float) -> int:
    if heuristic == Heuristic.ADAPTIVE_G:
        return K.choose_fixed_code(float(sigma_g), int(m), float(lf), float(ub))
    return heuristic.code


def search_layer(graph: TwoLevelGraph, layer: Layer, dataset: Dataset, v_q, entries, efs: int, mask,
                 heuristic, params: SearchParams | None = None) -> tuple[list[tuple[int, float]], SearchCounters]:
    """Run one layer's search from ``entries``; returns R ascending and counters."""
    layer = Layer(layer)
    heuristic = Heuristic.parse(heuristic)
    params = params or SearchParams(k=1, efs=max(1, efs), heuristic=heuristic)
    if efs < 1:
        raise UsageError("efs must be >= 1")
    state = SearchState(graph, dataset, v_q, efs, mask)
    if state.filtered and not state.mask.any():
        return [], SearchCounters()
    state.seed(entries, layer)
    cap = graph.store(layer).cap
    sigma_g = float(state.mask.mean())
    fixed_g = resolve_global(heuristic, sigma_g, cap, params.lf, params.ub_onehop)
    K.search_loop_k(_nbr_fn(layer), K.mem_dist, state.ctx(layer), state.q, state.qnorm, state.mask,
                    state.filtered, heuristic.code, fixed_g, cap, cap, float(params.lf),
                    float(params.ub_onehop), efs, state.tag, state.st)
    return [(i, d) for d, i in state.results()], state.counters


class KernelRunner:
    """Owns a reusable search workspace and drives the two-layer kernel over
    whatever storage accessors the caller supplies."""

    def __init__(self, n: int, dim: int, entry: int, m_lower: int, max_cap: int):
        self.n = int(n)
        self.dim = int(dim)
        self.entry = int(entry)
        self.m_lower = int(m_lower)
        self.max_cap = int(max_cap)
        self._efs_cap = 0
        self._st = None
        self._tag = 1

    def _state(self, efs: int):
        if self._st is None or efs > self._efs_cap:
            self._efs_cap = max(efs, 2 * self._efs_cap)
            self._st = K.new_state(self.n, self.max_cap, self._efs_cap, self.dim)
            self._tag = 1
        st = self._st
        st[11][:] = 0
        return st

    def _next_tag(self) -> int:
        if self._tag > 2**31 - 8:
            self._st[4][:] = 0
            self._st[5][:] = 0
            self._tag = 1
        tag = self._tag
        self._tag += 2
        return tag

    def prepare(self, v_q, mask):
        """Validated query, mask bits and selected count."""
        q = as_query(v_q, self.dim)
        bits, filtered = _mask_bits(mask, self.n)
        selected = int(np.count_nonzero(bits)) if filtered else self.n
        return q, bits, selected

    def run(self, access, q, params: SearchParams, bits, sigma_g: float) -> SearchResult:
        """Run the two-layer kernel with explicit storage accessors
        ``(nbr_up, dist_up, ctx_up, nbr_lo, dist_lo, ctx_lo)``."""
        st = self._state(params.efs)
        tag = self._next_tag()
        m = self.m_lower
        fixed_g = resolve_global(params.heuristic, sigma_g, m, params.lf, params.ub_onehop)
        out_d = np.empty(params.efs, dtype=np.float64)
        out_i = np.empty(params.efs, dtype=np.int64)
        count = K.knn_k(*access, q, query_norm(q), self.entry, bits, params.heuristic.code,
                        int(fixed_g), m, m, float(params.lf), float(params.ub_onehop),
                        int(params.efs), tag, st, out_d, out_i)
        count = min(count, params.k)
        return SearchResult(out_i[:count].copy(), out_d[:count].copy(), SearchCounters.from_array(st[11]))


def empty_result() -> SearchResult:
    return SearchResult(np.zeros(0, np.int64), np.zeros(0, np.float64), SearchCounters())


class Searcher(KernelRunner):
    """Reusable query workspace over an in-memory graph and dataset."""

    def __init__(self, graph: TwoLevelGraph, dataset: Dataset):
        if graph.n != dataset.n:
            raise UsageError("graph and dataset sizes differ")
        super().__init__(dataset.n, dataset.dim, graph.entry, graph.lower.cap, _max_cap(graph))
        self.graph = graph
        self.dataset = dataset
        self.norms = dataset.norms()
        self._access = (K.mem_nbrs_remapped, K.mem_dist, _mem_ctx(graph, dataset, self.norms, Layer.UPPER),
                        K.mem_nbrs, K.mem_dist, _mem_ctx(graph, dataset, self.norms, Layer.LOWER))

    def search(self, v_q, params: SearchParams, mask=None) -> SearchResult:
        q, bits, selected = self.prepare(v_q, mask)
        if selected == 0:
            return empty_result()
        return self.run(self._access, q, params, bits, selected / self.n)


def knn_search(graph: TwoLevelGraph, dataset: Dataset, v_q, params: SearchParams, mask=None) -> SearchResult:
    """Top-k selected nodes nearest to ``v_q`` (ascending distance)."""
    return Searcher(graph, dataset).search(v_q, params, mask)
