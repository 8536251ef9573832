"""On-disk index files and a page-cached reader.

Layout of an index directory::

    vectors.nvx    "NVXVEC1\\0" | u64 n | u32 dim | u8 kind | f32 rows
    lower.csr      "NVXCSR1\\0" | u32 version | u64 n | u32 M_L | u64 offsets[n+1] | u32 edges
    upper.gph      "NVXUPR1\\0" | u64 m | u64 member_ids[m] | u64 offsets[m+1] | u32 edges
    attrs.bin      "NVXATR1\\0" | u64 n | u64 ids[n] | u32 labels[n]
    manifest.json  build parameters and sha256 of every file above

All integers are little-endian.  The upper layer is small and always loaded
whole.  Vector rows and lower-layer adjacency are read through
:class:`PagedStore`, a fixed pool of 4 KiB page frames with CLOCK eviction.

Vector rows start 21 bytes into the file, so a row can begin near the end of
one page and spill into the next.  Each frame therefore holds its page plus
a read-ahead tail one row long, which keeps every row contiguous inside the
frame of the page it starts on.  Distances are computed directly on that
frame memory.  A row access pins exactly one frame.  An adjacency lookup
pins the page holding its two offsets, then each page its edge run touches;
consecutive touches of the same page share one pin.
"""
from __future__ import annotations

import hashlib
import json
import mmap
import os
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._jit import jit
from .core import Dataset, DistanceKind, as_query, cosine_from_parts, dot_kernel, l2_kernel, query_norm
from .errors import FormatError, StorageError, UsageError
from .graph import AdjacencyStore, Layer, TwoLevelGraph, make_upper_remap, read_list
from .search import KernelRunner, SearchParams, SearchResult, empty_result

PAGE_SIZE = 4096
VEC_MAGIC = b"NVXVEC1\0"
CSR_MAGIC = b"NVXCSR1\0"
UPR_MAGIC = b"NVXUPR1\0"
ATR_MAGIC = b"NVXATR1\0"
CSR_VERSION = 1
VEC_HEADER = 21
CSR_HEADER = 24
FORMAT_VERSION = 1

VECTORS, LOWER, UPPER, ATTRS, MANIFEST = "vectors.nvx", "lower.csr", "upper.gph", "attrs.bin", "manifest.json"
DATA_FILES = (VECTORS, LOWER, UPPER, ATTRS)

_KIND_NAMES = {DistanceKind.L2_SQUARED: "l2", DistanceKind.COSINE: "cosine"}


@dataclass
class IndexManifest:
    dim: int
    n: int
    m_upper: int
    m_lower: int
    ef_construction: int
    sample_rate: float
    kind: DistanceKind
    seed: int
    entry: int
    checksums: dict = field(default_factory=dict)
    page_size: int = PAGE_SIZE
    format: int = FORMAT_VERSION

    def to_json(self) -> str:
        doc = {
            "format": self.format, "dim": self.dim, "n": self.n, "M_U": self.m_upper, "M_L": self.m_lower,
            "efC": self.ef_construction, "sample_rate": self.sample_rate, "kind": _KIND_NAMES[self.kind],
            "seed": self.seed, "entry": self.entry, "page_size": self.page_size, "checksums": self.checksums,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "IndexManifest":
        try:
            doc = json.loads(text)
            kind = {v: k for k, v in _KIND_NAMES.items()}[doc["kind"]]
            return cls(dim=int(doc["dim"]), n=int(doc["n"]), m_upper=int(doc["M_U"]), m_lower=int(doc["M_L"]),
                       ef_construction=int(doc["efC"]), sample_rate=float(doc["sample_rate"]), kind=kind,
                       seed=int(doc["seed"]), entry=int(doc["entry"]), checksums=dict(doc["checksums"]),
                       page_size=int(doc.get("page_size", PAGE_SIZE)), format=int(doc.get("format", 1)))
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"bad manifest: {exc!r}") from None

    def digest(self) -> str:
        """Short fingerprint of the whole index (manifest included)."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(path: Path, parts) -> None:
    try:
        with open(path, "wb") as f:
            for p in parts:
                f.write(p)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc.strerror or exc}") from exc


# -- writing -------------------------------------------------------------------

def persist(graph: TwoLevelGraph, dataset: Dataset, directory) -> IndexManifest:
    """Write ``graph`` and ``dataset`` to ``directory`` (created if needed)."""
    if dataset.n == 0 or graph.n == 0:
        raise UsageError("cannot persist an empty index")
    if graph.n != dataset.n:
        raise UsageError("graph and dataset sizes differ")
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create {d}: {exc.strerror or exc}") from exc
    n, dim = dataset.n, dataset.dim
    kind = DistanceKind.parse(graph.kind)

    _write(d / VECTORS, [VEC_MAGIC, struct.pack("<QIB", n, dim, int(kind)),
                         np.ascontiguousarray(dataset.data, dtype="<f4").tobytes()])

    offsets, edges = graph.lower.to_csr()
    _write(d / LOWER, [CSR_MAGIC, struct.pack("<IQI", CSR_VERSION, n, graph.lower.cap),
                       offsets.astype("<u8").tobytes(), edges.astype("<u4").tobytes()])

    members = np.asarray(graph.upper_members, dtype="<u8")
    up_off, up_edges = graph.upper.to_csr()
    _write(d / UPPER, [UPR_MAGIC, struct.pack("<Q", members.size), members.tobytes(),
                       up_off.astype("<u8").tobytes(), up_edges.astype("<u4").tobytes()])

    _write(d / ATTRS, [ATR_MAGIC, struct.pack("<Q", n), dataset.ids.astype("<u8").tobytes(),
                       dataset.labels.astype("<u4").tobytes()])

    p = graph.params
    manifest = IndexManifest(
        dim=dim, n=n, m_upper=graph.upper.cap, m_lower=graph.lower.cap,
        ef_construction=int(getattr(p, "ef_construction", 0)), sample_rate=float(getattr(p, "sample_rate", 0.0)),
        kind=kind, seed=int(getattr(p, "seed", 0)), entry=int(graph.entry),
        checksums={name: _sha256(d / name) for name in DATA_FILES},
    )
    _write(d / MANIFEST, [manifest.to_json().encode()])
    return manifest


# -- paged store ---------------------------------------------------------------------
# Store state lives in plain arrays so compiled search code can pin pages.
# Layout slots:
L_PAGE, L_FRAME, L_ROW, L_DIM, L_N, L_OFF, L_EDGE, L_P0, L_VLEN, L_CLEN = range(10)


@jit(inline=True)
def _evict(frame_page, page_frame, refbit, pincount, hand):
    nf = frame_page.shape[0]
    for _ in range(3 * nf):
        f = hand[0]
        hand[0] = (f + 1) % nf
        if pincount[f] > 0:
            continue
        if frame_page[f] < 0:
            return f
        if refbit[f]:
            refbit[f] = 0
            continue
        page_frame[frame_page[f]] = -1
        frame_page[f] = -1
        return f
    raise RuntimeError("page cache exhausted: every frame is pinned")


@jit(inline=True)
def _pin(frames, frame_page, page_frame, refbit, pincount, hand, stats, src, page, gpage, lay):
    f = page_frame[gpage]
    if f < 0:
        f = _evict(frame_page, page_frame, refbit, pincount, hand)
        start = page * lay[L_PAGE]
        end = min(src.shape[0], start + lay[L_FRAME])
        for i in range(end - start):
            frames[f, i] = src[start + i]
        frame_page[f] = gpage
        page_frame[gpage] = f
        stats[1] += 1
    stats[0] += 1
    refbit[f] = 1
    pincount[f] += 1
    return f


@jit
def pin_vector(ctx, v):
    """Pin the frame holding row ``v``; returns ``(frame, byte offset)``."""
    frames, frame_page, page_frame, refbit, pincount, hand, stats = ctx[0], ctx[1], ctx[2], ctx[3], ctx[4], ctx[5], ctx[6]
    lay = ctx[9]
    off = VEC_HEADER + v * lay[L_ROW]
    page = off // lay[L_PAGE]
    f = _pin(frames, frame_page, page_frame, refbit, pincount, hand, stats, ctx[7], page, page, lay)
    return f, off - page * lay[L_PAGE]


@jit
def unpin(ctx, f):
    ctx[4][f] -= 1


@jit
def paged_dist(ctx, v, q, qnorm):
    """Distance from row ``v`` to ``q`` computed on the frame bytes."""
    f, i = pin_vector(ctx, v)
    lay = ctx[9]
    row = ctx[0][f, i:i + lay[L_ROW]].view(np.float32)
    if ctx[10] == 0:
        d = l2_kernel(row, q)
    else:
        d = cosine_from_parts(dot_kernel(row, q), np.sqrt(dot_kernel(row, row)), qnorm)
    ctx[4][f] -= 1
    return d


# Little-endian integer reads from frame bytes.  Offsets stay below 2**63,
# so int64 is safe and avoids numba's uint64/int64 promotion to float.
@jit(inline=True)
def _u64(frames, f, i):
    x = 0
    for b in range(8):
        x |= np.int64(frames[f, i + b]) << (8 * b)
    return x


@jit(inline=True)
def _u32(frames, f, i):
    x = 0
    for b in range(4):
        x |= np.int64(frames[f, i + b]) << (8 * b)
    return x


@jit
def paged_nbrs(ctx, v, out):
    """Copy node ``v``'s lower-layer list from the CSR file into ``out``."""
    frames, frame_page, page_frame, refbit, pincount, hand, stats = ctx[0], ctx[1], ctx[2], ctx[3], ctx[4], ctx[5], ctx[6]
    csr = ctx[8]
    lay = ctx[9]
    ps = lay[L_PAGE]
    p0 = lay[L_P0]
    off = lay[L_OFF] + 8 * v
    page = off // ps
    f = _pin(frames, frame_page, page_frame, refbit, pincount, hand, stats, csr, page, p0 + page, lay)
    lo = _u64(frames, f, off - page * ps)
    off2 = off + 8
    if off2 // ps != page:
        pincount[f] -= 1
        page = off2 // ps
        f = _pin(frames, frame_page, page_frame, refbit, pincount, hand, stats, csr, page, p0 + page, lay)
    hi = _u64(frames, f, off2 - page * ps)
    deg = 0
    for e in range(lo, hi):
        b = lay[L_EDGE] + 4 * e
        if b // ps != page:
            pincount[f] -= 1
            page = b // ps
            f = _pin(frames, frame_page, page_frame, refbit, pincount, hand, stats, csr, page, p0 + page, lay)
        out[deg] = _u32(frames, f, b - page * ps)
        deg += 1
    pincount[f] -= 1
    return deg


@jit
def resident_dist(ctx, v, q, qnorm):
    data = ctx[14]
    if ctx[10] == 0:
        return l2_kernel(data[v], q)
    return cosine_from_parts(dot_kernel(data[v], q), ctx[15][v], qnorm)


@jit
def resident_upper_nbrs(ctx, v, out):
    return read_list(ctx[11], ctx[12], ctx[13][v], out)


@jit
def _drop_all(frame_page, page_frame, refbit, pincount, hand):
    for f in range(frame_page.shape[0]):
        if pincount[f] > 0:
            raise RuntimeError("cannot flush while pages are pinned")
        if frame_page[f] >= 0:
            page_frame[frame_page[f]] = -1
        frame_page[f] = -1
        refbit[f] = 0
    hand[0] = 0


def _map(path: Path) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            size = os.fstat(f.fileno()).st_size
            if size == 0:
                raise FormatError(f"{path}: empty file")
            mm = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
    except OSError as exc:
        raise StorageError(f"cannot map {path}: {exc.strerror or exc}") from exc
    return np.frombuffer(mm, dtype=np.uint8)


class PagedStore:
    """Page frames over the vector file and the lower-layer CSR file.

    ``capacity`` is the page budget in bytes (``None`` means room for every
    page); the pool holds ``max(1, capacity // 4096)`` frames.  ``pins``
    counts page touches and ``misses`` counts pages copied in from the file.
    """

    def __init__(self, vec: np.ndarray, csr: np.ndarray, dim: int, n: int, capacity: int | None = None,
                 page_size: int = PAGE_SIZE):
        row = 4 * dim
        pages_v = -(-vec.shape[0] // page_size)
        pages_c = -(-csr.shape[0] // page_size)
        total = pages_v + pages_c
        if capacity is None:
            nframes = total
        else:
            if capacity < 0:
                raise UsageError("page budget must be >= 0")
            nframes = max(1, min(total, int(capacity) // page_size))
        self.page_size = page_size
        self.capacity = None if capacity is None else int(capacity)
        self.total_pages = total
        self.vec = vec
        self.csr = csr
        self.frames = np.zeros((nframes, page_size + row), dtype=np.uint8)
        self.frame_page = np.full(nframes, -1, dtype=np.int64)
        self.page_frame = np.full(total, -1, dtype=np.int64)
        self.refbit = np.zeros(nframes, dtype=np.uint8)
        self.pincount = np.zeros(nframes, dtype=np.int64)
        self.hand = np.zeros(1, dtype=np.int64)
        self.stats = np.zeros(2, dtype=np.int64)
        self.layout = np.array([page_size, page_size + row, row, dim, n, CSR_HEADER, CSR_HEADER + 8 * (n + 1),
                                pages_v, vec.shape[0], csr.shape[0]], dtype=np.int64)
        self.lock = threading.RLock()
        # Rows materialised by the copy path; the in-frame path never bumps it.
        self.copies = 0

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def resident_bytes(self) -> int:
        return int(np.count_nonzero(self.frame_page >= 0)) * self.page_size

    @property
    def pins(self) -> int:
        return int(self.stats[0])

    @property
    def misses(self) -> int:
        return int(self.stats[1])

    def ctx(self, kind: int, upper: AdjacencyStore | None = None, data=None, norms=None):
        if upper is None:
            slots, pub, remap = np.zeros((0, 2, 1), np.int32), np.zeros(0, np.int64), np.zeros(0, np.int64)
        else:
            slots, pub, remap = upper.slots, upper.pub, upper.remap
        if data is None:
            data = np.zeros((0, int(self.layout[L_DIM])), np.float32)
            norms = np.zeros(0, np.float64)
        return (self.frames, self.frame_page, self.page_frame, self.refbit, self.pincount, self.hand,
                self.stats, self.vec, self.csr, self.layout, int(kind), slots, pub, remap, data, norms)

    def flush(self) -> None:
        """Drop every cached page (counters are kept)."""
        with self.lock:
            _drop_all(self.frame_page, self.page_frame, self.refbit, self.pincount, self.hand)

    def reset_stats(self) -> None:
        self.stats[:] = 0


# -- loaded index ------------------------------------------------------------------

def _read_header(mm: np.ndarray, magic: bytes, fmt: str, path: Path):
    size = len(magic) + struct.calcsize(fmt)
    if mm.shape[0] < size or bytes(mm[: len(magic)]) != magic:
        raise FormatError(f"{path}: bad magic or truncated header")
    return struct.unpack_from(fmt, mm, len(magic))


class DiskIndex:
    """A persisted index opened for search.

    Exposes ``n``, ``ids`` and ``labels`` so predicates can be evaluated
    against it directly.
    """

    def __init__(self, directory, page_budget: int | None = None, cache_vectors: bool = False,
                 verify: bool = True):
        d = Path(directory)
        self.directory = d
        try:
            text = (d / MANIFEST).read_text()
        except OSError as exc:
            raise StorageError(f"cannot read {d / MANIFEST}: {exc.strerror or exc}") from exc
        self.manifest = m = IndexManifest.from_json(text)
        for name in DATA_FILES:
            if not (d / name).exists():
                raise FormatError(f"{d / name}: missing index file")
            if verify and _sha256(d / name) != m.checksums.get(name):
                raise FormatError(f"{d / name}: checksum does not match manifest")
        self.n, self.dim, self.kind = m.n, m.dim, m.kind

        vec = _map(d / VECTORS)
        n, dim, kind = _read_header(vec, VEC_MAGIC, "<QIB", d / VECTORS)
        if (n, dim, kind) != (m.n, m.dim, int(m.kind)) or vec.shape[0] != VEC_HEADER + 4 * n * dim:
            raise FormatError(f"{d / VECTORS}: header or size disagrees with manifest")

        csr = _map(d / LOWER)
        version, n2, cap = _read_header(csr, CSR_MAGIC, "<IQI", d / LOWER)
        if version != CSR_VERSION or n2 != m.n or cap != m.m_lower:
            raise FormatError(f"{d / LOWER}: header disagrees with manifest")
        offsets = np.frombuffer(csr, dtype="<u8", count=n + 1, offset=CSR_HEADER)
        nnz = int(offsets[-1])
        if csr.shape[0] != CSR_HEADER + 8 * (n + 1) + 4 * nnz or (np.diff(offsets.astype(np.int64)) < 0).any():
            raise FormatError(f"{d / LOWER}: offsets inconsistent with file size")

        self.upper = self._load_upper(d / UPPER)
        self.upper_members = np.flatnonzero(self.upper.remap >= 0)
        self.entry = m.entry
        if self.upper.remap[self.entry] < 0:
            raise FormatError(f"{d / MANIFEST}: entry {self.entry} is not an upper-layer member")
        self.ids, self.labels = self._load_attrs(d / ATTRS)

        budget = page_budget
        self.store = PagedStore(vec, csr, dim, n, budget)
        self.cache_vectors = bool(cache_vectors)
        data = norms = None
        if cache_vectors:
            data = np.frombuffer(vec, dtype="<f4", offset=VEC_HEADER).reshape(n, dim).astype(np.float32)
            norms = Dataset(data).norms()
        ctx = self.store.ctx(int(m.kind), self.upper, data, norms)
        dist = resident_dist if cache_vectors else paged_dist
        self._access = (resident_upper_nbrs, dist, ctx, paged_nbrs, dist, ctx)
        self._ctx = ctx
        self._runner = KernelRunner(n, dim, self.entry, m.m_lower, max(m.m_lower, m.m_upper))

    def _load_upper(self, path: Path) -> AdjacencyStore:
        raw = _map(path)
        (mcount,) = _read_header(raw, UPR_MAGIC, "<Q", path)
        base = 16
        need = base + 8 * mcount + 8 * (mcount + 1)
        if raw.shape[0] < need:
            raise FormatError(f"{path}: truncated")
        members = np.frombuffer(raw, dtype="<u8", count=mcount, offset=base).astype(np.int64)
        offsets = np.frombuffer(raw, dtype="<u8", count=mcount + 1, offset=base + 8 * mcount).astype(np.int64)
        nnz = int(offsets[-1])
        if raw.shape[0] != need + 4 * nnz:
            raise FormatError(f"{path}: size disagrees with offsets")
        edges = np.frombuffer(raw, dtype="<u4", count=nnz, offset=need).astype(np.int64)
        if mcount == 0 or members.max() >= self.n or (edges.size and edges.max() >= self.n):
            raise FormatError(f"{path}: member or edge id out of range")
        remap = make_upper_remap(self.n, members)
        return AdjacencyStore.from_csr(offsets, edges, self.manifest.m_upper, self.n, remap)

    def _load_attrs(self, path: Path):
        raw = _map(path)
        (n,) = _read_header(raw, ATR_MAGIC, "<Q", path)
        if n != self.n or raw.shape[0] != 16 + 12 * n:
            raise FormatError(f"{path}: size disagrees with manifest")
        ids = np.frombuffer(raw, dtype="<u8", count=n, offset=16).astype(np.uint64)
        labels = np.frombuffer(raw, dtype="<u4", count=n, offset=16 + 8 * n).astype(np.uint32)
        return ids, labels

    # -- search --

    @property
    def pins(self) -> int:
        return self.store.pins

    @property
    def misses(self) -> int:
        return self.store.misses

    def flush(self) -> None:
        self.store.flush()

    def search(self, v_q, params: SearchParams, mask=None) -> SearchResult:
        q, bits, selected = self._runner.prepare(v_q, mask)
        if selected == 0:
            return empty_result()
        with self.store.lock:
            pins, misses = self.store.pins, self.store.misses
            res = self._runner.run(self._access, q, params, bits, selected / self.n)
            res.counters.pins = self.store.pins - pins
            res.counters.misses = self.store.misses - misses
        return res

    # -- row and list access --

    def _check(self, v) -> int:
        v = int(v)
        if not 0 <= v < self.n:
            raise UsageError(f"node {v} outside [0, {self.n})")
        return v

    def with_vector(self, v: int, f):
        """Call ``f`` on row ``v`` as a read-only float32 view of frame memory."""
        v = self._check(v)
        with self.store.lock:
            frame, off = pin_vector(self._ctx, v)
        try:
            row = self.store.frames[frame, off:off + 4 * self.dim].view("<f4")
            row.flags.writeable = False
            return f(row)
        finally:
            with self.store.lock:
                unpin(self._ctx, frame)

    def vector(self, v: int) -> np.ndarray:
        """Copy of row ``v`` read straight from the file (the copy path)."""
        v = self._check(v)
        self.store.copies += 1
        start = VEC_HEADER + 4 * self.dim * v
        return np.frombuffer(self.store.vec, dtype="<f4", count=self.dim, offset=start).astype(np.float32)

    def distance(self, v: int, v_q) -> float:
        """Paged distance from row ``v`` to ``v_q`` (same kernel as search)."""
        v = self._check(v)
        q = as_query(v_q, self.dim)
        with self.store.lock:
            return float(paged_dist(self._ctx, v, q, query_norm(q)))

    def neighbors(self, layer: Layer, v: int) -> list[int]:
        v = self._check(v)
        if Layer(layer) == Layer.UPPER:
            return self.upper.neighbors(v)
        out = np.empty(self.manifest.m_lower, dtype=np.int32)
        with self.store.lock:
            deg = paged_nbrs(self._ctx, v, out)
        return out[:deg].tolist()

    # -- materialisation --

    def to_dataset(self) -> Dataset:
        data = np.frombuffer(self.store.vec, dtype="<f4", offset=VEC_HEADER).reshape(self.n, self.dim)
        return Dataset(data.astype(np.float32), ids=self.ids, labels=self.labels)

    def to_graph(self) -> TwoLevelGraph:
        csr = self.store.csr
        offsets = np.frombuffer(csr, dtype="<u8", count=self.n + 1, offset=CSR_HEADER).astype(np.int64)
        edges = np.frombuffer(csr, dtype="<u4", count=int(offsets[-1]),
                              offset=CSR_HEADER + 8 * (self.n + 1)).astype(np.int64)
        lower = AdjacencyStore.from_csr(offsets, edges, self.manifest.m_lower, self.n)
        m = self.manifest
        params = _LoadedParams(m.m_upper, m.m_lower, m.ef_construction, m.sample_rate, m.seed, m.kind)
        return TwoLevelGraph(lower=lower, upper=self.upper, upper_members=self.upper_members, entry=self.entry,
                             params=params, kind=m.kind)

    @property
    def file_bytes(self) -> int:
        """Size of the paged files (vectors and lower layer)."""
        return int(self.store.vec.shape[0] + self.store.csr.shape[0])


@dataclass(frozen=True)
class _LoadedParams:
    m_upper: int
    m_lower: int
    ef_construction: int
    sample_rate: float
    seed: int
    kind: DistanceKind


def load(directory, page_budget: int | None = None, cache_vectors: bool = False) -> DiskIndex:
    """Open a persisted index.  ``page_budget`` in bytes; ``None`` caches every page."""
    return DiskIndex(directory, page_budget=page_budget, cache_vectors=cache_vectors)


# -- in-memory graph snapshots -------------------------------------------------------

def save_graph(graph: TwoLevelGraph, path) -> None:
    """Compact ``.npz`` snapshot of a built graph (no vectors)."""
    lo_off, lo_edges = graph.lower.to_csr()
    up_off, up_edges = graph.upper.to_csr()
    p = graph.params
    meta = np.array([graph.upper.cap, graph.lower.cap, int(getattr(p, "ef_construction", 0)),
                     int(getattr(p, "seed", 0)), int(graph.entry), int(graph.kind)], dtype=np.int64)
    try:
        with open(path, "wb") as f:
            np.savez(f, lo_off=lo_off, lo_edges=lo_edges, up_off=up_off, up_edges=up_edges,
                     members=np.asarray(graph.upper_members, np.int64), meta=meta,
                     sample_rate=np.array([float(getattr(p, "sample_rate", 0.0))]))
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc.strerror or exc}") from exc


def load_graph(path) -> TwoLevelGraph:
    try:
        z = np.load(path)
        m_upper, m_lower, efc, seed, entry, kind = (int(x) for x in z["meta"])
        n = z["lo_off"].shape[0] - 1
        remap = make_upper_remap(n, z["members"])
        lower = AdjacencyStore.from_csr(z["lo_off"], z["lo_edges"], m_lower, n)
        upper = AdjacencyStore.from_csr(z["up_off"], z["up_edges"], m_upper, n, remap)
        kind = DistanceKind(kind)
        params = _LoadedParams(m_upper, m_lower, efc, float(z["sample_rate"][0]), seed, kind)
        return TwoLevelGraph(lower=lower, upper=upper, upper_members=z["members"].astype(np.int64), entry=entry,
                             params=params, kind=kind)
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: not a graph snapshot ({exc})") from None
