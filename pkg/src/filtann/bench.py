"""Recall-targeted efs tuning and selectivity sweeps emitting CSV rows."""
from __future__ import annotations

import csv
import hashlib
import io
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset
from .errors import UsageError
from .oracle import brute_force_knn, recall
from .prefilter import IdLessThan, evaluate, sample_count
from .search import FIXED, Heuristic, SearchParams
from .workload import Correlation, WorkloadSpec, gen_correlated_mask, gen_queries

EFS_MAX = 1000
CSV_HEADER = ("dataset,heuristic,sigma,corr,efs,recall,lat_mean_us,lat_median_us,prefilter_us,"
              "t_dc,s_dc,popped,pins,misses,hist_onehop_s,hist_blind,hist_directed").split(",")


@dataclass
class TuneResult:
    efs: int
    recall: float
    failed: bool = False
    trace: dict = field(default_factory=dict)   # efs -> mean recall, in evaluation order

    def __str__(self) -> str:
        return f"FAILED(best={self.recall:.3f})" if self.failed else f"efs={self.efs} recall={self.recall:.3f}"


def _per_query_masks(masks, count: int) -> list:
    if isinstance(masks, (list, tuple)):
        if len(masks) != count:
            raise UsageError("need one mask per query")
        return list(masks)
    return [masks] * count


def mean_recall(index, queries, masks, truths, params: SearchParams) -> float:
    vals = []
    for q, m, t in zip(queries, masks, truths):
        if len(t) == 0:
            continue
        vals.append(recall(index.search(q, params, m).ids, t))
    return float(np.mean(vals)) if vals else 1.0


def autotune_efs(index, queries, mask, k: int, target_recall: float = 0.95, tol: float = 0.01,
                 heuristic=Heuristic.ADAPTIVE_L, truths=None, dataset: Dataset | None = None,
                 efs_max: int = EFS_MAX) -> TuneResult:
    """Smallest efs in ``[k, efs_max]`` whose mean recall reaches the target.

    Doubles from ``k`` until the target is met, then bisects the last
    interval.  If ``efs = k`` already overshoots, ``k`` is returned with its
    recall.  If ``efs_max`` falls short, the result is marked failed.
    ``mask`` may be one mask or a list with one per query.
    """
    queries = np.asarray(queries, dtype=np.float32)
    if queries.size == 0:
        raise UsageError("autotuning needs at least one query")
    queries = np.atleast_2d(queries)
    if not 0 < target_recall <= 1:
        raise UsageError("target recall must lie in (0, 1]")
    if k > efs_max:
        raise UsageError(f"k={k} exceeds the efs ceiling {efs_max}")
    masks = _per_query_masks(mask, len(queries))
    if truths is None:
        if dataset is None:
            raise UsageError("pass ground truth or the dataset to compute it")
        truths = [brute_force_knn(dataset, m, q, k, index_kind(index)) for q, m in zip(queries, masks)]
    heuristic = Heuristic.parse(heuristic)
    trace: dict = {}

    def measure(efs: int) -> float:
        if efs not in trace:
            trace[efs] = mean_recall(index, queries, masks, truths, SearchParams(k=k, efs=efs, heuristic=heuristic))
        return trace[efs]

    lo, efs = None, k
    while True:
        r = measure(efs)
        if r >= target_recall:
            break
        if efs >= efs_max:
            return TuneResult(efs_max, max(trace.values()), failed=True, trace=trace)
        lo, efs = efs, min(2 * efs, efs_max)
    if lo is None:
        return TuneResult(efs, r, trace=trace)
    hi = efs
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if measure(mid) >= target_recall:
            hi = mid
        else:
            lo = mid
    return TuneResult(hi, trace[hi], trace=trace)


def index_kind(index):
    graph = getattr(index, "graph", None)
    return graph.kind if graph is not None else getattr(index, "kind", 0)


# -- sweeps -------------------------------------------------------------------------

@dataclass
class BenchRow:
    dataset: str
    heuristic: str
    sigma: float
    corr: str
    efs: int
    recall: float
    lat_mean_us: float
    lat_median_us: float
    prefilter_us: float
    t_dc: float
    s_dc: float
    popped: float
    pins: float
    misses: float
    hist: dict
    failed: bool = False

    def as_csv(self) -> list:
        return [self.dataset, self.heuristic, f"{self.sigma:g}", self.corr,
                "FAILED" if self.failed else str(self.efs), f"{self.recall:.4f}",
                f"{self.lat_mean_us:.1f}", f"{self.lat_median_us:.1f}", f"{self.prefilter_us:.1f}",
                f"{self.t_dc:.2f}", f"{self.s_dc:.2f}", f"{self.popped:.2f}", f"{self.pins:.2f}",
                f"{self.misses:.2f}", f"{self.hist.get('onehop-s', 0):.2f}", f"{self.hist.get('blind', 0):.2f}",
                f"{self.hist.get('directed', 0):.2f}"]

    @property
    def buckets(self) -> int:
        return sum(1 for v in self.hist.values() if v > 0)


def index_fingerprint(index) -> str:
    manifest = getattr(index, "manifest", None)
    if manifest is not None:
        return manifest.digest()
    graph = index.graph
    h = hashlib.sha256()
    for store in (graph.lower, graph.upper):
        off, edges = store.to_csr()
        h.update(off.tobytes())
        h.update(edges.tobytes())
    h.update(np.ascontiguousarray(index.dataset.data).tobytes())
    return h.hexdigest()[:16]


def write_csv(rows, out=None, provenance: str | None = None) -> str:
    buf = io.StringIO()
    if provenance:
        buf.write(f"# {provenance}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.as_csv())
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


@dataclass
class SweepCase:
    """Queries, per-query masks and truth for one (sigma, correlation) point."""

    sigma: float
    corr: Correlation
    queries: np.ndarray
    masks: list
    truths: list
    prefilter_us: float


def build_case(dataset: Dataset, spec: WorkloadSpec, sigma: float, queries=None, kind=0) -> SweepCase:
    """Masks and exact truth for one sweep point.

    Uncorrelated points evaluate ``id < floor(sigma * n)`` once per query
    (ids carry no geometric meaning on shuffled data); correlated points build
    each query's distance-ranked mask.  Mask construction is timed as the
    prefilter cost.
    """
    corr = spec.correlation
    if queries is None:
        queries = gen_queries(dataset, spec.query_count, corr, seed=spec.seed)
    masks, times = [], []
    for i, q in enumerate(queries):
        t0 = time.perf_counter()
        if corr == Correlation.UNCORRELATED:
            m = evaluate(IdLessThan(sample_count(sigma, dataset.n)), dataset)
        else:
            m = gen_correlated_mask(dataset, q, sigma, corr, seed=spec.seed + i, kind=kind)
        times.append(time.perf_counter() - t0)
        masks.append(m)
    truths = [brute_force_knn(dataset, m, q, spec.k, kind) for q, m in zip(queries, masks)]
    return SweepCase(sigma, corr, np.asarray(queries), masks, truths, 1e6 * float(np.mean(times)))


def measure_row(index, case: SweepCase, heuristic, efs: int, k: int, name: str = "dataset",
                repeats: int = 5, cold: bool = False, failed: bool = False) -> BenchRow:
    """Time ``heuristic`` at a fixed ``efs`` over the case's queries.

    Warm mode runs each query once untimed, then ``repeats`` timed runs;
    cold mode flushes the page cache before every timed run.
    """
    heuristic = Heuristic.parse(heuristic)
    params = SearchParams(k=k, efs=efs, heuristic=heuristic)
    flush = getattr(index, "flush", None)
    lat, recs = [], []
    sums = dict(t_dc=0.0, s_dc=0.0, popped=0.0, pins=0.0, misses=0.0)
    hist = {h.value: 0.0 for h in FIXED if h != Heuristic.ONEHOP_A}
    nq = len(case.queries)
    for q, m, truth in zip(case.queries, case.masks, case.truths):
        if not cold:
            index.search(q, params, m)
        times, pins, misses = [], [], []
        res = None
        for _ in range(repeats):
            if cold and flush is not None:
                flush()
            t0 = time.perf_counter()
            res = index.search(q, params, m)
            times.append(time.perf_counter() - t0)
            pins.append(res.counters.pins)
            misses.append(res.counters.misses)
        lat.append(1e6 * float(np.mean(times)))
        if len(truth):
            recs.append(recall(res.ids, truth))
        c = res.counters
        sums["t_dc"] += c.t_dc
        sums["s_dc"] += c.s_dc
        sums["popped"] += c.popped
        sums["pins"] += float(np.mean(pins))
        sums["misses"] += float(np.mean(misses))
        for h, v in c.hist.items():
            if h.value in hist:
                hist[h.value] += v
    return BenchRow(
        dataset=name, heuristic=heuristic.value, sigma=case.sigma, corr=case.corr.value, efs=efs,
        recall=float(np.mean(recs)) if recs else 1.0, lat_mean_us=float(np.mean(lat)),
        lat_median_us=float(statistics.median(lat)), prefilter_us=case.prefilter_us,
        t_dc=sums["t_dc"] / nq, s_dc=sums["s_dc"] / nq, popped=sums["popped"] / nq,
        pins=sums["pins"] / nq, misses=sums["misses"] / nq, hist={h: v / nq for h, v in hist.items()},
        failed=failed,
    )


def run_sweep(spec: WorkloadSpec, index, heuristics, dataset: Dataset, name: str = "dataset",
              efs: int | None = None, tol: float = 0.01, repeats: int = 5, cold: bool = False,
              queries=None, progress=None) -> list[BenchRow]:
    """One row per (sigma, heuristic).

    With ``efs=None`` each row is first tuned to ``spec.target_recall``; a
    row that cannot reach it at efs 1000 is reported as failed at that efs.
    """
    rows = []
    heuristics = [Heuristic.parse(h) for h in heuristics]
    if queries is None:
        queries = gen_queries(dataset, spec.query_count, spec.correlation, seed=spec.seed)
    for sigma in spec.selectivities:
        case = build_case(dataset, spec, sigma, queries=queries, kind=index_kind(index))
        for h in heuristics:
            failed = False
            row_efs = efs
            if row_efs is None:
                tune = autotune_efs(index, case.queries, case.masks, spec.k, spec.target_recall, tol,
                                    heuristic=h, truths=case.truths)
                row_efs, failed = tune.efs, tune.failed
            row = measure_row(index, case, h, row_efs, spec.k, name=name, repeats=repeats, cold=cold,
                              failed=failed)
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


__all__ = ["EFS_MAX", "CSV_HEADER", "TuneResult", "BenchRow", "SweepCase", "autotune_efs", "build_case",
           "measure_row", "run_sweep", "write_csv", "index_fingerprint", "mean_recall"]
