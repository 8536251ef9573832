"""Datasets, query sets and correlated selections for sweeps.

Synthetic data is a Gaussian mixture with cluster centres drawn uniformly
from the unit cube.  Cluster membership is assigned in shuffled order, so a
node's id says nothing about its position and id-range predicates behave as
uncorrelated selections.
"""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import Dataset, DistanceKind
from .errors import FormatError, UsageError
from .oracle import all_distances, brute_force_knn
from .prefilter import RandomSample, Semimask, evaluate, sample_count


class Correlation(enum.Enum):
    UNCORRELATED = "un"
    POSITIVE = "pos"
    NEGATIVE = "neg"

    @classmethod
    def parse(cls, value) -> "Correlation":
        if isinstance(value, Correlation):
            return value
        key = str(value).strip().lower()
        key = {"uncorrelated": "un", "positive": "pos", "negative": "neg"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise UsageError(f"unknown correlation mode {value!r}") from None


# -- fvecs ---------------------------------------------------------------------

def load_fvecs(path) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise FormatError(f"{path}: empty or truncated fvecs file")
    (dim,) = np.frombuffer(raw, dtype="<u4", count=1)
    dim = int(dim)
    if dim == 0:
        raise FormatError(f"{path}: zero dimension")
    rec = 4 + 4 * dim
    if len(raw) % rec:
        raise FormatError(f"{path}: size {len(raw)} is not a multiple of the {rec}-byte record")
    words = np.frombuffer(raw, dtype="<u4").reshape(-1, dim + 1)
    if not (words[:, 0] == dim).all():
        bad = int(np.flatnonzero(words[:, 0] != dim)[0])
        raise FormatError(f"{path}: record {bad} has dimension {int(words[bad, 0])}, expected {dim}")
    data = words[:, 1:].copy().view("<f4").astype(np.float32)
    return Dataset(data)


def write_fvecs(dataset_or_array, path) -> None:
    data = getattr(dataset_or_array, "data", dataset_or_array)
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2:
        raise UsageError("fvecs rows must form a 2-d array")
    n, dim = data.shape
    out = np.empty((n, dim + 1), dtype="<u4")
    out[:, 0] = dim
    out[:, 1:] = data.view("<u4")
    Path(path).write_bytes(out.tobytes())


def save_dataset(dataset: Dataset, path) -> None:
    """fvecs file plus a ``.labels`` sidecar (raw little-endian u32 per row)."""
    write_fvecs(dataset, path)
    Path(str(path) + ".labels").write_bytes(dataset.labels.astype("<u4").tobytes())


def load_dataset(path) -> Dataset:
    """fvecs rows; labels come from a ``.labels`` sidecar when one exists."""
    ds = load_fvecs(path)
    side = Path(str(path) + ".labels")
    if side.exists():
        labels = np.frombuffer(side.read_bytes(), dtype="<u4")
        if labels.shape[0] != ds.n:
            raise FormatError(f"{side}: {labels.shape[0]} labels for {ds.n} vectors")
        ds = Dataset(ds.data, labels=labels.astype(np.uint32))
    return ds


# -- synthetic data --------------------------------------------------------------

def gen_synthetic(n: int, dim: int, clusters: int, spread: float, seed: int = 0) -> Dataset:
    """Gaussian mixture; ``labels`` holds each node's cluster."""
    if clusters < 1:
        raise UsageError("need at least one cluster")
    if n < 0 or dim < 1:
        raise UsageError("need n >= 0 and dim >= 1")
    if spread < 0:
        raise UsageError("spread must be >= 0")
    rng = np.random.default_rng(seed)
    centers = rng.random((clusters, dim))
    labels = rng.permutation(np.arange(n) % clusters)
    noise = rng.standard_normal((n, dim)) * spread
    data = (centers[labels] + noise).astype(np.float32)
    return Dataset(data, labels=labels.astype(np.uint32))


def mixture_estimate(dataset: Dataset) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-label centres, label frequencies and the pooled per-coordinate std."""
    labels = dataset.labels.astype(np.int64)
    uniq, inv, counts = np.unique(labels, return_inverse=True, return_counts=True)
    x = dataset.data.astype(np.float64)
    centers = np.zeros((uniq.size, dataset.dim))
    np.add.at(centers, inv, x)
    centers /= counts[:, None]
    resid = x - centers[inv]
    spread = float(np.sqrt((resid ** 2).mean())) if dataset.n else 0.0
    return centers, counts / counts.sum(), spread


def gen_queries(dataset: Dataset, count: int, mode=Correlation.UNCORRELATED, seed: int = 0,
                noise: float | None = None) -> np.ndarray:
    """Query vectors (float32, ``count x dim``).

    Uncorrelated and negative workloads sample fresh points from the mixture
    fitted to the dataset's labels; positive workloads jitter randomly chosen
    dataset rows by ``noise`` (default: a tenth of the fitted spread).
    """
    if count < 1:
        raise UsageError("query count must be >= 1")
    mode = Correlation.parse(mode)
    rng = np.random.default_rng(seed)
    centers, weights, spread = mixture_estimate(dataset)
    if mode == Correlation.POSITIVE:
        base = dataset.data[rng.integers(0, dataset.n, size=count)].astype(np.float64)
        scale = 0.1 * spread if noise is None else noise
        q = base + rng.standard_normal(base.shape) * scale
    else:
        which = rng.choice(centers.shape[0], size=count, p=weights)
        q = centers[which] + rng.standard_normal((count, dataset.dim)) * spread
    return q.astype(np.float32)


# -- correlation -------------------------------------------------------------------

def correlation_ce(dataset: Dataset, mask: Semimask, v_q, k: int, kind=DistanceKind.L2_SQUARED) -> float:
    """Selected share of ``v_q``'s unfiltered k nearest, divided by the global
    selectivity.  1 means the neighbourhood looks like the whole dataset."""
    sigma = mask.selected_count / mask.n
    if sigma <= 0:
        raise UsageError("correlation is undefined for an empty selection")
    if not 1 <= k <= dataset.n:
        raise UsageError("k must lie in [1, n]")
    truth = brute_force_knn(dataset, None, v_q, k, kind)
    hits = int(np.count_nonzero(mask.bits[truth.ids]))
    return (hits / k) / sigma


def gen_correlated_mask(dataset: Dataset, v_q, sigma: float, mode, seed: int = 0,
                        kind=DistanceKind.L2_SQUARED) -> Semimask:
    """Exactly ``floor(sigma * n)`` selected nodes.

    Positive picks the nodes nearest to ``v_q``, negative the farthest, and
    uncorrelated a uniform sample.  Distance ties go to the lower id.
    """
    if not 0 < sigma <= 1:
        raise UsageError("sigma must lie in (0, 1]")
    mode = Correlation.parse(mode)
    n = dataset.n
    if mode == Correlation.UNCORRELATED:
        return evaluate(RandomSample(sigma, seed), dataset)
    count = sample_count(sigma, n)
    d = all_distances(dataset, v_q, kind)
    ids = np.arange(n)
    order = np.lexsort((ids, d)) if mode == Correlation.POSITIVE else np.lexsort((ids, -d))
    return Semimask.from_ids(n, order[:count])


@dataclass
class CorrelationReport:
    values: dict = field(default_factory=dict)   # (query index, sigma) -> ce

    def mean(self, sigma: float) -> float:
        vals = [v for (_, s), v in self.values.items() if s == sigma]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def means(self) -> dict:
        return {s: self.mean(s) for s in sorted({s for _, s in self.values})}


def correlation_report(dataset: Dataset, queries, sigmas, mode, k: int = 100, seed: int = 0,
                       kind=DistanceKind.L2_SQUARED) -> CorrelationReport:
    report = CorrelationReport()
    for qi, q in enumerate(np.atleast_2d(queries)):
        for s in sigmas:
            mask = gen_correlated_mask(dataset, q, s, mode, seed=seed + qi, kind=kind)
            report.values[(qi, s)] = correlation_ce(dataset, mask, q, k, kind)
    return report


# -- sweep description --------------------------------------------------------------

@dataclass
class WorkloadSpec:
    selectivities: list = field(default_factory=lambda: [0.01, 0.05, 0.1, 0.3, 0.5, 0.9, 1.0])
    correlation: Correlation = Correlation.UNCORRELATED
    query_count: int = 50
    k: int = 10
    target_recall: float = 0.95
    seed: int = 0

    def __post_init__(self):
        self.correlation = Correlation.parse(self.correlation)
        self.selectivities = [float(s) for s in self.selectivities]
        if not self.selectivities or any(not 0 < s <= 1 for s in self.selectivities):
            raise UsageError("selectivities must lie in (0, 1]")
        if self.query_count < 1:
            raise UsageError("query_count must be >= 1")
        if self.k < 1:
            raise UsageError("k must be >= 1")
        if not 0 < self.target_recall <= 1:
            raise UsageError("target_recall must lie in (0, 1]")

    def to_json(self) -> str:
        d = asdict(self)
        d["correlation"] = self.correlation.value
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "WorkloadSpec":
        try:
            return cls(**json.loads(text))
        except (TypeError, json.JSONDecodeError) as exc:
            raise FormatError(f"bad workload document: {exc}") from None
