"""Exact filtered kNN by exhaustive scan, recall, and ground-truth files."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Dataset, DistanceKind, as_query
from .errors import FormatError, UsageError

GT_MAGIC = b"NVXGT1\0\0"


@dataclass
class GroundTruth:
    """Exact neighbours of one query, ascending by ``(distance, id)``."""

    ids: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.ids.tolist(), self.distances.tolist()))


def all_distances(dataset: Dataset, v_q, kind=DistanceKind.L2_SQUARED) -> np.ndarray:
    """Distance from ``v_q`` to every row, in float64."""
    kind = DistanceKind.parse(kind)
    q = as_query(v_q, dataset.dim)
    x = dataset.data.astype(np.float64)
    if kind == DistanceKind.L2_SQUARED:
        diff = x - q
        return np.einsum("ij,ij->i", diff, diff)
    qn = float(np.sqrt(q @ q))
    if qn == 0.0:
        raise UsageError("cosine distance to a zero query is undefined")
    d = 1.0 - (x @ q) / (dataset.norms() * qn)
    return np.clip(d, 0.0, 2.0)


def brute_force_knn(dataset: Dataset, mask, v_q, k: int, kind=DistanceKind.L2_SQUARED) -> GroundTruth:
    """Exact top-``min(k, |S|)`` over the selected rows; ties go to the lower id."""
    if k < 1:
        raise UsageError("k must be >= 1")
    d = all_distances(dataset, v_q, kind)
    if mask is None:
        cand = np.arange(dataset.n)
    else:
        bits = np.asarray(getattr(mask, "bits", mask), dtype=np.bool_)
        if bits.shape != (dataset.n,):
            raise UsageError("mask length differs from dataset size")
        cand = np.flatnonzero(bits)
    if cand.size == 0:
        return GroundTruth(np.zeros(0, np.int64), np.zeros(0, np.float64))
    dc = d[cand]
    take = min(k, cand.size)
    if take < cand.size:
        # Keep every row tied with the k-th distance so the id tie-break is exact.
        kth = np.partition(dc, take - 1)[take - 1]
        keep = dc <= kth
        cand, dc = cand[keep], dc[keep]
    order = np.lexsort((cand, dc))[:take]
    return GroundTruth(cand[order].astype(np.int64), dc[order])


def recall(result, truth) -> float:
    """``|result ∩ truth| / |truth|``; order is ignored."""
    truth_ids = truth.ids if isinstance(truth, GroundTruth) else truth
    truth_ids = set(np.asarray(truth_ids).tolist())
    if not truth_ids:
        raise UsageError("recall against an empty truth set is undefined")
    got = set(np.asarray(result).tolist())
    return len(got & truth_ids) / len(truth_ids)


def batch_ground_truth(dataset: Dataset, mask, queries, k: int, kind=DistanceKind.L2_SQUARED) -> list[GroundTruth]:
    return [brute_force_knn(dataset, mask, q, k, kind) for q in np.atleast_2d(queries)]


def write_ground_truth(truths: list[GroundTruth], k: int, path) -> None:
    """Ground-truth file; short rows (fewer than ``k`` selected) pad with ``2**64-1``."""
    ids = np.full((len(truths), k), np.iinfo(np.uint64).max, dtype="<u8")
    for i, t in enumerate(truths):
        ids[i, : len(t)] = t.ids[:k]
    with open(path, "wb") as f:
        f.write(GT_MAGIC)
        f.write(struct.pack("<II", k, len(truths)))
        f.write(ids.tobytes())


def read_ground_truth(path) -> np.ndarray:
    """Returns a ``(q, k)`` uint64 array (padding included)."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != GT_MAGIC:
        raise FormatError(f"{path}: not a ground-truth file")
    k, q = struct.unpack_from("<II", raw, 8)
    body = raw[16:]
    if len(body) != 8 * k * q:
        raise FormatError(f"{path}: expected {k * q} ids, found {len(body) // 8}")
    return np.frombuffer(body, dtype="<u8").reshape(q, k).astype(np.uint64)


def truth_ids(row: np.ndarray) -> np.ndarray:
    """Strip padding from one row of :func:`read_ground_truth`."""
    row = np.asarray(row, dtype=np.uint64)
    return row[row != np.iinfo(np.uint64).max].astype(np.int64)
