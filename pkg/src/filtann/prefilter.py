"""Selection predicates evaluated into node masks before any search runs.

A :class:`Semimask` is an immutable boolean vector over dataset offsets.  The
search kernels only ever test its bits.
"""
from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._jit import jit
from .core import Dataset
from .errors import FormatError, UsageError

MASK_MAGIC = b"NVXMASK1"


class Semimask:
    """Read-only selection bitmap of length ``n``."""

    __slots__ = ("_bits", "_count")

    def __init__(self, bits):
        arr = np.array(bits, dtype=np.bool_, copy=True).ravel()
        arr.setflags(write=False)
        self._bits = arr
        self._count = int(np.count_nonzero(arr))

    @classmethod
    def full(cls, n: int) -> "Semimask":
        return cls(np.ones(n, dtype=np.bool_))

    @classmethod
    def from_ids(cls, n: int, ids) -> "Semimask":
        bits = np.zeros(n, dtype=np.bool_)
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= n):
            raise UsageError("selected id outside [0, n)")
        bits[ids] = True
        return cls(bits)

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def n(self) -> int:
        return self._bits.shape[0]

    @property
    def selected_count(self) -> int:
        return self._count

    def __len__(self) -> int:
        return self.n

    def __contains__(self, v) -> bool:
        return bool(self._bits[int(v)])

    def __eq__(self, other) -> bool:
        return isinstance(other, Semimask) and np.array_equal(self._bits, other._bits)

    def __hash__(self):
        return hash((self.n, self._count, self._bits[: min(64, self.n)].tobytes()))

    def selected_ids(self) -> np.ndarray:
        return np.flatnonzero(self._bits)

    def __repr__(self) -> str:
        return f"Semimask(n={self.n}, selected={self._count})"


# -- predicates ----------------------------------------------------------------

@dataclass(frozen=True)
class All:
    pass


@dataclass(frozen=True)
class IdLessThan:
    threshold: int


@dataclass(frozen=True)
class IdRange:
    """Half-open id interval ``[lo, hi)``."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise UsageError(f"empty id range: lo={self.lo} > hi={self.hi}")


@dataclass(frozen=True)
class LabelEquals:
    label: int


@dataclass(frozen=True)
class RandomSample:
    """Exactly ``floor(rate * n)`` nodes drawn uniformly without replacement."""

    rate: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise UsageError(f"sample rate must lie in [0, 1], got {self.rate}")


@dataclass(frozen=True)
class MaskFile:
    path: str


Predicate = All | IdLessThan | IdRange | LabelEquals | RandomSample | MaskFile


def sample_count(rate: float, n: int) -> int:
    # The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
    return min(n, int(np.floor(rate * n + 1e-9)))


def evaluate(pred: Predicate, dataset: Dataset) -> Semimask:
    """Evaluate ``pred`` against every node of ``dataset``."""
    n = dataset.n
    if isinstance(pred, All):
        return Semimask.full(n)
    if isinstance(pred, IdLessThan):
        return Semimask(dataset.ids.astype(np.int64) < pred.threshold)
    if isinstance(pred, IdRange):
        ids = dataset.ids.astype(np.int64)
        return Semimask((ids >= pred.lo) & (ids < pred.hi))
    if isinstance(pred, LabelEquals):
        if pred.label < 0:
            return Semimask(np.zeros(n, np.bool_))
        return Semimask(dataset.labels == np.uint32(pred.label))
    if isinstance(pred, RandomSample):
        rng = np.random.default_rng(pred.seed)
        return Semimask.from_ids(n, rng.choice(n, size=sample_count(pred.rate, n), replace=False))
    if isinstance(pred, MaskFile):
        mask = read_mask(pred.path)
        if mask.n != n:
            raise FormatError(f"{pred.path}: mask has {mask.n} bits, dataset has {n} nodes")
        return mask
    raise UsageError(f"unsupported predicate {pred!r}")


def global_selectivity(mask: Semimask) -> float:
    if mask.n == 0:
        raise UsageError("selectivity of an empty universe is undefined")
    return mask.selected_count / mask.n


@jit
def _local_fraction(bits, nbrs):
    if nbrs.shape[0] == 0:
        return 0.0
    hits = 0
    for j in range(nbrs.shape[0]):
        if bits[nbrs[j]]:
            hits += 1
    return hits / nbrs.shape[0]


def local_selectivity(mask: Semimask, nbrs) -> float:
    """Selected fraction of ``nbrs``; 0 for an empty list.  Reads bits only."""
    bits = getattr(mask, "bits", mask)
    return float(_local_fraction(np.asarray(bits, dtype=np.bool_), np.asarray(nbrs, dtype=np.int64)))


# -- mask files ---------------------------------------------------------------

def write_mask(mask: Semimask, path) -> None:
    packed = np.packbits(mask.bits, bitorder="little")
    with open(path, "wb") as f:
        f.write(MASK_MAGIC)
        f.write(struct.pack("<Q", mask.n))
        f.write(packed.tobytes())


def read_mask(path) -> Semimask:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MASK_MAGIC:
        raise FormatError(f"{path}: not a mask file")
    (n,) = struct.unpack_from("<Q", raw, 8)
    body = raw[16:]
    if len(body) != (n + 7) // 8:
        raise FormatError(f"{path}: expected {(n + 7) // 8} payload bytes for {n} bits, found {len(body)}")
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8), count=n, bitorder="little")
    return Semimask(bits.astype(np.bool_))


# -- command-line predicate syntax ------------------------------------------------

_ID_LT = re.compile(r"^id\s*<\s*([0-9.eE+-]+)$")
_ID_RANGE = re.compile(r"^id\s+in\s*\[\s*(\d+)\s*,\s*(\d+)\s*\)$")
_LABEL = re.compile(r"^label\s*=\s*(-?\d+)$")
_RAND = re.compile(r"^rand:([0-9.eE+-]+)(?::(-?\d+))?$")


def parse_predicate(text: str, n: int | None = None) -> Predicate:
    """Parse ``id<0.25``, ``id<500``, ``id in [a,b)``, ``label=7``,
    ``rand:0.1:seed``, ``all`` or ``file:PATH``.

    A fractional ``id<x`` with ``x < 1`` is a fraction of ``n``.
    """
    s = text.strip()
    if s.lower() == "all":
        return All()
    if s.startswith("file:"):
        return MaskFile(s[5:])
    m = _ID_LT.match(s)
    if m:
        value = float(m.group(1))
        if value < 1.0 and "." in m.group(1):
            if n is None:
                raise UsageError("a fractional id threshold needs the dataset size")
            return IdLessThan(int(np.floor(value * n + 1e-9)))
        return IdLessThan(int(value))
    m = _ID_RANGE.match(s)
    if m:
        return IdRange(int(m.group(1)), int(m.group(2)))
    m = _LABEL.match(s)
    if m:
        return LabelEquals(int(m.group(1)))
    m = _RAND.match(s)
    if m:
        return RandomSample(float(m.group(1)), int(m.group(2) or 0))
    raise UsageError(f"cannot parse predicate {text!r}")
