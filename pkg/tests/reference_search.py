"""Direct transcription of unfiltered layered beam search, written without
the package's kernels so it can serve as a differential reference.

Only the per-pair distance is borrowed (``l2_kernel``) so that results can be
compared bit for bit; everything else is heapq over ``(distance, id)``.
"""
import heapq
import math

import numpy as np

from filtann.core import l2_kernel


def beam_search(adjacency, dist, entry: int, efs: int):
    """Returns R ascending by (distance, id).

    ``adjacency(v)`` yields v's neighbours in stored order; ``dist(v)`` is the
    query distance.  ``r_max`` counts as infinite until R holds ``efs`` items.
    """
    d0 = dist(entry)
    cand = [(d0, entry)]
    res = [(-d0, -entry)]          # max-heap via negation
    visited = {entry}
    while cand:
        dc, c = heapq.heappop(cand)
        r_max = -res[0][0] if len(res) >= efs else math.inf
        if dc > r_max:
            break
        for n in adjacency(c):
            if n in visited:
                continue
            visited.add(n)
            dn = dist(n)
            r_max = -res[0][0] if len(res) >= efs else math.inf
            if len(res) < efs or dn < r_max:
                heapq.heappush(cand, (dn, n))
                heapq.heappush(res, (-dn, -n))
                if len(res) > efs:
                    heapq.heappop(res)
    return sorted((-d, -v) for d, v in res)


def two_layer_search(graph, data: np.ndarray, q, k: int, efs: int):
    """Upper layer with efs=1 from the fixed entry, then the lower layer from
    the node it returns.  Squared L2 only."""
    q64 = np.asarray(q, dtype=np.float64)
    cache = {}

    def dist(v):
        if v not in cache:
            cache[v] = l2_kernel(data[v], q64)
        return cache[v]

    upper = beam_search(graph.upper.neighbors, dist, graph.entry, 1)
    lower = beam_search(graph.lower.neighbors, dist, upper[0][1], efs)
    top = lower[:k]
    return [v for _, v in top], [d for d, _ in top]
