"""Binary heaps over parallel (distance, id) arrays.

Ordering is lexicographic on ``(distance, id)`` so traces are reproducible
when distances tie.  Functions take the current size and return the new one.
"""
from __future__ import annotations

from ._jit import jit


@jit(inline=True)
def _less(da, ia, db, ib):
    return da < db or (da == db and ia < ib)


@jit(inline=True)
def min_push(hd, hi, size, d, i):
    pos = size
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(d, i, hd[parent], hi[parent]):
            hd[pos] = hd[parent]
            hi[pos] = hi[parent]
            pos = parent
        else:
            break
    hd[pos] = d
    hi[pos] = i
    return size + 1


@jit(inline=True)
def min_pop(hd, hi, size):
    """Remove the root; caller reads ``hd[0], hi[0]`` beforehand."""
    size -= 1
    if size == 0:
        return 0
    d = hd[size]
    i = hi[size]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _less(hd[child + 1], hi[child + 1], hd[child], hi[child]):
            child += 1
        if _less(hd[child], hi[child], d, i):
            hd[pos] = hd[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    hd[pos] = d
    hi[pos] = i
    return size


@jit(inline=True)
def max_push(hd, hi, size, d, i):
    pos = size
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(hd[parent], hi[parent], d, i):
            hd[pos] = hd[parent]
            hi[pos] = hi[parent]
            pos = parent
        else:
            break
    hd[pos] = d
    hi[pos] = i
    return size + 1


@jit(inline=True)
def max_pop(hd, hi, size):
    size -= 1
    if size == 0:
        return 0
    d = hd[size]
    i = hi[size]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _less(hd[child], hi[child], hd[child + 1], hi[child + 1]):
            child += 1
        if _less(d, i, hd[child], hi[child]):
            hd[pos] = hd[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    hd[pos] = d
    hi[pos] = i
    return size


@jit
def sort_pairs(d, ids, count):
    """In-place insertion sort of the first ``count`` entries by (d, id)."""
    for a in range(1, count):
        kd = d[a]
        ki = ids[a]
        b = a - 1
        while b >= 0 and _less(kd, ki, d[b], ids[b]):
            d[b + 1] = d[b]
            ids[b + 1] = ids[b]
            b -= 1
        d[b + 1] = kd
        ids[b + 1] = ki


@jit
def drain_max_heap_sorted(hd, hi, size, out_d, out_i):
    """Empty a max-heap into ascending order; returns the count written."""
    count = size
    while size > 0:
        out_d[size - 1] = hd[0]
        out_i[size - 1] = hi[0]
        size = max_pop(hd, hi, size)
    return count
