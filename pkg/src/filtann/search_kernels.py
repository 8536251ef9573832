"""Compiled inner loops of filtered beam search.

Storage is reached through two accessor functions passed in by the caller:

* ``dist_fn(ctx, v, q, qnorm) -> float`` distance from stored row ``v`` to ``q``
* ``nbr_fn(ctx, v, out) -> int`` copies ``v``'s adjacency into ``out``

so the same loop runs over in-memory arrays and over the paged on-disk store.

Search state is a tuple of preallocated arrays (see :func:`new_state`).
Visited marks are tags: ``seen[x] == tag`` means measured or queued in the
current layer search, ``expanded[x] == tag`` means ``x`` was used as a bridge.
"""
from __future__ import annotations

import numpy as np

from ._jit import jit
from .core import row_query_distance
from .graph import read_list
from .heaps import drain_max_heap_sorted, max_pop, max_push, min_pop, min_push, sort_pairs

# heuristic codes
ONEHOP_A = 0
ONEHOP_S = 1
BLIND = 2
DIRECTED = 3
ADAPTIVE_G = 4
ADAPTIVE_L = 5

# counter slots
T_DC = 0
S_DC = 1
POPPED = 2
ENTRY_DC = 3
U_DC = 4
HIST = 5  # HIST + heuristic code, four buckets
CSIZE = 9
RSIZE = 10
N_COUNTERS = 11


def new_state(n: int, cap: int, efs: int, dim: int):
    """Allocate a search workspace for a universe of ``n`` nodes."""
    return (
        np.empty(n + 1, dtype=np.float64),   # C distances
        np.empty(n + 1, dtype=np.int64),     # C ids
        np.empty(efs + 1, dtype=np.float64),  # R distances
        np.empty(efs + 1, dtype=np.int64),   # R ids
        np.zeros(n, dtype=np.int32),          # seen tags
        np.zeros(n, dtype=np.int32),          # expanded tags
        np.empty(n, dtype=np.float64),        # distances of measured unselected nodes
        np.empty(cap, dtype=np.int32),        # 1st-degree buffer
        np.empty(cap, dtype=np.int32),        # 2nd-degree buffer
        np.empty(cap, dtype=np.float64),      # bridge distances
        np.empty(cap, dtype=np.int64),        # bridge ids
        np.zeros(N_COUNTERS, dtype=np.int64),
    )


@jit(inline=True)
def choose_fixed_code(sigma, m, lf, ub):
    if sigma >= ub:
        return ONEHOP_S
    if sigma * (m + 1) * m >= m * lf:
        return DIRECTED
    return BLIND


@jit(inline=True)
def local_selectivity_code(mask, nbuf, deg):
    if deg == 0:
        return 0.0
    hits = 0
    for j in range(deg):
        if mask[nbuf[j]]:
            hits += 1
    return hits / deg


# -- in-memory accessors ------------------------------------------------------
# ctx = (data, norms, kind, slots, pub, remap)

@jit(inline=True)
def mem_dist(ctx, v, q, qnorm):
    return row_query_distance(ctx[0], ctx[1], ctx[2], v, q, qnorm)


@jit(inline=True)
def mem_nbrs(ctx, v, out):
    return read_list(ctx[3], ctx[4], v, out)


@jit(inline=True)
def mem_nbrs_remapped(ctx, v, out):
    return read_list(ctx[3], ctx[4], ctx[5][v], out)


# -- exploration ----------------------------------------------------------------
# Inner helpers take the workspace arrays one by one.  Pulling an array out of
# the state tuple costs a reference-count round trip, which is noticeable at
# one per measured node, so each entry point unpacks ``st`` once.

@jit(inline=True)
def _offer(cd, ci, rd, ri, cnt, d, x, sel, efs):
    """Push into C (and R if selected) when the node can still improve R."""
    rsize = cnt[RSIZE]
    if rsize < efs or d < rd[0]:
        cnt[CSIZE] = min_push(cd, ci, cnt[CSIZE], d, x)
        if sel:
            rsize = max_push(rd, ri, rsize, d, x)
            if rsize > efs:
                rsize = max_pop(rd, ri, rsize)
            cnt[RSIZE] = rsize


@jit(inline=True)
def _measure(dist_fn, ctx, q, qnorm, cd, ci, rd, ri, seen, cnt, x, sel, tag, efs):
    seen[x] = tag
    d = dist_fn(ctx, x, q, qnorm)
    cnt[T_DC] += 1
    if sel:
        cnt[S_DC] += 1
    else:
        cnt[U_DC] += 1
    _offer(cd, ci, rd, ri, cnt, d, x, sel, efs)


@jit
def _onehop(dist_fn, ctx, q, qnorm, mask, filtered, deg, selected_only, efs, tag,
            cd, ci, rd, ri, seen, nb1, cnt):
    for j in range(deg):
        x = nb1[j]
        if seen[x] == tag:
            continue
        sel = (not filtered) or mask[x]
        if selected_only and not sel:
            continue
        _measure(dist_fn, ctx, q, qnorm, cd, ci, rd, ri, seen, cnt, x, sel, tag, efs)


@jit
def _expand_bridges(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, nbridges, explored, budget, efs, tag,
                    cd, ci, rd, ri, seen, expanded, nb2, bi, cnt):
    for b_i in range(nbridges):
        if explored >= budget:
            break
        b = bi[b_i]
        if expanded[b] == tag:
            continue
        expanded[b] = tag
        deg2 = nbr_fn(ctx, b, nb2)
        for t in range(deg2):
            y = nb2[t]
            if seen[y] == tag:
                continue
            if filtered and not mask[y]:
                continue
            _measure(dist_fn, ctx, q, qnorm, cd, ci, rd, ri, seen, cnt, y, True, tag, efs)
            explored += 1
            if explored >= budget:
                break
    return explored


@jit
def _blind(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, deg, budget, efs, tag,
           cd, ci, rd, ri, seen, expanded, nb1, nb2, bi, cnt):
    explored = 0
    nbridges = 0
    for j in range(deg):
        x = nb1[j]
        if (not filtered) or mask[x]:
            if seen[x] != tag:
                _measure(dist_fn, ctx, q, qnorm, cd, ci, rd, ri, seen, cnt, x, True, tag, efs)
                explored += 1
        elif expanded[x] != tag:
            bi[nbridges] = x
            nbridges += 1
    return _expand_bridges(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, nbridges, explored, budget, efs, tag,
                           cd, ci, rd, ri, seen, expanded, nb2, bi, cnt)


@jit
def _directed(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, deg, budget, efs, tag,
              cd, ci, rd, ri, seen, expanded, dcache, nb1, nb2, bd, bi, cnt):
    explored = 0
    nbridges = 0
    for j in range(deg):
        x = nb1[j]
        if (not filtered) or mask[x]:
            if seen[x] != tag:
                _measure(dist_fn, ctx, q, qnorm, cd, ci, rd, ri, seen, cnt, x, True, tag, efs)
                explored += 1
        elif expanded[x] != tag:
            if seen[x] != tag:
                seen[x] = tag
                dcache[x] = dist_fn(ctx, x, q, qnorm)
                cnt[T_DC] += 1
                cnt[U_DC] += 1
            bd[nbridges] = dcache[x]
            bi[nbridges] = x
            nbridges += 1
    sort_pairs(bd, bi, nbridges)
    return _expand_bridges(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, nbridges, explored, budget, efs, tag,
                           cd, ci, rd, ri, seen, expanded, nb2, bi, cnt)


@jit
def explore_onehop_k(dist_fn, ctx, q, qnorm, mask, filtered, deg, selected_only, efs, tag, st):
    _onehop(dist_fn, ctx, q, qnorm, mask, filtered, deg, selected_only, efs, tag,
            st[0], st[1], st[2], st[3], st[4], st[7], st[11])


@jit
def explore_blind_k(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, deg, budget, efs, tag, st):
    return _blind(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, deg, budget, efs, tag,
                  st[0], st[1], st[2], st[3], st[4], st[5], st[7], st[8], st[10], st[11])


@jit
def explore_directed_k(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, deg, budget, efs, tag, st):
    return _directed(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, deg, budget, efs, tag,
                     st[0], st[1], st[2], st[3], st[4], st[5], st[6], st[7], st[8], st[9], st[10], st[11])


@jit
def seed_k(st, entries, entry_d, n_entries, mask, filtered, efs, tag):
    cd, ci, rd, ri, seen = st[0], st[1], st[2], st[3], st[4]
    cnt = st[11]
    cnt[CSIZE] = 0
    cnt[RSIZE] = 0
    for j in range(n_entries):
        e = entries[j]
        if seen[e] == tag:
            continue
        seen[e] = tag
        cnt[CSIZE] = min_push(cd, ci, cnt[CSIZE], entry_d[j], e)
        if (not filtered) or mask[e]:
            rsize = max_push(rd, ri, cnt[RSIZE], entry_d[j], e)
            if rsize > efs:
                rsize = max_pop(rd, ri, rsize)
            cnt[RSIZE] = rsize


@jit
def search_loop_k(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, heur, fixed_g, m_choice,
                  budget, lf, ub, efs, tag, st):
    """Main loop over a seeded state; returns |R|."""
    cd, ci, rd, ri, seen, expanded, dcache = st[0], st[1], st[2], st[3], st[4], st[5], st[6]
    nb1, nb2, bd, bi, cnt = st[7], st[8], st[9], st[10], st[11]
    while cnt[CSIZE] > 0:
        dc = cd[0]
        c = ci[0]
        cnt[CSIZE] = min_pop(cd, ci, cnt[CSIZE])
        if cnt[RSIZE] >= efs and dc > rd[0]:
            break
        cnt[POPPED] += 1
        deg = nbr_fn(ctx, c, nb1)
        if heur == ADAPTIVE_G:
            h = fixed_g
        elif heur == ADAPTIVE_L:
            h = choose_fixed_code(local_selectivity_code(mask, nb1, deg), m_choice, lf, ub)
        else:
            h = heur
        cnt[HIST + h] += 1
        if h == ONEHOP_A or h == ONEHOP_S:
            _onehop(dist_fn, ctx, q, qnorm, mask, filtered, deg, h == ONEHOP_S, efs, tag,
                    cd, ci, rd, ri, seen, nb1, cnt)
        elif h == BLIND:
            _blind(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, deg, budget, efs, tag,
                   cd, ci, rd, ri, seen, expanded, nb1, nb2, bi, cnt)
        else:
            _directed(nbr_fn, dist_fn, ctx, q, qnorm, mask, filtered, deg, budget, efs, tag,
                      cd, ci, rd, ri, seen, expanded, dcache, nb1, nb2, bd, bi, cnt)
    return cnt[RSIZE]


@jit
def knn_k(nbr_upper, dist_upper, ctx_upper, nbr_lower, dist_lower, ctx_lower, q, qnorm, entry, mask,
          heur, fixed_g, m_choice, budget, lf, ub, efs, tag, st, out_d, out_i):
    """Unfiltered efs=1 descent of the upper layer, then filtered lower search.

    Distances computed during the descent go to ENTRY_DC only.
    """
    cnt = st[11]
    entries = np.empty(1, dtype=np.int64)
    entry_d = np.empty(1, dtype=np.float64)
    entries[0] = entry
    entry_d[0] = dist_upper(ctx_upper, entry, q, qnorm)
    seed_k(st, entries, entry_d, 1, mask, False, 1, tag)
    search_loop_k(nbr_upper, dist_upper, ctx_upper, q, qnorm, mask, False, ONEHOP_A, ONEHOP_A, m_choice,
                  budget, lf, ub, 1, tag, st)
    cnt[ENTRY_DC] += cnt[T_DC] + 1
    for j in range(N_COUNTERS):
        if j != ENTRY_DC:
            cnt[j] = 0
    entries[0] = st[3][0]
    entry_d[0] = st[2][0]
    seed_k(st, entries, entry_d, 1, mask, True, efs, tag + 1)
    rsize = search_loop_k(nbr_lower, dist_lower, ctx_lower, q, qnorm, mask, True, heur, fixed_g, m_choice,
                          budget, lf, ub, efs, tag + 1, st)
    return drain_max_heap_sorted(st[2], st[3], rsize, out_d, out_i)
