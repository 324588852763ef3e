"""Compiled inner loops: sampling, union-find labeling, connectivity queries.

All kernels are per-sample independent; outputs are written by sample
position, so the result never depends on how a batch is split.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .rng import edge_uniform, stream_key

OUTSIDE = -1  # label of vertices outside the restriction set


# ---------------------------------------------------------------- sampling

@njit(cache=True, nogil=True)
def sample_bits(seed, first, count, n_edges, p):
    out = np.empty((count, n_edges), dtype=np.uint8)
    for s in range(count):
        key = stream_key(seed, first + s)
        for j in range(n_edges):
            out[s, j] = 1 if edge_uniform(key, j) < p else 0
    return out


@njit(cache=True, nogil=True)
def sample_edge_subset(seed, first, count, edge_ids, p):
    out = np.empty((count, edge_ids.shape[0]), dtype=np.uint8)
    for s in range(count):
        key = stream_key(seed, first + s)
        for t in range(edge_ids.shape[0]):
            out[s, t] = 1 if edge_uniform(key, edge_ids[t]) < p else 0
    return out


def enumerate_bits(start, count, n_edges):
    """Rows are the binary expansions of start..start+count-1 (bit j = edge j)."""
    idx = np.arange(start, start + count, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n_edges, dtype=np.int64)) & 1).astype(np.uint8)


# -------------------------------------------------------------- union-find

@njit(cache=True, inline="always")
def _find(parent, x):
    # path halving
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, nogil=True)
def _label_row(bits_row, eu, ev, zrow, parent, size, canon, out):
    nv = zrow.shape[0]
    for v in range(nv):
        parent[v] = v
        size[v] = 1
        canon[v] = -1
    for e in range(eu.shape[0]):
        if bits_row[e] == 0:
            continue
        a = eu[e]
        b = ev[e]
        if not (zrow[a] and zrow[b]):
            continue
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra == rb:
            continue
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
    # canonical id = smallest member index (vertices visited in ascending order)
    for v in range(nv):
        if not zrow[v]:
            out[v] = OUTSIDE
            continue
        r = _find(parent, v)
        if canon[r] < 0:
            canon[r] = v
        out[v] = canon[r]


@njit(cache=True, nogil=True)
def label_batch(bits, eu, ev, zmask):
    n = bits.shape[0]
    nv = zmask.shape[0]
    out = np.empty((n, nv), dtype=np.int32)
    parent = np.empty(nv, dtype=np.int32)
    size = np.empty(nv, dtype=np.int32)
    canon = np.empty(nv, dtype=np.int32)
    for s in range(n):
        _label_row(bits[s], eu, ev, zmask, parent, size, canon, out[s])
    return out


@njit(cache=True, nogil=True)
def label_batch_masks(bits, eu, ev, zmasks):
    n = bits.shape[0]
    nv = zmasks.shape[1]
    out = np.empty((n, nv), dtype=np.int32)
    parent = np.empty(nv, dtype=np.int32)
    size = np.empty(nv, dtype=np.int32)
    canon = np.empty(nv, dtype=np.int32)
    for s in range(n):
        _label_row(bits[s], eu, ev, zmasks[s], parent, size, canon, out[s])
    return out


@njit(cache=True, nogil=True)
def connected_batch(labels, xs, ys):
    """True where some x in xs and y in ys share a (non-outside) label."""
    n, nv = labels.shape
    out = np.zeros(n, dtype=np.bool_)
    mark = np.zeros(nv, dtype=np.int64)
    for s in range(n):
        tag = s + 1
        row = labels[s]
        for x in xs:
            lab = row[x]
            if lab >= 0:
                mark[lab] = tag
        for y in ys:
            lab = row[y]
            if lab >= 0 and mark[lab] == tag:
                out[s] = True
                break
    return out


@njit(cache=True, nogil=True)
def crossing_count_batch(labels, inner, outer):
    """Number of distinct clusters meeting both ``inner`` and ``outer``."""
    n, nv = labels.shape
    out = np.zeros(n, dtype=np.int32)
    mark = np.zeros(nv, dtype=np.int64)
    seen = np.zeros(nv, dtype=np.int64)
    for s in range(n):
        tag = s + 1
        row = labels[s]
        for x in inner:
            lab = row[x]
            if lab >= 0:
                mark[lab] = tag
        c = 0
        for y in outer:
            lab = row[y]
            if lab >= 0 and mark[lab] == tag and seen[lab] != tag:
                seen[lab] = tag
                c += 1
        out[s] = c
    return out


@njit(cache=True, nogil=True)
def members_batch(labels, src):
    """Mask of vertices whose cluster meets ``src``."""
    n, nv = labels.shape
    out = np.zeros((n, nv), dtype=np.bool_)
    mark = np.zeros(nv, dtype=np.int64)
    for s in range(n):
        tag = s + 1
        row = labels[s]
        for x in src:
            lab = row[x]
            if lab >= 0:
                mark[lab] = tag
        for v in range(nv):
            lab = row[v]
            if lab >= 0 and mark[lab] == tag:
                out[s, v] = True
    return out


@njit(cache=True, nogil=True)
def boundary_hits_batch(members, bits, bedge, binner, bouter, nv):
    """Mask of outer endpoints joined by an open boundary edge to ``members``."""
    n = members.shape[0]
    out = np.zeros((n, nv), dtype=np.bool_)
    for s in range(n):
        for t in range(bedge.shape[0]):
            if bits[s, bedge[t]] and members[s, binner[t]]:
                out[s, bouter[t]] = True
    return out


# ------------------------------------------------- lazy cluster exploration

@njit(cache=True, nogil=True)
def cluster_reach_batch(seed, first, count, p, src, zmask, indptr, nbr, nbr_edge,
                        dist, target):
    """Largest ``dist`` value reached by the open cluster of ``src`` inside Z.

    Edge states are drawn from the counter stream on demand, so only edges
    touching the explored cluster are ever evaluated.  Exploration is
    best-first on ``dist`` and stops once ``target`` is reached; the
    returned value is exact whenever it is below ``target``.
    """
    nv = zmask.shape[0]
    maxd = 0
    for v in range(nv):
        if dist[v] > maxd:
            maxd = dist[v]
    head = np.full(maxd + 1, -1, dtype=np.int64)
    nxt = np.empty(nv, dtype=np.int64)
    stamp = np.zeros(nv, dtype=np.int64)
    out = np.empty(count, dtype=np.int32)
    for s in range(count):
        key = stream_key(seed, first + s)
        tag = s + 1
        best = -1
        top = -1
        for x in src:
            if zmask[x] and stamp[x] != tag:
                stamp[x] = tag
                d = dist[x]
                nxt[x] = head[d]
                head[d] = x
                if d > top:
                    top = d
                if d > best:
                    best = d
        while best < target:
            while top >= 0 and head[top] == -1:
                top -= 1
            if top < 0:
                break
            x = head[top]
            head[top] = nxt[x]
            for k in range(indptr[x], indptr[x + 1]):
                y = nbr[k]
                if stamp[y] == tag or not zmask[y]:
                    continue
                if edge_uniform(key, nbr_edge[k]) < p:
                    stamp[y] = tag
                    d = dist[y]
                    nxt[y] = head[d]
                    head[d] = y
                    if d > top:
                        top = d
                    if d > best:
                        best = d
        out[s] = best
        for b in range(maxd + 1):
            head[b] = -1
    return out


@njit(cache=True, nogil=True)
def cluster_reach_bits(bits, src, zmask, indptr, nbr, nbr_edge, dist):
    """Same quantity as :func:`cluster_reach_batch` on explicit configurations."""
    n = bits.shape[0]
    nv = zmask.shape[0]
    stamp = np.zeros(nv, dtype=np.int64)
    stack = np.empty(nv, dtype=np.int64)
    out = np.empty(n, dtype=np.int32)
    for s in range(n):
        tag = s + 1
        top = 0
        best = -1
        for x in src:
            if zmask[x] and stamp[x] != tag:
                stamp[x] = tag
                stack[top] = x
                top += 1
                if dist[x] > best:
                    best = dist[x]
        while top > 0:
            top -= 1
            x = stack[top]
            for k in range(indptr[x], indptr[x + 1]):
                y = nbr[k]
                if stamp[y] == tag or not zmask[y] or bits[s, nbr_edge[k]] == 0:
                    continue
                stamp[y] = tag
                stack[top] = y
                top += 1
                if dist[y] > best:
                    best = dist[y]
        out[s] = best
    return out


# -------------------------------------------------------- winding circuits

@njit(cache=True, nogil=True)
def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


@njit(cache=True, nogil=True)
def _wfind(parent, off, x):
    r = x
    total = 0
    while parent[r] != r:
        total += off[r]
        r = parent[r]
    cur = x
    acc = total
    while parent[cur] != cur:
        nx = parent[cur]
        o = off[cur]
        parent[cur] = r
        off[cur] = acc
        acc -= o
        cur = nx
    return r, total


@njit(cache=True, nogil=True)
def winding_exists_batch(bits, eu, ev, amask, ewt):
    """Whether the open subgraph on ``amask`` has a closed walk of winding 1.

    ``ewt[e]`` is the sheet change when edge e is traversed from eu to ev.
    Weighted union-find tracks, per component, the gcd of cycle windings;
    a winding-one closed walk exists iff some component reaches gcd 1.
    """
    n = bits.shape[0]
    nv = amask.shape[0]
    parent = np.empty(nv, dtype=np.int64)
    off = np.zeros(nv, dtype=np.int64)
    size = np.empty(nv, dtype=np.int64)
    g = np.zeros(nv, dtype=np.int64)
    out = np.zeros(n, dtype=np.bool_)
    for s in range(n):
        for v in range(nv):
            parent[v] = v
            off[v] = 0
            size[v] = 1
            g[v] = 0
        for e in range(eu.shape[0]):
            if bits[s, e] == 0:
                continue
            a = eu[e]
            b = ev[e]
            if not (amask[a] and amask[b]):
                continue
            ra, oa = _wfind(parent, off, a)
            rb, ob = _wfind(parent, off, b)
            w = ewt[e]
            if ra == rb:
                wind = oa + w - ob
                if wind != 0:
                    g[ra] = _gcd(g[ra], abs(wind))
                    if g[ra] == 1:
                        out[s] = True
                        break
                continue
            if size[ra] >= size[rb]:
                parent[rb] = ra
                off[rb] = oa + w - ob
                size[ra] += size[rb]
                g[ra] = _gcd(g[ra], g[rb])
            else:
                parent[ra] = rb
                off[ra] = -(oa + w - ob)
                size[rb] += size[ra]
                g[rb] = _gcd(g[ra], g[rb])
    return out


@njit(cache=True, nogil=True)
def shortest_winding_cycle(nv, indptr, nbr, nbr_edge, nbr_wt, alive, cut_edges,
                           cut_tail, cut_head, max_sheet, limit):
    """Shortest closed walk of winding +1 over alive edges.

    Every such walk crosses some cut edge upward, so for each alive cut edge
    (tail -> head, +1) a breadth-first search in the covering graph finds the
    shortest return path head -> tail with zero net winding.  Returns
    ``(length, edges)`` with edges in walk order starting at the cut edge,
    ``(-1, empty)`` when none exists and ``(-2, empty)`` if the sheet window
    ``[-max_sheet, max_sheet]`` was too narrow.  Walks longer than
    ``limit`` are not searched for.
    """
    width = 2 * max_sheet + 1
    nstate = nv * width
    dist = np.full(nstate, -1, dtype=np.int64)
    pstate = np.empty(nstate, dtype=np.int64)
    pedge = np.empty(nstate, dtype=np.int64)
    queue = np.empty(nstate, dtype=np.int64)
    touched = np.empty(nstate, dtype=np.int64)
    best_len = -1
    best_edges = np.empty(0, dtype=np.int64)
    overflow = False
    for c in range(cut_edges.shape[0]):
        ce = cut_edges[c]
        if not alive[ce]:
            continue
        start = cut_head[c] * width + max_sheet
        goal = cut_tail[c] * width + max_sheet
        nt = 0
        dist[start] = 0
        touched[nt] = start
        nt += 1
        qh = 0
        qt = 0
        queue[qt] = start
        qt += 1
        found = False
        while qh < qt:
            st = queue[qh]
            qh += 1
            dcur = dist[st]
            if best_len > 0 and dcur + 2 > best_len:
                break
            if dcur + 1 > limit:
                break
            x = st // width
            sh = st % width - max_sheet
            for k in range(indptr[x], indptr[x + 1]):
                e = nbr_edge[k]
                if not alive[e]:
                    continue
                s2 = sh + nbr_wt[k]
                if s2 < -max_sheet or s2 > max_sheet:
                    overflow = True
                    continue
                ns = nbr[k] * width + s2 + max_sheet
                if dist[ns] >= 0:
                    continue
                dist[ns] = dcur + 1
                pstate[ns] = st
                pedge[ns] = e
                touched[nt] = ns
                nt += 1
                queue[qt] = ns
                qt += 1
                if ns == goal:
                    found = True
                    break
            if found:
                break
        if found:
            length = dist[goal] + 1
            if best_len < 0 or length < best_len:
                best_len = length
                best_edges = np.empty(length, dtype=np.int64)
                best_edges[0] = ce
                st = goal
                pos = length - 1
                while st != start:
                    best_edges[pos] = pedge[st]
                    pos -= 1
                    st = pstate[st]
        for t in range(nt):
            dist[touched[t]] = -1
    if overflow:
        return -2, np.empty(0, dtype=np.int64)
    return best_len, best_edges


@njit(cache=True, nogil=True)
def winding_gcd_row(bits_row, eu, ev, amask, ewt):
    """Per-vertex gcd of cycle windings of its open component (0: none)."""
    nv = amask.shape[0]
    parent = np.arange(nv)
    off = np.zeros(nv, dtype=np.int64)
    size = np.ones(nv, dtype=np.int64)
    g = np.zeros(nv, dtype=np.int64)
    for e in range(eu.shape[0]):
        if bits_row[e] == 0:
            continue
        a = eu[e]
        b = ev[e]
        if not (amask[a] and amask[b]):
            continue
        ra, oa = _wfind(parent, off, a)
        rb, ob = _wfind(parent, off, b)
        w = ewt[e]
        if ra == rb:
            g[ra] = _gcd(g[ra], abs(oa + w - ob))
            continue
        if size[ra] < size[rb]:
            ra, rb = rb, ra
            oa, ob = ob, oa
            w = -w
        parent[rb] = ra
        off[rb] = oa + w - ob
        size[ra] += size[rb]
        g[ra] = _gcd(g[ra], g[rb])
    out = np.zeros(nv, dtype=np.int64)
    for v in range(nv):
        if amask[v]:
            r, _ = _wfind(parent, off, v)
            out[v] = g[r]
    return out


@njit(cache=True, nogil=True)
def connected_mask_batch(labels, xmask, ys):
    """Like :func:`connected_batch` with a per-sample source mask."""
    n, nv = labels.shape
    out = np.zeros(n, dtype=np.bool_)
    mark = np.zeros(nv, dtype=np.int64)
    for s in range(n):
        tag = s + 1
        row = labels[s]
        for x in range(nv):
            if xmask[s, x]:
                lab = row[x]
                if lab >= 0:
                    mark[lab] = tag
        for y in ys:
            lab = row[y]
            if lab >= 0 and mark[lab] == tag:
                out[s] = True
                break
    return out


@njit(cache=True, nogil=True)
def bfs_open(indptr, nbr, nbr_edge, bits_row, zmask, sources):
    """BFS over open edges inside ``zmask`` from ``sources``.

    Returns ``(dist, parent_edge)``; unreached vertices get -1.  Neighbors
    are scanned in CSR order, so ties resolve to the smallest index.
    """
    nv = indptr.size - 1
    dist = np.full(nv, -1, dtype=np.int64)
    par = np.full(nv, -1, dtype=np.int64)
    queue = np.empty(nv, dtype=np.int64)
    head = 0
    tail = 0
    for s in sources:
        if zmask[s] and dist[s] < 0:
            dist[s] = 0
            queue[tail] = s
            tail += 1
    while head < tail:
        x = queue[head]
        head += 1
        for k in range(indptr[x], indptr[x + 1]):
            y = nbr[k]
            if dist[y] >= 0 or not zmask[y] or bits_row[nbr_edge[k]] == 0:
                continue
            dist[y] = dist[x] + 1
            par[y] = nbr_edge[k]
            queue[tail] = y
            tail += 1
    return dist, par
