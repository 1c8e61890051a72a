"""Compiled graph-search kernels.

All searches run on a CSR adjacency and share per-thread workspaces
(``dist_ws`` all ``inf`` and ``done_ws`` all ``False`` between calls); every
kernel restores the entries it touched before returning.
"""
import heapq

import numpy as np
from numba import njit


@njit(cache=True)
def bounded_search(indptr, indices, weights, allowed, sources, offsets, limit, target, dist_ws,
                   label_ws, done_ws):
    """Multi-source Dijkstra restricted to ``allowed`` vertices.

    Source ``i`` starts at distance ``offsets[i]``. Vertices are settled in
    order of distance and only while that distance is ``<= limit``. When
    ``target >= 0`` the search stops as soon as the target is settled.

    Returns settled ids, their distances and the index of the source that
    reached them.
    """
    n_src = sources.shape[0]
    heap = [(0.0, np.int64(0))]
    heap.pop()
    touched = []
    for i in range(n_src):
        s = sources[i]
        d0 = offsets[i]
        if not allowed[s] or d0 > limit:
            continue
        if d0 < dist_ws[s]:
            if dist_ws[s] == np.inf:
                touched.append(s)
            dist_ws[s] = d0
            label_ws[s] = i
            heapq.heappush(heap, (d0, np.int64(s)))

    out_ids = np.empty(16, dtype=np.int64)
    out_dist = np.empty(16, dtype=np.float64)
    out_lab = np.empty(16, dtype=np.int64)
    count = 0
    while len(heap) > 0:
        d, v = heapq.heappop(heap)
        if done_ws[v] or d > dist_ws[v]:
            continue
        done_ws[v] = True
        if count == out_ids.shape[0]:
            out_ids = np.concatenate((out_ids, np.empty(count, dtype=np.int64)))
            out_dist = np.concatenate((out_dist, np.empty(count, dtype=np.float64)))
            out_lab = np.concatenate((out_lab, np.empty(count, dtype=np.int64)))
        out_ids[count] = v
        out_dist[count] = d
        out_lab[count] = label_ws[v]
        count += 1
        if v == target:
            break
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if not allowed[u]:
                continue
            nd = d + weights[p]
            if nd > limit:
                continue
            if nd < dist_ws[u]:
                if dist_ws[u] == np.inf:
                    touched.append(u)
                dist_ws[u] = nd
                label_ws[u] = label_ws[v]
                heapq.heappush(heap, (nd, u))
    for t in touched:
        dist_ws[t] = np.inf
        done_ws[t] = False
    return out_ids[:count], out_dist[:count], out_lab[:count]


@njit(cache=True)
def ball_means(indptr, indices, weights, allowed, values, mu, radius, dist_ws, label_ws, done_ws):
    """Measure-weighted mean of ``values`` over the open ball of ``radius``
    around every allowed vertex."""
    n = indptr.shape[0] - 1
    out = np.zeros(n, dtype=np.float64)
    src = np.zeros(1, dtype=np.int64)
    off = np.zeros(1, dtype=np.float64)
    for v in range(n):
        if not allowed[v]:
            continue
        src[0] = v
        ids, ds, _ = bounded_search(indptr, indices, weights, allowed, src, off, radius, -1, dist_ws,
                                   label_ws, done_ws)
        num = 0.0
        den = 0.0
        for i in range(ids.shape[0]):
            if ds[i] < radius:
                num += values[ids[i]] * mu[ids[i]]
                den += mu[ids[i]]
        out[v] = num / den
    return out


@njit(cache=True)
def bottleneck_value(indptr, indices, allowed, capacity, source, target, done_ws):
    """Largest ``t`` such that some allowed path from ``source`` to ``target``
    keeps ``capacity >= t`` at every vertex (``-inf`` if none exists)."""
    best = np.full(indptr.shape[0] - 1, -np.inf)
    heap = [(0.0, np.int64(0))]
    heap.pop()
    best[source] = capacity[source]
    heapq.heappush(heap, (-best[source], np.int64(source)))
    touched = []
    result = -np.inf
    while len(heap) > 0:
        negb, v = heapq.heappop(heap)
        b = -negb
        if done_ws[v] or b < best[v]:
            continue
        done_ws[v] = True
        touched.append(v)
        if v == target:
            result = b
            break
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if not allowed[u] or done_ws[u]:
                continue
            nb = min(b, capacity[u])
            if nb > best[u]:
                best[u] = nb
                heapq.heappush(heap, (-nb, u))
    for t in touched:
        done_ws[t] = False
    return result


@njit(cache=True)
def flood_fill(indptr, indices, allowed, sources, out):
    """Mark in ``out`` every allowed vertex reachable from ``sources``."""
    stack = np.empty(indptr.shape[0] - 1, dtype=np.int64)
    top = 0
    for s in sources:
        if allowed[s] and not out[s]:
            out[s] = True
            stack[top] = s
            top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if allowed[u] and not out[u]:
                out[u] = True
                stack[top] = u
                top += 1
