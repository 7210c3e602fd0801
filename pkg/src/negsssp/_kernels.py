"""Compiled inner loops over CSR arrays.

The work array passed to every kernel accumulates
[heap pops, edge scans, hop relaxations].
"""

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True, inline="always")
def _before(k1, v1, k2, v2):
    return k1 < k2 or (k1 == k2 and v1 < v2)


@njit(cache=True)
def _push(hk, hv, size, key, v):
    i = size
    hk[i] = key
    hv[i] = v
    while i > 0:
        p = (i - 1) >> 1
        if _before(hk[i], hv[i], hk[p], hv[p]):
            hk[i], hk[p] = hk[p], hk[i]
            hv[i], hv[p] = hv[p], hv[i]
            i = p
        else:
            break
    return size + 1


@njit(cache=True)
def _pop(hk, hv, size):
    key = hk[0]
    v = hv[0]
    size -= 1
    if size > 0:
        hk[0] = hk[size]
        hv[0] = hv[size]
        i = 0
        while True:
            left = 2 * i + 1
            if left >= size:
                break
            c = left
            right = left + 1
            if right < size and _before(hk[right], hv[right], hk[left], hv[left]):
                c = right
            if _before(hk[c], hv[c], hk[i], hv[i]):
                hk[i], hk[c] = hk[c], hk[i]
                hv[i], hv[c] = hv[c], hv[i]
                i = c
            else:
                break
    return key, v, size


@njit(cache=True)
def dijkstra_sweep(indptr, nbr, wt, eid, dist, parent, seeds, mark, stamp,
                   changed, nchanged, cutoff, work):
    """Settle everything reachable from `seeds`, whose keys are already in dist.

    Lowered vertices get their parent edge recorded and are appended once to
    `changed` (deduplicated through mark == stamp).  Returns the new length
    of `changed`.
    """
    cap = seeds.shape[0] + nbr.shape[0] + 1
    hk = np.empty(cap, dtype=np.float64)
    hv = np.empty(cap, dtype=np.int64)
    size = 0
    for i in range(seeds.shape[0]):
        s = seeds[i]
        size = _push(hk, hv, size, dist[s], s)
    while size > 0:
        key, v, size = _pop(hk, hv, size)
        if key > dist[v]:
            continue
        work[0] += 1
        for p in range(indptr[v], indptr[v + 1]):
            work[1] += 1
            u = nbr[p]
            nd = key + wt[p]
            if nd < dist[u] and nd < cutoff:
                dist[u] = nd
                parent[u] = eid[p]
                if mark[u] != stamp:
                    mark[u] = stamp
                    changed[nchanged] = u
                    nchanged += 1
                size = _push(hk, hv, size, nd, u)
    return nchanged


@njit(cache=True)
def hop_step(hop_indptr, hop_head, hop_len, hop_eid, active, nactive, dist,
             parent, best, best_eid, touched, mark, stamp, changed, cutoff, work):
    """One synchronous relaxation of hop edges out of the active tails.

    Candidates are computed from the values at the start of the step and
    applied afterwards, so a single step never chains two hops.
    """
    nt = 0
    for a in range(nactive):
        u = active[a]
        du = dist[u]
        if du == INF:
            continue
        for p in range(hop_indptr[u], hop_indptr[u + 1]):
            work[2] += 1
            v = hop_head[p]
            nd = du + hop_len[p]
            if nd < best[v]:
                if best[v] == INF:
                    touched[nt] = v
                    nt += 1
                best[v] = nd
                best_eid[v] = hop_eid[p]
    nchanged = 0
    for t in range(nt):
        v = touched[t]
        if best[v] < dist[v] and best[v] < cutoff:
            dist[v] = best[v]
            parent[v] = best_eid[v]
            if mark[v] != stamp:
                mark[v] = stamp
                changed[nchanged] = v
                nchanged += 1
        best[v] = INF
    return nchanged


@njit(cache=True)
def bellman_ford_passes(n, tail, head, length, dist, parent, work):
    """Edge-list Bellman-Ford with early exit.

    Returns -1 when distances converged, otherwise a vertex lowered in
    pass n (evidence of a negative cycle).
    """
    m = tail.shape[0]
    for it in range(n):
        improved = -1
        for e in range(m):
            work[2] += 1
            du = dist[tail[e]]
            if du == INF:
                continue
            nd = du + length[e]
            v = head[e]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = e
                improved = v
        if improved < 0:
            return -1
        if it == n - 1:
            return improved
    return -1
