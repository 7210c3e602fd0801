"""Deterministic primitives: Dijkstra, the hop-distance dynamic program,
potentials, Johnson neutralization, cycle extraction and brute-force oracles."""

import bisect
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import _kernels as K
from . import counters
from .errors import NegativeEdgeEncountered, TooLarge
from .graph_core import Graph

INF = np.inf
PROPER_HOP_LIMIT = 14


# ---------------------------------------------------------------- results

@dataclass
class NegativeCycle:
    """Closed walk (vertices[0] == vertices[-1]) with negative total length."""

    vertices: List[int]
    length: float
    edges: Optional[List[int]] = None

    def __post_init__(self):
        assert self.vertices[0] == self.vertices[-1], "cycle must be closed"
        assert self.length < 0, "cycle must have negative length"


def is_cycle(x):
    return isinstance(x, NegativeCycle)


def cycle_length(g: Graph, vertices):
    """Length of the closed vertex walk using the shortest parallel edge; None if not a walk."""
    best = {}
    for t, h, w in zip(g.tail.tolist(), g.head.tolist(), g.length.tolist()):
        if (t, h) not in best or w < best[(t, h)]:
            best[(t, h)] = w
    total = 0.0
    for a, b in zip(vertices[:-1], vertices[1:]):
        if (a, b) not in best:
            return None
        total += best[(a, b)]
    return total


def cycle_from_edges(g: Graph, edge_ids) -> NegativeCycle:
    edge_ids = [int(e) for e in edge_ids]
    verts = [int(g.tail[edge_ids[0]])] + [int(g.head[e]) for e in edge_ids]
    total = float(sum(g.length[e] for e in edge_ids))
    return NegativeCycle(verts, total, edge_ids)


def negative_cycle_in_walk(g: Graph, walk_edges) -> Optional[NegativeCycle]:
    """Split a walk into simple cycles and return the most negative one."""
    stack_v: List[int] = []
    stack_e: List[int] = []
    pos: Dict[int, int] = {}
    best = None
    if not walk_edges:
        return None
    start = int(g.tail[walk_edges[0]])
    stack_v.append(start)
    pos[start] = 0
    for e in walk_edges:
        v = int(g.head[e])
        stack_e.append(int(e))
        if v in pos:
            p = pos[v]
            cyc = stack_e[p:]
            w = float(sum(g.length[c] for c in cyc))
            if w < 0 and (best is None or w < best[0]):
                best = (w, list(cyc))
            for u in stack_v[p + 1:]:
                del pos[u]
            del stack_v[p + 1:]
            del stack_e[p:]
        else:
            pos[v] = len(stack_v)
            stack_v.append(v)
    if best is None:
        return None
    return cycle_from_edges(g, best[1])


@dataclass
class DistanceResult:
    dist: Optional[np.ndarray]
    parent: Optional[np.ndarray]
    cycle: Optional[NegativeCycle] = None
    graph: Optional[Graph] = field(default=None, repr=False)

    def path_to(self, v):
        """Edge ids of the parent walk ending at v (empty for a source)."""
        edges = []
        seen = set()
        while self.parent[v] >= 0:
            if v in seen:
                raise RuntimeError("parent pointers contain a cycle")
            seen.add(v)
            e = int(self.parent[v])
            edges.append(e)
            v = int(self.graph.tail[e])
        return edges[::-1]


@dataclass
class HopDistanceTable:
    h: Optional[int]
    dist: np.ndarray
    sources: Dict[int, float]
    rounds: int
    layers: Optional[List[np.ndarray]] = None
    graph: Optional[Graph] = field(default=None, repr=False)
    _trace: Optional[list] = field(default=None, repr=False)
    _history: Optional[dict] = field(default=None, repr=False)

    def layer(self, i):
        """d^i(S, .) for 0 <= i <= h (needs keep_layers)."""
        return self.layers[min(i, len(self.layers) - 1)]

    def walk_to(self, v, r=None):
        """Edge ids of the walk realizing the round-r value at v."""
        if self._trace is None:
            raise ValueError("tracing was disabled")
        if self._history is None:
            hist = {}
            for rnd, (verts, pars) in enumerate(self._trace):
                for u, e in zip(verts.tolist(), pars.tolist()):
                    hist.setdefault(u, ([], []))
                    hist[u][0].append(rnd)
                    hist[u][1].append(e)
            self._history = hist
        g = self.graph
        hopm = g.hop_mask
        r = self.rounds if r is None else r
        edges = []
        while True:
            rounds, pars = self._history[v]
            i = bisect.bisect_right(rounds, r) - 1
            if i < 0:
                raise RuntimeError(f"vertex {v} has no value by round {r}")
            e = pars[i]
            if e < 0:
                break
            edges.append(e)
            if hopm[e]:
                r = rounds[i] - 1
            else:
                r = rounds[i]
            v = int(g.tail[e])
        return edges[::-1]


# ---------------------------------------------------------------- helpers

def _source_init(sources):
    if isinstance(sources, dict):
        return {int(v): float(x) for v, x in sources.items()}
    return {int(v): 0.0 for v in sources}


def _plus_arrays(g: Graph, tau):
    indptr, nbr, wt, eid = g.csr("plus")
    if wt.size and wt.min() < 0:
        p = int(np.argmin(wt))
        if wt[p] < -tau:
            raise NegativeEdgeEncountered(int(eid[p]), float(wt[p]))
        wt = np.maximum(wt, 0.0)
    return indptr, nbr, wt, eid


def _all_arrays(g: Graph, tau):
    indptr, nbr, wt, eid = g.csr("all")
    if wt.size and wt.min() < 0:
        p = int(np.argmin(wt))
        if wt[p] < -tau:
            raise NegativeEdgeEncountered(int(eid[p]), float(wt[p]))
        wt = np.maximum(wt, 0.0)
    return indptr, nbr, wt, eid


# ---------------------------------------------------------------- Dijkstra

def dijkstra(g: Graph, sources, tau=0.0) -> DistanceResult:
    """Multi-source Dijkstra; sources may map vertices to initial offsets."""
    indptr, nbr, wt, eid = _all_arrays(g, tau)
    init = _source_init(sources)
    dist = np.full(g.n, INF)
    parent = np.full(g.n, -1, dtype=np.int64)
    for v, x in init.items():
        dist[v] = min(dist[v], x)
    seeds = np.array(sorted(init), dtype=np.int64)
    mark = np.zeros(g.n, dtype=np.int64)
    changed = np.empty(g.n, dtype=np.int64)
    work = np.zeros(3, dtype=np.int64)
    K.dijkstra_sweep(indptr, nbr, wt, eid, dist, parent, seeds, mark, 1,
                     changed, 0, INF, work)
    counters.add_kernel(work)
    return DistanceResult(dist, parent, None, g)


# ---------------------------------------------------------------- hop DP

def hop_sssp(g: Graph, sources, h=None, *, keep_layers=False, cutoff=INF,
             tau=0.0, trace=True, detect_cycles=True):
    """Hop-bounded distances d^h(S, .) or a negative cycle.

    Round 0 is Dijkstra over the non-hop edges; every later round relaxes
    the hop edges out of vertices that changed in the previous round and
    reruns Dijkstra from the improved heads.  h=None (or h >= number of hop
    edges) runs to a fixed point and reports a negative cycle if the round
    after the hop count still improves something.  Values not below
    `cutoff` are discarded, except at the sources themselves.  With detect_cycles=False a finite h is always
    treated as a plain budget.
    """
    n = g.n
    init = _source_init(sources)
    indptr, nbr, wt, eid = _plus_arrays(g, tau)
    hptr, hhead, hlen, heid = g.csr("hop")
    k = int(heid.size)
    exact = h is None or (h >= k and detect_cycles)
    limit = k + 1 if exact else int(h)

    dist = np.full(n, INF)
    parent = np.full(n, -1, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    changed = np.empty(n, dtype=np.int64)
    best = np.full(n, INF)
    best_eid = np.full(n, -1, dtype=np.int64)
    touched = np.empty(n, dtype=np.int64)
    work = np.zeros(3, dtype=np.int64)

    seeds = []
    for v in sorted(init):
        x = init[v]
        if x < dist[v]:
            dist[v] = x
            seeds.append(v)
    seeds = np.array(seeds, dtype=np.int64)
    stamp = 1
    mark[seeds] = stamp
    changed[:seeds.size] = seeds
    nch = K.dijkstra_sweep(indptr, nbr, wt, eid, dist, parent, seeds, mark,
                           stamp, changed, seeds.size, cutoff, work)
    layers = [dist.copy()] if keep_layers else None
    tr = None
    if trace:
        ch = changed[:nch].copy()
        tr = [(ch, parent[ch].copy())]
    rounds = 0
    cycle = None
    for i in range(1, limit + 1):
        if nch == 0:
            break
        active = changed[:nch].copy()
        stamp += 1
        nh = K.hop_step(hptr, hhead, hlen, heid, active, active.size, dist,
                        parent, best, best_eid, touched, mark, stamp, changed,
                        cutoff, work)
        seeds = changed[:nh].copy()
        nch = K.dijkstra_sweep(indptr, nbr, wt, eid, dist, parent, seeds,
                               mark, stamp, changed, nh, cutoff, work)
        rounds = i
        if trace:
            ch = changed[:nch].copy()
            tr.append((ch, parent[ch].copy()))
        if keep_layers:
            layers.append(dist.copy())
        if exact and i == k + 1 and nch > 0:
            cycle = int(changed[0])
    counters.add_kernel(work)

    if cycle is not None:
        if not trace:
            return hop_sssp(g, sources, h, cutoff=cutoff, tau=tau, trace=True)
        table = HopDistanceTable(None, dist, init, rounds, None, g, tr)
        walk = table.walk_to(cycle)
        found = negative_cycle_in_walk(g, walk)
        if found is None:
            raise RuntimeError("hop DP improved past the hop count without a negative cycle")
        return found
    if keep_layers and not exact:
        while len(layers) < limit + 1:
            layers.append(layers[-1])
    return HopDistanceTable(None if exact else int(h), dist, init, rounds, layers, g, tr)


# ---------------------------------------------------------------- oracles

def bellman_ford_oracle(g: Graph, source) -> DistanceResult:
    """Textbook Bellman-Ford from a vertex or from an iterable of vertices."""
    dist = np.full(g.n, INF)
    parent = np.full(g.n, -1, dtype=np.int64)
    srcs = [source] if np.isscalar(source) else list(source)
    for s in srcs:
        dist[int(s)] = 0.0
    work = np.zeros(3, dtype=np.int64)
    x = K.bellman_ford_passes(g.n, g.tail, g.head, g.length, dist, parent, work)
    counters.add_kernel(work)
    if x < 0:
        return DistanceResult(dist, parent, None, g)
    for _ in range(g.n):
        x = int(g.tail[parent[x]])
    edges = []
    y = x
    while True:
        e = int(parent[y])
        edges.append(e)
        y = int(g.tail[e])
        if y == x:
            break
    cyc = cycle_from_edges(g, edges[::-1])
    return DistanceResult(None, None, cyc, g)


def _dijkstra_plus(g: Graph, s):
    """Plain Dijkstra over the non-hop edges only."""
    hops = g.hop_mask
    return dijkstra(g.subgraph(~hops), [s]).dist


def proper_hop_distances(g: Graph, s):
    """Table[eta][t] of proper eta-hop distances from s, eta = 0..K.

    Walks use exactly eta hop edges with pairwise distinct tails and
    shortest non-hop paths between consecutive hops.  Subset dynamic
    program over the tails; K is the number of distinct hop tails.
    """
    hops = np.flatnonzero(g.hop_mask)
    tails = sorted(set(g.tail[hops].tolist()))
    kk = len(tails)
    if kk > PROPER_HOP_LIMIT:
        raise TooLarge(kk, PROPER_HOP_LIMIT)
    bit = {t: 1 << i for i, t in enumerate(tails)}
    E = hops.size
    d_s = _dijkstra_plus(g, s)
    head_rows = np.array([_dijkstra_plus(g, int(g.head[e])) for e in hops]).reshape(E, g.n)
    e_tail = g.tail[hops]
    e_len = g.length[hops]
    e_bit = np.array([bit[int(t)] for t in e_tail], dtype=np.int64)
    # step[e, f]: from the head of hop e to the head of hop f
    step = head_rows[:, e_tail] + e_len[None, :] if E else np.zeros((0, 0))
    f = np.full((1 << kk, E), INF)
    for j in range(E):
        f[e_bit[j], j] = min(f[e_bit[j], j], d_s[e_tail[j]] + e_len[j])
    best_end = np.full((kk + 1, E), INF)
    for mask in range(1, 1 << kk):
        row = f[mask]
        if not np.isfinite(row).any():
            continue
        pc = bin(mask).count("1")
        np.minimum(best_end[pc], row, out=best_end[pc])
        cand = (row[:, None] + step).min(axis=0)
        for j in range(E):
            if mask & e_bit[j] or not np.isfinite(cand[j]):
                continue
            nm = mask | e_bit[j]
            if cand[j] < f[nm, j]:
                f[nm, j] = cand[j]
    table = np.full((kk + 1, g.n), INF)
    table[0] = d_s
    for eta in range(1, kk + 1):
        if E:
            table[eta] = (best_end[eta][:, None] + head_rows).min(axis=0)
    return table


def proper_hop_oracle(g: Graph, s, t, eta):
    table = proper_hop_distances(g, s)
    if eta >= table.shape[0]:
        return INF
    return float(table[eta][t])


# ---------------------------------------------------------------- potentials

def reweight(g: Graph, phi, freeze=False) -> Graph:
    """Lengths l(u,v) + phi(u) - phi(v).  freeze keeps the current hop set."""
    phi = np.asarray(phi, dtype=np.float64)
    w = g.length + phi[g.tail] - phi[g.head]
    hops = g.hop_mask if freeze else None
    return Graph(g.n, g.tail, g.head, w, hops)


def validate_potential(g: Graph, phi, tau=0.0) -> bool:
    """No edge outside the negative-edge set becomes shorter than -tau.

    The negative-edge set is g.hop_mask: the negative edges for a plain
    graph, the designated reset arcs for an auxiliary graph.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (g.n,) or not np.all(np.isfinite(phi)):
        return False
    keep = ~g.hop_mask
    w = g.length[keep] + phi[g.tail[keep]] - phi[g.head[keep]]
    return bool(np.all(w >= -tau))


def neutralizes(g: Graph, phi, edge_mask=None, tau=0.0) -> bool:
    """Every selected edge (default all) is nonnegative under phi."""
    phi = np.asarray(phi, dtype=np.float64)
    if not np.all(np.isfinite(phi)):
        return False
    sel = slice(None) if edge_mask is None else np.asarray(edge_mask, dtype=bool)
    w = g.length[sel] + phi[g.tail[sel]] - phi[g.head[sel]]
    return bool(np.all(w >= -tau))


def compose(phi1, phi2):
    return np.asarray(phi1, dtype=np.float64) + np.asarray(phi2, dtype=np.float64)


def potential_from_distances(dist):
    dist = np.asarray(dist, dtype=np.float64)
    fin = np.isfinite(dist)
    if fin.all():
        return dist.copy()
    top = dist[fin].max() + 1.0 if fin.any() else 0.0
    return np.where(fin, dist, top)


def johnson_neutralize(g: Graph, tau=0.0):
    """phi(v) = d(V, v) through the hop DP, or a negative cycle."""
    res = hop_sssp(g, range(g.n), None, tau=tau, trace=False)
    if is_cycle(res):
        return res
    return potential_from_distances(res.dist)


def distances_via_potential(g: Graph, phi, source, tau=0.0):
    """Exact d(source, .) from a neutralizing potential and one Dijkstra."""
    phi = np.asarray(phi, dtype=np.float64)
    res = dijkstra(reweight(g, phi), [source], tau=tau)
    d = res.dist - phi[source] + phi
    d[~np.isfinite(res.dist)] = INF
    return DistanceResult(d, res.parent, None, g)
