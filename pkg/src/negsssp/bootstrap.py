"""Sparse distance estimates, bootstrapped hop reducers and the dense, sparse
and twice-recursive solvers built on them."""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import counters
from .base_solvers import (
    NegativeCycle,
    cycle_length,
    dijkstra,
    hop_sssp,
    is_cycle,
    johnson_neutralize,
    neutralizes,
    reweight,
    validate_potential,
)
from .errors import CycleFound, MissingEstimates, NotNeutralized, RetryBudgetExhausted
from .graph_core import ArcBuffer, Graph, induced, restrict_hops
from .layered_sparsification import (
    COPY,
    EXIT,
    FORWARD,
    RESET,
    SELF,
    SHORTCUT,
    neutralize_remote_layered,
    potentials_through,
    reset_sample_size,
)
from .remote_extraction import extract_or_neutralize, negative_reach


def _bisect_root(f, lo, hi, tol=1e-12):
    flo = f(lo)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


SQRT17 = math.sqrt(17)
DENSE_H_EXPONENT = (SQRT17 - 3) / 4
DENSE_H0_EXPONENT = SQRT17 - 4
DENSITY_EXPONENT = (33 - 7 * SQRT17) / 4
SPARSE_NUM_EXPONENT = 33 - 7 * SQRT17
SPARSE_DEN_EXPONENT = 37 - 7 * SQRT17

ALPHA = _bisect_root(lambda x: x ** 3 + 2 * x ** 2 + x - 2, 0.0, 1.0)
GAMMA = 1 + ALPHA ** 2 * (1 - ALPHA) / (2 * (2 + ALPHA))
TWICE_H_EXPONENT = ALPHA ** 2 / (2 + ALPHA)
# balances the m*k/b^2 shortcut term of the twice-recursive recurrence
TWICE_B_EXPONENT = (1 - ALPHA) / 2


def nearest_power_of_two(x):
    """Nearest power of two to x >= 1, ties rounding down."""
    if x <= 1:
        return 1
    lo = 2 ** int(math.floor(math.log2(x)))
    hi = 2 * lo
    return lo if x - lo <= hi - x else hi


@dataclass(frozen=True)
class BootstrapConfig:
    h: int
    h0: int
    c: float = 4.0
    retries: int = 3

    def __post_init__(self):
        assert self.h0 >= 2 and self.h0 & (self.h0 - 1) == 0, "h0 must be a power of two >= 2"
        assert self.h >= self.h0, "h must be at least h0"
        assert self.i1 < self.L, "need i1 < L"

    @property
    def i0(self):
        return int(self.h0).bit_length() - 1

    @property
    def i1(self):
        return 2 * self.i0

    @property
    def L(self):
        return int(math.ceil(math.log2(self.h))) + 1

    @classmethod
    def for_k(cls, k, c=4.0, retries=3):
        h0 = max(2, nearest_power_of_two(k ** DENSE_H0_EXPONENT))
        h = max(2, int(math.floor(k ** DENSE_H_EXPONENT + 0.5)))
        i1 = 2 * (h0.bit_length() - 1)
        # i1 < L needs h > 2^(i1 - 1)
        h = max(h, h0, 2 ** (i1 - 1) + 1)
        return cls(h, h0, c, retries)


# ---------------------------------------------------------------- levels

class Levels:
    """Negative-reach subgraphs G_i of G_U and their hop-distance layers.

    For i in i0..L-1, V_i is the 2^i-hop negative reach of U and V_L is
    every vertex.  Hop layers of G_i are kept up to 2^i hops.
    """

    def __init__(self, g: Graph, U, cfg: BootstrapConfig):
        self.g = g
        self.cfg = cfg
        self.U = np.asarray(sorted(set(int(u) for u in U)), dtype=np.int64)
        hop = g.hop_mask
        self.heads = np.unique(g.head[hop])
        self.i0, self.i1, self.L = cfg.i0, cfg.i1, cfg.L
        self.ids: Dict[int, np.ndarray] = {}
        self.sub: Dict[int, Graph] = {}
        self.pos: Dict[int, np.ndarray] = {}
        self.tables = {}
        for i in range(self.i0, self.L + 1):
            if i == self.L:
                verts = np.arange(g.n, dtype=np.int64)
            else:
                verts = negative_reach(g, self.U, 2 ** i).reach
            sub, ids = induced(g, verts)
            pos = np.full(g.n, -1, dtype=np.int64)
            pos[ids] = np.arange(ids.size)
            self.ids[i], self.sub[i], self.pos[i] = ids, sub, pos
            if i < self.L:
                table = hop_sssp(sub, range(sub.n), 2 ** i, keep_layers=True, trace=False)
                if is_cycle(table):
                    raise CycleFound(self.lift_cycle(i, table))
                self.tables[i] = table

    def lift_cycle(self, i, cycle):
        verts = [int(self.ids[i][v]) for v in cycle.vertices]
        total = cycle_length(self.g, verts)
        return NegativeCycle(verts, total if total is not None else cycle.length)

    def hop_layer(self, i, hops):
        """d^hops(V_i, .)_i indexed by global id (inf outside V_i)."""
        out = np.full(self.g.n, np.inf)
        out[self.ids[i]] = self.tables[i].layer(hops)
        return out

    def u_local(self, i):
        return self.pos[i][self.U]


# ---------------------------------------------------------------- types

@dataclass
class SparseDistanceEstimates:
    level: int
    X: np.ndarray
    U: np.ndarray
    heads: np.ndarray
    delta_out: np.ndarray
    delta_in: np.ndarray


@dataclass
class HopReducer:
    H: Graph
    phi: np.ndarray
    factor: int
    embed: np.ndarray
    level: int
    gadgets: dict
    orig_of: np.ndarray
    kind: np.ndarray
    _reweighted: Optional[Graph] = field(default=None, repr=False)

    @property
    def reweighted(self):
        """H with lengths shifted by phi; its hop arcs are the reset arcs."""
        if self._reweighted is None:
            self._reweighted = reweight(self.H, self.phi, freeze=True)
        return self._reweighted


# ---------------------------------------------------------------- reducers

def build_reducer(levels: Levels, i, estimates, tau=0.0) -> HopReducer:
    """A 2^(i-2)-hop reducer for G_i with reset arcs as the only negative arcs.

    Base copy of G_i+, one shortcut gadget per level j in i0+1..i-1 and a
    layered gadget of h0 copies of G_{i0}+.
    """
    i0, L, h0 = levels.i0, levels.L, levels.cfg.h0
    assert levels.i1 + 1 <= i <= L, "reducer level out of range"
    assert i >= 3
    for j in range(i0 + 1, i):
        if j not in estimates:
            raise MissingEstimates(j)
    g = levels.g
    gi, ids_i, pos_i = levels.sub[i], levels.ids[i], levels.pos[i]
    n_i = gi.n
    gt, gh = ids_i[gi.tail], ids_i[gi.head]
    plus_i = ~gi.hop_mask

    arcs = ArcBuffer()
    gadgets = {"base": (0, n_i)}
    orig = [ids_i]
    phi = [np.zeros(n_i)]
    nxt = n_i

    def base(v):
        return pos_i[v]

    arcs.add(base(gt[plus_i]), base(gh[plus_i]), gi.length[plus_i], COPY)

    for j in range(i0 + 1, i):
        est = estimates[j]
        gj, ids_j, pos_j = levels.sub[j], levels.ids[j], levels.pos[j]
        oj = nxt
        ox = oj + gj.n
        nx = est.X.size
        nxt = ox + nx
        gadgets[j] = (oj, gj.n, ox, nx)
        orig += [ids_j, est.X]
        lo = levels.tables[j].layer(2 ** (j - 1))
        phi += [levels.tables[j].layer(2 ** j), lo[pos_j[est.X]]]
        pj = ~gj.hop_mask
        arcs.add(oj + gj.tail[pj], oj + gj.head[pj], gj.length[pj], COPY)
        if nx:
            a, b = np.nonzero(np.isfinite(est.delta_out))
            arcs.add(base(est.U[a]), ox + b, est.delta_out[a, b], SHORTCUT)
            b, c = np.nonzero(np.isfinite(est.delta_in))
            arcs.add(ox + b, oj + pos_j[est.heads[c]], est.delta_in[b, c], SHORTCUT)
        leave = (pos_j[gt] >= 0) & (pos_j[gh] < 0)
        arcs.add(oj + pos_j[gt[leave]], base(gh[leave]), gi.length[leave], EXIT)
        arcs.add(oj + np.arange(gj.n), base(ids_j), 0.0, RESET)

    g0, ids_0, pos_0 = levels.sub[i0], levels.ids[i0], levels.pos[i0]
    n0 = g0.n
    ol = nxt
    nxt = ol + h0 * n0
    gadgets["layered"] = (ol, n0, h0)
    table0 = levels.tables[i0]

    def lay(v_local, eta):
        return ol + (eta - 1) * n0 + v_local

    p0 = ~g0.hop_mask
    hop0 = g0.hop_mask
    leave0 = (pos_0[gt] >= 0) & (pos_0[gh] < 0)
    for eta in range(1, h0 + 1):
        orig.append(ids_0)
        phi.append(table0.layer(eta))
        arcs.add(lay(g0.tail[p0], eta), lay(g0.head[p0], eta), g0.length[p0], COPY)
        tails = base(ids_0[g0.tail[hop0]]) if eta == 1 else lay(g0.tail[hop0], eta - 1)
        arcs.add(tails, lay(g0.head[hop0], eta), g0.length[hop0], FORWARD)
        arcs.add(lay(pos_0[gt[leave0]], eta), base(gh[leave0]), gi.length[leave0], EXIT)
        arcs.add(lay(np.arange(n0), eta), base(ids_0), 0.0, RESET)

    H, kind = arcs.build(nxt, RESET)
    counters.add(aux_edges=H.m, aux_vertices=nxt)
    phi = np.concatenate(phi)
    w = H.length + phi[H.tail] - phi[H.head]
    assert np.all(w[kind != RESET] >= -tau), "reducer potential left a non-reset arc negative"
    embed = np.full(g.n, -1, dtype=np.int64)
    embed[ids_i] = np.arange(n_i)
    return HopReducer(H, phi, 2 ** (i - 2), embed, i, gadgets, np.concatenate(orig), kind)


def _sample_size(n_u, n, scale, c):
    if n_u == 0:
        return 0
    return min(n_u, int(math.ceil(c * n_u * math.log(max(n, 2)) / scale)))


def estimates_from_reducer(red: HopReducer, levels: Levels, rng, c=4.0, level=None) -> SparseDistanceEstimates:
    """Level estimates from 2-hop distances to and from a sample X of U in the reducer."""
    j = red.level if level is None else level
    U, heads = levels.U, levels.heads
    size = _sample_size(U.size, levels.g.n, 2 ** j, c)
    if size >= U.size:
        X = U.copy()
    else:
        X = np.sort(rng.choice(U, size=size, replace=False))
    counters.add(estimate_samples=X.size)
    low = levels.hop_layer(j, 2 ** (j - 1))
    high = levels.hop_layer(j, 2 ** j)
    Hr = red.reweighted
    Ht = Hr.transpose()
    delta_out = np.empty((U.size, X.size))
    delta_in = np.empty((X.size, heads.size))
    for b, x in enumerate(X.tolist()):
        src = [int(red.embed[x])]
        to_x = hop_sssp(Ht, src, 2, trace=False, detect_cycles=False).dist
        from_x = hop_sssp(Hr, src, 2, trace=False, detect_cycles=False).dist
        delta_out[:, b] = np.maximum(to_x[red.embed[U]], low[x])
        delta_in[b, :] = np.maximum(from_x[red.embed[heads]], high[heads] - low[x])
    return SparseDistanceEstimates(j, X, U.copy(), heads.copy(), delta_out, delta_in)


def seed_estimates_via_neutralized_subgraph(levels: Levels, j, phi_c, rng, c=4.0, tau=0.0):
    """Level-j estimates through an n-hop reducer made of G_j+ and G_j reweighted by phi_c.

    phi_c is indexed by the local ids of G_j and must neutralize it.
    """
    gj, ids_j = levels.sub[j], levels.ids[j]
    phi_c = np.asarray(phi_c, dtype=np.float64)
    if not (validate_potential(gj, phi_c, tau) and neutralizes(gj, phi_c, tau=tau)):
        raise NotNeutralized(f"potential does not neutralize level {j}")
    shifted = phi_c - phi_c.min() if phi_c.size else phi_c
    n = gj.n
    allv = np.arange(n)
    plus = ~gj.hop_mask
    arcs = ArcBuffer()
    arcs.add(gj.tail[plus], gj.head[plus], gj.length[plus], COPY)
    neutral = gj.length + shifted[gj.tail] - shifted[gj.head]
    arcs.add(n + gj.tail, n + gj.head, np.maximum(neutral, 0.0), COPY)
    arcs.add(allv, n + allv, -shifted, RESET)
    arcs.add(n + allv, allv, shifted, SELF)
    H, kind = arcs.build(2 * n, RESET)
    counters.add(aux_edges=H.m, aux_vertices=2 * n)
    embed = np.full(levels.g.n, -1, dtype=np.int64)
    embed[ids_j] = allv
    red = HopReducer(H, np.zeros(2 * n), n, embed, j, {"base": (0, n), "shifted": (n, n)},
                     np.concatenate([ids_j, ids_j]), kind)
    return estimates_from_reducer(red, levels, rng, c, level=j)


def bootstrap_full(levels: Levels, seeds, rng, c=4.0, tau=0.0) -> HopReducer:
    """Alternate reducer construction and estimation from level i1+1 up to L."""
    est = dict(seeds)
    red = build_reducer(levels, levels.i1 + 1, est, tau)
    for i in range(levels.i1 + 1, levels.L):
        est[i] = estimates_from_reducer(red, levels, rng, c)
        red = build_reducer(levels, i + 1, est, tau)
    return red


# ---------------------------------------------------------------- dense solver

def _lift_local(levels_g, ids, cyc):
    verts = [int(ids[v]) for v in cyc.vertices]
    total = cycle_length(levels_g, verts)
    if total is None or total >= 0:
        from .solver import witness_cycle
        return witness_cycle(levels_g)
    return NegativeCycle(verts, total)


def neutralize_remote_bootstrap(g1: Graph, U, bcfg: BootstrapConfig, engine, parent_k):
    """Potential for g1 neutralizing the negative edges of U, or a negative cycle."""
    from .solver import witness_cycle

    cfg = engine.cfg
    G = restrict_hops(g1, U)
    try:
        levels = Levels(G, U, bcfg)
    except CycleFound as exc:
        return exc.cycle
    i0, i1 = levels.i0, levels.i1
    g_top, ids_top = levels.sub[i1], levels.ids[i1]
    res = neutralize_remote_layered(g_top, levels.u_local(i1).tolist(), bcfg.h0, engine,
                                    parent_k, r=1)
    if is_cycle(res):
        return _lift_local(G, ids_top, res)
    phi_top = np.full(G.n, np.nan)
    phi_top[ids_top] = res

    target = G.hop_mask
    for attempt in range(bcfg.retries + 1):
        if attempt:
            counters.add(retries=1)
        seeds = {j: seed_estimates_via_neutralized_subgraph(levels, j, phi_top[levels.ids[j]],
                                                            engine.rng, bcfg.c, cfg.tau)
                 for j in range(i0 + 1, i1 + 1)}
        red = bootstrap_full(levels, seeds, engine.rng, bcfg.c, cfg.tau)
        base = red.embed[np.arange(G.n)]
        table = hop_sssp(red.reweighted, base.tolist(), None, tau=cfg.tau, trace=False)
        if is_cycle(table):
            return witness_cycle(G)
        phi_u = table.dist[base]
        if validate_potential(G, phi_u, cfg.tau) and neutralizes(G, phi_u, target, cfg.tau):
            return phi_u
    raise RetryBudgetExhausted(f"bootstrapped reducer failed {bcfg.retries + 1} times")


def _neutralize_iteratively(g: Graph, engine, step):
    """Shared outer loop: shrink the negative vertex count until none is left."""
    cfg = engine.cfg
    phi = np.zeros(g.n)
    while True:
        cur = reweight(g, phi)
        k = len(cur.neg_vertices)
        if k == 0:
            return phi
        if k <= cfg.base_k:
            res = johnson_neutralize(cur, tau=cfg.tau)
            return res if is_cycle(res) else phi + res
        res = step(cur, k)
        if is_cycle(res):
            return res
        phi = phi + res


def solve_dense(g: Graph, engine):
    """Neutralize a canonical graph by remote extraction and bootstrapped reducers."""
    cfg = engine.cfg

    def step(cur, k):
        bcfg = BootstrapConfig.for_k(k, cfg.sample_const, cfg.retries)
        out = extract_or_neutralize(cur, bcfg.h, bcfg.h0, cfg.extract_mode or "graded",
                                    engine, b=bcfg.h)
        if out.kind == "cycle":
            return out.cycle
        if out.kind == "neutralized":
            return out.phi
        g1 = reweight(cur, out.phi)
        res = neutralize_remote_bootstrap(g1, out.U, bcfg, engine, parent_k=k)
        return res if is_cycle(res) else out.phi + res

    return _neutralize_iteratively(g, engine, step)


def sparse_hop_budget(k, m):
    """Layer count that lifts a sparse graph back to the density threshold."""
    if k <= 1 or m <= 0:
        return 1
    h = (k ** SPARSE_NUM_EXPONENT / m ** 4) ** (1 / SPARSE_DEN_EXPONENT)
    return int(min(max(1, math.floor(h + 0.5)), k))


def _layered_then(g: Graph, engine, h, fallback):
    cfg = engine.cfg
    k = len(g.neg_vertices)
    if k <= cfg.base_k or h <= 1:
        return fallback(g, engine)
    U = sorted(g.neg_vertices)
    return neutralize_remote_layered(g, U, h, engine, parent_k=k, r=1)


def solve_sparse(g: Graph, engine):
    """Layer a sparse graph h times, sparsify its negative edges, solve the result densely."""
    k = len(g.neg_vertices)
    h = engine.cfg.sparse_h or sparse_hop_budget(k, g.m)
    return _layered_then(g, engine, min(h, max(k, 1)), solve_dense)


def solve_dense_auto(g: Graph, engine):
    k = len(g.neg_vertices)
    if k > 1 and g.m < k ** DENSITY_EXPONENT:
        return solve_sparse(g, engine)
    return solve_dense(g, engine)


# ---------------------------------------------------------------- twice-recursive

def twice_parameters(k):
    h = max(2, int(math.floor(k ** TWICE_H_EXPONENT + 0.5)))
    b = int(math.floor(k ** TWICE_B_EXPONENT + 0.5))
    return h, min(max(1, b), h)


@dataclass
class HybridGraph:
    H: Graph
    phi: np.ndarray
    pi0: np.ndarray
    pi1: np.ndarray
    orig_of: np.ndarray
    kind: np.ndarray
    X: np.ndarray
    U0: np.ndarray


def build_hybrid(G: Graph, U, h, b, dist_to, dist_from, X, table, reach, rng, c=4.0, tau=0.0):
    """Layered graph G_0..G_b over the h-hop reach plus shortcuts through X.

    dist_to[a, x] and dist_from[x, c] hold d_{G_h}(U[a], X[x]) and
    d_{G_h}(X[x], heads[c]) indexed by global ids via the arrays passed.
    """
    n = G.n
    U = np.asarray(sorted(U), dtype=np.int64)
    heads = np.unique(G.head[G.hop_mask])
    half = max(1, h // 2)
    in_r = np.zeros(n, dtype=bool)
    in_r[reach] = True
    nR = reach.size
    pos = np.full(n, -1, dtype=np.int64)
    pos[reach] = np.arange(nR)
    top = n + (b - 1) * nR
    ox = top + n
    N = ox + X.size

    def vid(v, i):
        if i == 0:
            return v
        if i == b:
            return top + v
        return n + (i - 1) * nR + pos[v]

    orig_of = np.concatenate([np.arange(n)] + [reach] * (b - 1) + [np.arange(n), X])
    hop = G.hop_mask
    plus = ~hop
    t, hd, w = G.tail, G.head, G.length
    inner = plus & in_r[t] & in_r[hd]
    hop_idx = np.flatnonzero(hop)
    allv = np.arange(n)

    arcs = ArcBuffer()
    arcs.add(vid(t[plus], 0), vid(hd[plus], 0), w[plus], COPY)
    arcs.add(vid(t[plus], b), vid(hd[plus], b), w[plus], COPY)
    for i in range(1, b):
        arcs.add(vid(t[inner], i), vid(hd[inner], i), w[inner], COPY)
    for i in range(1, b + 1):
        arcs.add(vid(t[hop_idx], i - 1), vid(hd[hop_idx], i), w[hop_idx], FORWARD)
        arcs.add(vid(reach, i - 1), vid(reach, i), 0.0, SELF)
    outside = allv[~in_r]
    arcs.add(vid(outside, 0), vid(outside, b), 0.0, SELF)
    leave = in_r[t] & ~in_r[hd]
    arcs.add(vid(t[leave], b), vid(hd[leave], 0), w[leave], EXIT)

    low = table.layer(half)
    high = table.layer(h)
    if X.size:
        out_len = np.maximum(dist_to, low[X][None, :])
        a, x = np.nonzero(np.isfinite(out_len))
        arcs.add(vid(U[a], 0), ox + x, out_len[a, x], SHORTCUT)
        in_len = np.maximum(dist_from, high[heads][None, :] - low[X][:, None])
        x, cc = np.nonzero(np.isfinite(in_len))
        arcs.add(ox + x, vid(heads[cc], b), in_len[x, cc], SHORTCUT)

    U0 = np.sort(rng.choice(U, size=reset_sample_size(U.size, n, h, c), replace=False)) \
        if U.size else U
    arcs.add(vid(U0, b), vid(U0, 0), 0.0, RESET)
    H, kind = arcs.build(N, RESET)
    counters.add(aux_edges=H.m, aux_vertices=N)

    phi = np.empty(N)
    phi[:n] = 0.0
    for i in range(1, b):
        phi[vid(reach, i)] = table.layer(i)[reach]
    phi[top:top + n] = high
    phi[ox:] = low[X]
    wphi = H.length + phi[H.tail] - phi[H.head]
    assert np.all(wphi[kind != RESET] >= -tau), "hybrid potential left a non-reset arc negative"
    return HybridGraph(H, phi, allv.copy(), top + allv, orig_of, kind, X, U0)


def neutralize_remote_twice(g1: Graph, U, h, b, engine, parent_k):
    """Neutralize the edges of an (h, b)-remote set U through the hybrid graph."""
    from .solver import lift_aux_cycle

    cfg = engine.cfg
    U = np.asarray(sorted(U), dtype=np.int64)
    G = restrict_hops(g1, U.tolist())
    n = G.n
    reach = negative_reach(G, U, h).reach
    gh, ids = induced(G, reach)
    res = engine.neutralize(gh, parent_k=parent_k)
    if is_cycle(res):
        return _lift_local(G, ids, res)
    gh_phi = reweight(gh, res)
    pos = np.full(n, -1, dtype=np.int64)
    pos[ids] = np.arange(ids.size)
    table = hop_sssp(G, range(n), h, keep_layers=True, trace=False)
    if is_cycle(table):
        return table
    heads = np.unique(G.head[G.hop_mask])
    target = G.hop_mask

    for attempt in range(cfg.retries + 1):
        if attempt:
            counters.add(retries=1)
        size = _sample_size(U.size, n, b, cfg.sample_const)
        X = U.copy() if size >= U.size else np.sort(engine.rng.choice(U, size=size, replace=False))
        counters.add(estimate_samples=X.size)
        dist_to = np.empty((U.size, X.size))
        dist_from = np.empty((X.size, heads.size))
        for j, x in enumerate(X.tolist()):
            lx = int(pos[x])
            fwd = dijkstra(gh_phi, [lx], tau=cfg.tau).dist - res[lx] + res
            bwd = dijkstra(gh_phi.transpose(), [lx], tau=cfg.tau).dist + res[lx] - res
            dist_to[:, j] = bwd[pos[U]]
            dist_from[j, :] = fwd[pos[heads]]
        hy = build_hybrid(G, U, h, b, dist_to, dist_from, X, table, reach, engine.rng,
                          cfg.sample_const, cfg.tau)
        Hphi = reweight(hy.H, hy.phi)
        psi = engine.neutralize(Hphi, parent_k=parent_k)
        if is_cycle(psi):
            return lift_aux_cycle(G, psi, hy.orig_of)
        phi_u = potentials_through(hy.H, hy.phi + psi, hy.pi0, hy.pi1, cfg.tau)
        if validate_potential(G, phi_u, cfg.tau) and neutralizes(G, phi_u, target, cfg.tau):
            return phi_u
    raise RetryBudgetExhausted(f"hybrid graph failed {cfg.retries + 1} times")


def solve_twice_recursive(g: Graph, engine):
    """Neutralize a canonical graph with the layered-plus-shortcut hybrid graph."""
    cfg = engine.cfg

    def step(cur, k):
        h, b = twice_parameters(k)
        out = extract_or_neutralize(cur, h, h, cfg.extract_mode or "single", engine, b=b)
        if out.kind == "cycle":
            return out.cycle
        if out.kind == "neutralized":
            return out.phi
        g1 = reweight(cur, out.phi)
        res = neutralize_remote_twice(g1, out.U, h, b, engine, parent_k=k)
        return res if is_cycle(res) else out.phi + res

    return _neutralize_iteratively(g, engine, step)


def twice_sparse_hop_budget(k, m):
    if k <= 1 or m <= 0:
        return 1
    h = (k ** GAMMA / m) ** (1 / (1 + GAMMA))
    return int(min(max(1, math.floor(h + 0.5)), k))


def solve_twice_recursive_sparse(g: Graph, engine):
    k = len(g.neg_vertices)
    h = engine.cfg.sparse_h or twice_sparse_hop_budget(k, g.m)
    return _layered_then(g, engine, min(h, max(k, 1)), solve_twice_recursive)


def solve_twice_recursive_auto(g: Graph, engine):
    k = len(g.neg_vertices)
    if k > 1 and g.m < k ** GAMMA:
        return solve_twice_recursive_sparse(g, engine)
    return solve_twice_recursive(g, engine)
