"""Layered negative-edge sparsifier and the recursive solver built on it."""

import math
from dataclasses import dataclass

import numpy as np

from . import counters
from .base_solvers import (
    dijkstra,
    hop_sssp,
    is_cycle,
    johnson_neutralize,
    neutralizes,
    reweight,
    validate_potential,
)
from .errors import CycleFound, ReachTooLarge, RetryBudgetExhausted
from .graph_core import ArcBuffer, Graph, restrict_hops

CLASSIC_EXPONENT = (2 * math.sqrt(3) - 3) / 3
IMPROVED_EXPONENT = (math.sqrt(2) - 1) / (math.sqrt(2) + 1)

# arc kinds in auxiliary graphs
COPY, FORWARD, SELF, EXIT, RESET, SHORTCUT = range(6)


@dataclass
class SparsifiedGraph:
    H: Graph
    phi: np.ndarray
    pi0: np.ndarray
    pi1: np.ndarray
    U0: np.ndarray
    h: int
    layer_of: np.ndarray
    orig_of: np.ndarray
    kind: np.ndarray
    reach: np.ndarray
    g_u: Graph
    degenerate: bool = False

    @property
    def reset_mask(self):
        return self.H.hop_mask


def choose_h_recursive(k, variant="classic"):
    e = CLASSIC_EXPONENT if variant == "classic" else IMPROVED_EXPONENT
    return max(1, int(math.floor(k ** e + 0.5)))


def reset_sample_size(n_u, n, h, c):
    if n_u == 0:
        return 0
    return min(n_u, int(math.ceil(c * n_u * math.log(max(n, 2)) / h)))


def build_sparsifier(g: Graph, U, h, r=1, rng=None, c=4.0, c0=0.0) -> SparsifiedGraph:
    """Layers 0..h over G_U whose sampled reset arcs are the only negative arcs.

    Layer 0 and layer h copy every non-hop edge, layers 1..h-1 copy only the
    h-hop negative reach of U.  Vertices outside the reach get a zero arc
    straight from layer 0 to layer h.  The potential of copy v_i is
    d^i_U(V, v).
    """
    from .remote_extraction import negative_reach

    rng = rng if rng is not None else np.random.default_rng(0)
    U = np.asarray(sorted(set(int(u) for u in U)), dtype=np.int64)
    n = g.n
    g_u = restrict_hops(g, U.tolist())
    if h < 1:
        raise ValueError("h must be at least 1")
    cert = negative_reach(g_u, U, h)
    R = cert.reach
    if R.size > n / r:
        raise ReachTooLarge(f"reach {R.size} exceeds n/r = {n / r:.1f}")

    if h < c0 * math.log(max(n, 2)):
        ident = np.arange(n, dtype=np.int64)
        hops = g_u.hop_mask
        kind = np.where(hops, RESET, COPY).astype(np.int8)
        return SparsifiedGraph(g_u.with_hops(hops), np.zeros(n), ident, ident, U, h,
                               np.zeros(n, dtype=np.int64), ident, kind, R, g_u, True)

    table = hop_sssp(g_u, range(n), h, keep_layers=True, trace=False)
    if is_cycle(table):
        raise CycleFound(table)

    nR = R.size
    pos = np.full(n, -1, dtype=np.int64)
    pos[R] = np.arange(nR)
    top = n + (h - 1) * nR

    def vid(v, i):
        if i == 0:
            return v
        if i == h:
            return top + v
        return n + (i - 1) * nR + pos[v]

    N = top + n
    layer_of = np.empty(N, dtype=np.int64)
    orig_of = np.empty(N, dtype=np.int64)
    layer_of[:n] = 0
    orig_of[:n] = np.arange(n)
    for i in range(1, h):
        layer_of[n + (i - 1) * nR:n + i * nR] = i
        orig_of[n + (i - 1) * nR:n + i * nR] = R
    layer_of[top:] = h
    orig_of[top:] = np.arange(n)

    hop = g_u.hop_mask
    t, hd, w = g_u.tail, g_u.head, g_u.length
    plus = ~hop
    in_r = pos >= 0
    inner = plus & in_r[t] & in_r[hd]
    leaving = in_r[t] & ~in_r[hd]
    hops_idx = np.flatnonzero(hop)

    arcs = ArcBuffer()
    arcs.add(vid(t[plus], 0), vid(hd[plus], 0), w[plus], COPY)
    arcs.add(vid(t[plus], h), vid(hd[plus], h), w[plus], COPY)
    for i in range(1, h):
        arcs.add(vid(t[inner], i), vid(hd[inner], i), w[inner], COPY)
    for i in range(h):
        ok = np.ones(hops_idx.size, dtype=bool) if i + 1 == h else in_r[hd[hops_idx]]
        e = hops_idx[ok]
        arcs.add(vid(t[e], i), vid(hd[e], i + 1), w[e], FORWARD)
        arcs.add(vid(R, i), vid(R, i + 1), 0.0, SELF)
    outside = np.flatnonzero(~in_r)
    arcs.add(vid(outside, 0), vid(outside, h), 0.0, SELF)
    for i in range(1, h + 1):
        e = np.flatnonzero(leaving & (plus if i == h else np.ones_like(plus)))
        arcs.add(vid(t[e], i), hd[e], w[e], EXIT)

    U0 = np.sort(rng.choice(U, size=reset_sample_size(U.size, n, h, c), replace=False)) \
        if U.size else U
    arcs.add(vid(U0, h), vid(U0, 0), 0.0, RESET)
    H, kind = arcs.build(N, RESET)
    counters.add(aux_edges=H.m, aux_vertices=N)

    phi = np.empty(N)
    for i in range(h + 1):
        layer = table.layer(i)
        if i == 0 or i == h:
            phi[vid(np.arange(n), i)] = layer
        else:
            phi[vid(R, i)] = layer[R]
    w_phi = H.length + phi[H.tail] - phi[H.head]
    assert np.all(w_phi[kind != RESET] >= 0), "layered potential left a non-reset arc negative"
    pi0 = np.arange(n, dtype=np.int64)
    pi1 = top + np.arange(n, dtype=np.int64)
    return SparsifiedGraph(H, phi, pi0, pi1, U0, h, layer_of, orig_of, kind, R, g_u)


def potentials_through(H: Graph, P, pi0, pi1, tau=0.0):
    """d(V, v) for the base graph, read off an auxiliary graph neutralized by P.

    Multi-source Dijkstra from every pi0(v) in H reweighted by P, mapped back
    through pi1.
    """
    P = np.asarray(P, dtype=np.float64)
    Hp = reweight(H, P)
    res = dijkstra(Hp, {int(a): -P[a] for a in pi0}, tau=tau)
    return res.dist[pi1] + P[pi1]


def neutralize_remote_layered(g1: Graph, U, h, engine, parent_k, r=None):
    """Neutralize the negative edges of U in g1 through a layered sparsifier.

    Returns a potential valid for g1 that makes every edge of U nonnegative,
    or a negative cycle.  Sampling failures are retried with fresh samples.
    """
    from .solver import lift_aux_cycle

    cfg = engine.cfg
    r = h if r is None else r
    U = np.asarray(sorted(U), dtype=np.int64)
    g_u = restrict_hops(g1, U.tolist())
    target = np.isin(g_u.tail, U) & (g_u.length < 0)
    for attempt in range(cfg.retries + 1):
        if attempt:
            counters.add(retries=1)
        try:
            sp = build_sparsifier(g1, U, h, r=r, rng=engine.rng, c=cfg.sample_const,
                                  c0=cfg.degenerate_const)
        except CycleFound as exc:
            return exc.cycle
        if sp.degenerate:
            res = engine.neutralize(sp.H.with_hops(None), parent_k=parent_k)
            if is_cycle(res):
                return res
            phi_c = res
        else:
            Hphi = reweight(sp.H, sp.phi)
            psi = engine.neutralize(Hphi, parent_k=parent_k)
            if is_cycle(psi):
                return lift_aux_cycle(g_u, psi, sp.orig_of)
            phi_c = potentials_through(sp.H, sp.phi + psi, sp.pi0, sp.pi1, cfg.tau)
        if validate_potential(g_u, phi_c, cfg.tau) and neutralizes(g_u, phi_c, target, cfg.tau):
            return phi_c
    raise RetryBudgetExhausted(f"layered sparsifier failed {cfg.retries + 1} times")


def solve_recursive(g: Graph, engine, variant="classic"):
    """Neutralize a canonical graph by repeated remote extraction and sparsification."""
    from .remote_extraction import extract_or_neutralize

    cfg = engine.cfg
    phi = np.zeros(g.n)
    mode = cfg.extract_mode or "single"
    while True:
        cur = reweight(g, phi)
        k = len(cur.neg_vertices)
        if k == 0:
            return phi
        if k <= cfg.base_k:
            res = johnson_neutralize(cur, tau=cfg.tau)
            if is_cycle(res):
                return res
            return phi + res
        h = choose_h_recursive(k, variant)
        out = extract_or_neutralize(cur, h, h, mode, engine, b=h)
        if out.kind == "cycle":
            return out.cycle
        if out.kind == "neutralized":
            phi = phi + out.phi
            continue
        g1 = reweight(cur, out.phi)
        res = neutralize_remote_layered(g1, out.U, h, engine, parent_k=k)
        if is_cycle(res):
            return res
        phi = phi + out.phi + res
