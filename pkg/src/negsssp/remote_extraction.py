"""Negative reach, betweenness reduction and remote-set extraction."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import counters
from .base_solvers import (
    NegativeCycle,
    hop_sssp,
    is_cycle,
    johnson_neutralize,
    reweight,
    validate_potential,
)
from .errors import CycleFound, ExtractionFailed
from .graph_core import ArcBuffer, Graph, restrict_hops
from .layered_sparsification import COPY, FORWARD, RESET, SELF


@dataclass
class ReachCertificate:
    U: tuple
    h: int
    reach: np.ndarray
    reach_edges: int

    @property
    def size(self):
        return int(self.reach.size)


@dataclass
class ExtractOutcome:
    kind: str
    phi: Optional[np.ndarray] = None
    count: int = 0
    U: List[int] = field(default_factory=list)
    certificates: Dict[int, ReachCertificate] = field(default_factory=dict)
    cycle: Optional[NegativeCycle] = None


def negative_reach(g: Graph, U, h) -> ReachCertificate:
    """U together with every vertex some u in U reaches by a negative <= h-hop walk.

    Hops are the edges of g.hop_mask whose tail is in U.  Values that are
    not negative are pruned: a negative walk from U has a suffix starting
    at a vertex of U whose prefix sums all stay negative.
    """
    U = np.asarray(sorted(set(int(u) for u in U)), dtype=np.int64)
    if U.size == 0:
        return ReachCertificate((), h, np.zeros(0, dtype=np.int64), 0)
    inU = np.zeros(g.n, dtype=bool)
    inU[U] = True
    hop = g.hop_mask
    keep = ~hop | inU[g.tail]
    sub = g if keep.all() else g.subgraph(keep)
    table = hop_sssp(sub, U.tolist(), h, cutoff=0.0, trace=False, detect_cycles=False)
    reached = table.dist < 0
    reached[U] = True
    reach = np.flatnonzero(reached)
    inner = int(np.count_nonzero(reached[g.tail] & reached[g.head]))
    return ReachCertificate(tuple(U.tolist()), h, reach, inner)


def betweenness_reduce(g: Graph, b, h, rng, neutralizer, cb=4.0):
    """Potential for g after which few vertices lie h-hop negatively between pairs.

    Builds 2h+1 copies of G+ (layers -h..h), forward arcs per negative edge,
    zero self-arcs between consecutive copies of a vertex and reset arcs
    x_h -> x_{-h} for a sample X of negative vertices.  Layer potentials
    d^i(V, v) above zero and -d^{-i}(v, V) below leave only reset arcs
    negative; the neutralizer handles the rest.  Returns layer 0 of the
    composed potential.
    """
    from .solver import lift_aux_cycle

    n = g.n
    neg = np.flatnonzero(g.length < 0)
    if neg.size == 0:
        return np.zeros(n)
    g = g.with_hops(None)
    fwd = hop_sssp(g, range(n), h, keep_layers=True, trace=False)
    bwd = hop_sssp(g.transpose(), range(n), h, keep_layers=True, trace=False)
    for t in (fwd, bwd):
        if is_cycle(t):
            raise CycleFound(t if t is fwd else _reverse_cycle(g, t))
    N_neg = np.asarray(sorted(g.neg_vertices), dtype=np.int64)
    size = min(N_neg.size, int(math.ceil(cb * b * math.log(max(n, 2)))))
    X = N_neg if size >= N_neg.size else np.sort(rng.choice(N_neg, size=size, replace=False))

    L = 2 * h + 1

    def vid(v, i):
        return (i + h) * n + v

    plus = g.length >= 0
    t, hd, w = g.tail, g.head, g.length
    arcs = ArcBuffer()
    allv = np.arange(n)
    for i in range(-h, h + 1):
        arcs.add(vid(t[plus], i), vid(hd[plus], i), w[plus], COPY)
    for i in range(-h, h):
        arcs.add(vid(t[neg], i), vid(hd[neg], i + 1), w[neg], FORWARD)
        arcs.add(vid(allv, i), vid(allv, i + 1), 0.0, SELF)
    arcs.add(vid(X, h), vid(X, -h), 0.0, RESET)
    Hb, kind = arcs.build(L * n, RESET)
    counters.add(aux_edges=Hb.m, aux_vertices=L * n)

    phi = np.empty(L * n)
    for i in range(-h, h + 1):
        layer = fwd.layer(i) if i >= 0 else -bwd.layer(-i)
        phi[vid(allv, i)] = layer
    residual = reweight(Hb, phi)
    negatives = residual.length < 0
    assert not np.any(negatives & (kind != RESET)), "betweenness layers left a non-reset arc negative"
    psi = neutralizer(residual)
    if is_cycle(psi):
        orig_of = np.tile(allv, L)
        raise CycleFound(lift_aux_cycle(g, psi, orig_of))
    P = phi + psi
    out = P[vid(allv, 0)]
    assert validate_potential(g, out), "betweenness potential is not valid"
    return out


def _reverse_cycle(g, cyc):
    verts = cyc.vertices[::-1]
    return NegativeCycle(verts, cyc.length)


def _target_size(k, h0, cu):
    return int(math.ceil(cu * math.sqrt(k * h0)))


def graded_budgets(h, h0):
    etas = []
    eta = h0
    while eta < h:
        etas.append(eta)
        eta *= 2
    etas.append(h)
    return etas


def extract(g: Graph, h, h0, mode, engine, b=None) -> ExtractOutcome:
    """Three-way outcome: a negative cycle, a neutralizing step, or a remote set.

    Betweenness reduction runs first; then negative vertices are added in
    increasing order of their own h-hop reach while the union keeps every
    requested reach bound.
    """
    cfg = engine.cfg
    n = g.n
    k = len(g.neg_vertices)
    b = h if b is None else b
    if k == 0:
        return ExtractOutcome("neutralized", np.zeros(n), 0)
    target = _target_size(k, h0, cfg.cu)
    if target >= k:
        res = johnson_neutralize(g, tau=cfg.tau)
        if is_cycle(res):
            return ExtractOutcome("cycle", cycle=res)
        return ExtractOutcome("neutralized", res, k)

    def neutralizer(aux):
        return engine.neutralize(aux, parent_k=k)

    try:
        phi1 = betweenness_reduce(g, b, h, engine.rng, neutralizer, cfg.cb)
    except CycleFound as exc:
        return ExtractOutcome("cycle", cycle=exc.cycle)
    g1 = reweight(g, phi1)
    still = sorted(g1.neg_vertices)
    done = k - len(still)
    if done >= target or not still:
        return ExtractOutcome("neutralized", phi1, done)

    sizes = [negative_reach(g1, [u], h).size for u in still]
    order = [u for _, u in sorted(zip(sizes, still))]
    if mode == "graded":
        bounds = {eta: n * eta / h for eta in graded_budgets(h, h0)}
    else:
        bounds = {h: n / b}

    def certify(U):
        certs = {}
        for eta, bound in bounds.items():
            c = negative_reach(g1, U, eta)
            if c.size > bound:
                return None
            certs[eta] = c
        return certs

    U: List[int] = []
    certs = {}
    idx, step, misses = 0, 1, 0
    while len(U) < target and idx < len(order) and misses <= 2 * target:
        batch = order[idx:idx + min(step, target - len(U))]
        trial = certify(U + batch)
        if trial is not None:
            U += batch
            certs = trial
            idx += len(batch)
            step *= 2
        elif step > 1:
            step = max(1, step // 2)
        else:
            idx += 1
            misses += 1
    if U and len(U) >= math.ceil(target / 2):
        return ExtractOutcome("remote", phi1, len(U), sorted(U), certs)
    err = ExtractionFailed(f"only {len(U)} of {target} remote vertices found")
    err.phi = phi1
    err.order = order
    raise err


def extract_or_neutralize(g: Graph, h, h0, mode, engine, b=None) -> ExtractOutcome:
    """extract, falling back to Johnson on a batch of negative vertices."""
    try:
        return extract(g, h, h0, mode, engine, b)
    except ExtractionFailed as exc:
        k = len(g.neg_vertices)
        batch = exc.order[:max(1, int(math.ceil(math.sqrt(k * h0))))]
        g1 = reweight(g, exc.phi)
        sub = restrict_hops(g1, batch)
        counters.add(johnson_fallbacks=1)
        res = johnson_neutralize(sub, tau=engine.cfg.tau)
        if is_cycle(res):
            return ExtractOutcome("cycle", cycle=res)
        return ExtractOutcome("neutralized", exc.phi + res, len(batch))
