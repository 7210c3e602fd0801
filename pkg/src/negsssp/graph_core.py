"""Graph representation, canonical preprocessing, DIMACS I/O and instance generation."""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import (
    EmptyGraph,
    InconsistentHeader,
    InfeasibleSpec,
    NegativeSelfLoop,
    ParseError,
)


@dataclass(frozen=True)
class GraphStats:
    mu: float
    k: int


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class Graph:
    """Immutable directed multigraph on vertices 0..n-1 with real edge lengths.

    `hops` optionally pins the set of edges counted as hops by the hop
    dynamic program; by default those are the currently negative edges.
    """

    __slots__ = ("n", "tail", "head", "length", "_hops", "_cache")

    def __init__(self, n, tail, head, length, hops=None):
        self.n = int(n)
        self.tail = _frozen(tail, np.int64)
        self.head = _frozen(head, np.int64)
        self.length = _frozen(length, np.float64)
        if not (self.tail.shape == self.head.shape == self.length.shape):
            raise ValueError("tail, head and length must have equal length")
        if self.tail.size:
            lo = min(self.tail.min(), self.head.min())
            hi = max(self.tail.max(), self.head.max())
            if lo < 0 or hi >= self.n:
                raise ValueError("edge endpoint out of range")
            if not np.all(np.isfinite(self.length)):
                raise ValueError("edge lengths must be finite")
            loops = np.flatnonzero((self.tail == self.head) & (self.length < 0))
            if loops.size:
                e = int(loops[0])
                raise NegativeSelfLoop(int(self.tail[e]), float(self.length[e]))
        self._hops = None if hops is None else _frozen(hops, np.bool_)
        if self._hops is not None and self._hops.shape != self.tail.shape:
            raise ValueError("hop mask must cover every edge")
        self._cache = {}

    @classmethod
    def from_edges(cls, n, edges, hops=None):
        if len(edges) == 0:
            return cls(n, [], [], [], hops)
        t, h, w = zip(*edges)
        return cls(n, t, h, w, hops)

    @property
    def m(self):
        return int(self.tail.shape[0])

    @property
    def edges(self) -> List[Tuple[int, int, float]]:
        return list(zip(self.tail.tolist(), self.head.tolist(), self.length.tolist()))

    @property
    def hop_mask(self):
        if self._hops is not None:
            return self._hops
        return self._memo("neg_mask", lambda: _readonly(self.length < 0))

    @property
    def neg_vertices(self):
        return self._memo(
            "neg_vertices",
            lambda: frozenset(self.tail[self.length < 0].tolist()),
        )

    @property
    def neg_heads(self):
        return frozenset(self.head[self.length < 0].tolist())

    @property
    def stats(self):
        k = len(self.neg_vertices)
        mu = self.m + self.n * math.log(self.n) if self.n > 1 else float(self.m)
        return GraphStats(mu=mu, k=k)

    def with_hops(self, hops):
        return Graph(self.n, self.tail, self.head, self.length, hops)

    def transpose(self):
        return self._memo(
            "transpose",
            lambda: Graph(self.n, self.head, self.tail, self.length, self._hops),
        )

    def subgraph(self, keep):
        """Same vertex set, only the edges selected by the boolean mask `keep`."""
        keep = np.asarray(keep, dtype=bool)
        hops = None if self._hops is None else self._hops[keep]
        return Graph(self.n, self.tail[keep], self.head[keep], self.length[keep], hops)

    def out_degree(self):
        return np.bincount(self.tail, minlength=self.n)

    def in_degree(self):
        return np.bincount(self.head, minlength=self.n)

    def _memo(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def csr(self, which="all"):
        """Outgoing CSR arrays (indptr, head, length, edge id).

        which: "all", "plus" (non-hop edges) or "hop" (hop edges only).
        """
        def build():
            if which == "all":
                sel = np.arange(self.m)
            elif which == "plus":
                sel = np.flatnonzero(~self.hop_mask)
            else:
                sel = np.flatnonzero(self.hop_mask)
            order = sel[np.argsort(self.tail[sel], kind="stable")]
            counts = np.bincount(self.tail[order], minlength=self.n)
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            return (indptr, np.ascontiguousarray(self.head[order]),
                    np.ascontiguousarray(self.length[order]), order.astype(np.int64))
        return self._memo(("csr", which), build)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.tail, other.tail)
                and np.array_equal(self.head, other.head)
                and np.array_equal(self.length, other.length))

    __hash__ = None

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m}, k={len(self.neg_vertices)})"


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass
class VertexMap:
    """forward: original id -> canonical id; backward: canonical id -> original id or None."""

    forward: np.ndarray
    backward: List[Optional[int]]

    def lift_potential(self, phi):
        return np.asarray(phi, dtype=np.float64)[self.forward]

    def lift_cycle(self, vertices):
        """Project a closed canonical walk onto original vertices."""
        orig = [self.backward[v] for v in vertices[:-1]]
        orig = [v for v in orig if v is not None]
        out = []
        for v in orig:
            if not out or out[-1] != v:
                out.append(v)
        while len(out) > 1 and out[0] == out[-1]:
            out.pop()
        return out + out[:1]


def preprocess(g: Graph):
    """Rewrite g into canonical form.

    Self-loops are dropped, parallel edges collapse to the shortest one,
    every negative edge gets a private tail and head, and high-degree
    vertices are split into trees of zero-length edges.  Original vertices
    keep their ids.
    """
    if g.n == 0:
        raise EmptyGraph("graph has no vertices")
    tail, head, length = g.tail, g.head, g.length
    bad = np.flatnonzero((tail == head) & (length < 0))
    if bad.size:
        e = int(bad[0])
        raise NegativeSelfLoop(int(tail[e]), float(length[e]))
    keep = tail != head
    tail, head, length = tail[keep], head[keep], length[keep]
    # shortest edge per ordered pair
    order = np.lexsort((length, head, tail))
    tail, head, length = tail[order], head[order], length[order]
    if tail.size:
        first = np.ones(tail.size, dtype=bool)
        first[1:] = (tail[1:] != tail[:-1]) | (head[1:] != head[:-1])
        tail, head, length = tail[first], head[first], length[first]

    n = g.n
    tail, head, length, n = _isolate_negatives(n, tail, head, length)
    n0 = n
    d = int(math.ceil(2 * tail.size / n)) + 2 if n else 2
    while True:
        t2, h2, l2, n2 = _split_degrees(n0, tail, head, length, max(d, 2))
        bound = int(math.ceil(2 * t2.size / n2)) + 2 if t2.size else 2
        deg = 0
        if t2.size:
            deg = max(np.bincount(t2, minlength=n2).max(), np.bincount(h2, minlength=n2).max())
        if deg <= bound or d <= 2:
            break
        d = min(d - 1, bound)
    canon = Graph(n2, t2, h2, l2)
    backward: List[Optional[int]] = list(range(g.n)) + [None] * (n2 - g.n)
    vmap = VertexMap(forward=np.arange(g.n, dtype=np.int64), backward=backward)
    return canon, vmap


def _isolate_negatives(n, tail, head, length):
    neg = np.flatnonzero(length < 0)
    if neg.size == 0:
        return tail, head, length, n
    outdeg = np.bincount(tail, minlength=n)
    indeg = np.bincount(head, minlength=n)
    neg_tails = np.zeros(n, dtype=bool)
    neg_heads = np.zeros(n, dtype=bool)
    neg_tails[tail[neg]] = True
    neg_heads[head[neg]] = True
    tail = tail.copy()
    head = head.copy()
    extra_t, extra_h = [], []
    for e in neg.tolist():
        a, b = int(tail[e]), int(head[e])
        if outdeg[a] != 1 or neg_heads[a]:
            tail[e] = n
            extra_t.append(a)
            extra_h.append(n)
            n += 1
        if indeg[b] != 1 or neg_tails[b]:
            head[e] = n
            extra_t.append(n)
            extra_h.append(b)
            n += 1
    k = len(extra_t)
    tail = np.concatenate([tail, np.array(extra_t, dtype=np.int64)])
    head = np.concatenate([head, np.array(extra_h, dtype=np.int64)])
    length = np.concatenate([length, np.zeros(k)])
    return tail, head, length, n


def _split_degrees(n, tail, head, length, d):
    tail, head, n = _split_side(n, tail.copy(), head.copy(), d, out_side=True)
    length = np.concatenate([length, np.zeros(tail.size - length.size)])
    m0 = head.size
    head, tail, n = _split_side(n, head, tail, d, out_side=False)
    length = np.concatenate([length, np.zeros(tail.size - m0)])
    return tail, head, length, n


def _split_side(n, own, other, d, out_side):
    """Split vertices with more than d edges on the `own` endpoint.

    `own` holds the endpoint being bounded (tails for out-degree).  Each
    group of at most d edges moves to a fresh vertex joined to the original
    by a zero edge, repeating until the original has at most d edges.
    """
    own = list(own.tolist())
    other = list(other.tolist())
    groups = {}
    for e, v in enumerate(own):
        groups.setdefault(v, []).append(e)
    new_own, new_other = [], []
    for v, es in groups.items():
        if len(es) <= d:
            continue
        level = [("edge", e) for e in es]
        while len(level) > d:
            nxt = []
            for i in range(0, len(level), d):
                chunk = level[i:i + d]
                if len(chunk) == 1:
                    nxt.append(chunk[0])
                    continue
                c = n
                n += 1
                for kind, x in chunk:
                    if kind == "edge":
                        own[x] = c
                    else:
                        new_own[x] = c
                new_own.append(v)
                new_other.append(c)
                nxt.append(("aux", len(new_own) - 1))
            level = nxt
    own_all = np.array(own + new_own, dtype=np.int64)
    other_all = np.array(other + new_other, dtype=np.int64)
    return own_all, other_all, n


# ---------------------------------------------------------------- DIMACS

def _fmt(x):
    if float(x).is_integer() and abs(x) < 2 ** 53:
        return str(int(x))
    return repr(float(x))


def save_dimacs(g: Graph, path, comment=None):
    lines = []
    if comment:
        lines.extend(f"c {c}" for c in comment.splitlines())
    lines.append(f"p sp {g.n} {g.m}")
    for t, h, w in zip(g.tail.tolist(), g.head.tolist(), g.length.tolist()):
        lines.append(f"a {t + 1} {h + 1} {_fmt(w)}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def parse_dimacs(text):
    n = m = None
    tails, heads, lens = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] == "c":
            continue
        parts = line.split()
        if parts[0] == "p":
            if n is not None:
                raise ParseError(lineno, "duplicate problem line")
            if len(parts) != 4 or parts[1] != "sp":
                raise ParseError(lineno, "expected 'p sp <n> <m>'")
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(lineno, "non-integer counts") from None
            if n < 0 or m < 0:
                raise ParseError(lineno, "negative counts")
        elif parts[0] == "a":
            if n is None:
                raise ParseError(lineno, "arc before problem line")
            if len(parts) != 4:
                raise ParseError(lineno, "expected 'a <tail> <head> <length>'")
            try:
                t, h = int(parts[1]), int(parts[2])
                w = float(parts[3])
            except ValueError:
                raise ParseError(lineno, "malformed arc") from None
            if not (1 <= t <= n and 1 <= h <= n):
                raise ParseError(lineno, f"vertex out of range 1..{n}")
            if not math.isfinite(w):
                raise ParseError(lineno, "length must be finite")
            tails.append(t - 1)
            heads.append(h - 1)
            lens.append(w)
        else:
            raise ParseError(lineno, f"unknown line type {parts[0]!r}")
    if n is None:
        raise ParseError(0, "missing problem line")
    if len(tails) != m:
        raise InconsistentHeader(f"header declares {m} arcs, found {len(tails)}")
    return Graph(n, tails, heads, lens)


def load_dimacs(path):
    with open(path) as f:
        return parse_dimacs(f.read())


# ---------------------------------------------------------------- generation

@dataclass(frozen=True)
class GenSpec:
    n: int
    m: int
    neg: int
    pos_range: Tuple[int, int] = (0, 20)
    neg_range: Tuple[int, int] = (-8, -1)
    planted_cycle: bool = False
    seed: int = 0
    # lengths consistent with a hidden potential, so no accidental cycles
    feasible: bool = True


def generate(spec: GenSpec) -> Graph:
    n, m, neg = spec.n, spec.m, spec.neg
    plo, phi_ = spec.pos_range
    nlo, nhi = spec.neg_range
    if n < 0 or m < 0 or neg < 0:
        raise InfeasibleSpec("counts must be nonnegative")
    if neg > m:
        raise InfeasibleSpec(f"{neg} negative edges requested but m = {m}")
    if m > 0 and n < 2:
        raise InfeasibleSpec("edges need at least two vertices")
    if plo < 0 or plo > phi_:
        raise InfeasibleSpec("nonnegative range must satisfy 0 <= lo <= hi")
    if neg and not (nlo <= nhi < 0):
        raise InfeasibleSpec("negative range must satisfy lo <= hi < 0")
    rng = np.random.default_rng(spec.seed)
    edges = []
    n_pos, n_neg = m - neg, neg
    if spec.planted_cycle:
        size = min(n, 3 + int(rng.integers(0, 3)))
        if n_neg < 1 or size > m or size < 2:
            raise InfeasibleSpec("planted cycle needs a negative edge and at least two vertices")
        if size - 1 > n_pos:
            size = n_pos + 1
            if size < 2:
                raise InfeasibleSpec("planted cycle needs a nonnegative edge")
        cyc = rng.choice(n, size=size, replace=False).tolist()
        pos_len = [plo] * (size - 1)
        total = sum(pos_len)
        if -total - 1 < nlo:
            raise InfeasibleSpec("negative range too narrow to close a negative cycle")
        w_neg = int(rng.integers(nlo, min(nhi, -total - 1) + 1))
        for i in range(size - 1):
            edges.append((cyc[i], cyc[i + 1], pos_len[i]))
        edges.append((cyc[-1], cyc[0], w_neg))
        n_pos -= size - 1
        n_neg -= 1
    if spec.feasible:
        spread = max(phi_, -nlo) if neg else phi_
        pot = rng.integers(0, spread + 1, size=max(n, 1))
        order = np.argsort(pot, kind="stable")
    for _ in range(n_neg):
        w = int(rng.integers(nlo, nhi + 1))
        if spec.feasible:
            u, v = _pair_with_gap(rng, pot, order, -w)
            if u is None:
                raise InfeasibleSpec("hidden potential cannot host a negative edge")
        else:
            u, v = _random_pair(rng, n)
        edges.append((u, v, w))
    for _ in range(n_pos):
        u, v = _random_pair(rng, n)
        lo = plo
        if spec.feasible:
            lo = max(plo, int(pot[v] - pot[u]))
        w = int(rng.integers(lo, max(lo, phi_) + 1))
        edges.append((u, v, w))
    perm = rng.permutation(len(edges))
    edges = [edges[i] for i in perm]
    return Graph.from_edges(n, edges)


def _random_pair(rng, n):
    u = int(rng.integers(0, n))
    v = int(rng.integers(0, n - 1))
    if v >= u:
        v += 1
    return u, v


def _pair_with_gap(rng, pot, order, gap):
    """Pick (u, v) with pot[u] - pot[v] >= gap, uniformly over valid v first."""
    vals = pot[order]
    # the low endpoint is the head, so l + pot[tail] - pot[head] >= 0
    limit = np.searchsorted(vals, vals[-1] - gap, side="right")
    if limit == 0:
        return None, None
    ui = int(rng.integers(0, limit))
    u = int(order[ui])
    start = np.searchsorted(vals, pot[u] + gap, side="left")
    vi = int(rng.integers(start, len(vals)))
    return int(order[vi]), u


# ---------------------------------------------------------------- derived graphs

def restrict_hops(g: Graph, U) -> Graph:
    """G_U: drop every negative edge whose tail is not in U."""
    inU = np.zeros(g.n, dtype=bool)
    inU[np.asarray(list(U), dtype=np.int64)] = True
    keep = (g.length >= 0) | inU[g.tail]
    return g.subgraph(keep)


def induced(g: Graph, vertices):
    """Subgraph on `vertices` with local ids; returns (graph, global ids)."""
    ids = np.unique(np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices,
                               dtype=np.int64))
    pos = np.full(g.n, -1, dtype=np.int64)
    pos[ids] = np.arange(ids.size)
    keep = (pos[g.tail] >= 0) & (pos[g.head] >= 0)
    hops = None if g._hops is None else g._hops[keep]
    sub = Graph(ids.size, pos[g.tail[keep]], pos[g.head[keep]], g.length[keep], hops)
    return sub, ids


class ArcBuffer:
    """Collects tagged arc batches for an auxiliary graph."""

    def __init__(self):
        self._t, self._h, self._w, self._kind = [], [], [], []

    def add(self, tails, heads, lengths, kind):
        tails = np.asarray(tails, dtype=np.int64)
        heads = np.asarray(heads, dtype=np.int64)
        lengths = np.broadcast_to(np.asarray(lengths, dtype=np.float64), tails.shape)
        self._t.append(tails)
        self._h.append(heads)
        self._w.append(np.array(lengths))
        self._kind.append(np.full(tails.shape, kind, dtype=np.int8))

    def build(self, n, hop_kind):
        if self._t:
            t = np.concatenate(self._t)
            h = np.concatenate(self._h)
            w = np.concatenate(self._w)
            kind = np.concatenate(self._kind)
        else:
            t = h = np.zeros(0, dtype=np.int64)
            w = np.zeros(0)
            kind = np.zeros(0, dtype=np.int8)
        return Graph(n, t, h, w, kind == hop_kind), kind
