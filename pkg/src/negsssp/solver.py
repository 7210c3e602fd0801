"""Solver configuration, the recursive neutralization entry point and the
top-level shortest-path API."""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import counters
from .base_solvers import (
    INF,
    NegativeCycle,
    bellman_ford_oracle,
    cycle_length,
    distances_via_potential,
    is_cycle,
    negative_cycle_in_walk,
    johnson_neutralize,
    neutralizes,
    potential_from_distances,
    validate_potential,
)
from .graph_core import Graph, induced, preprocess

ALGORITHMS = (
    "bellman-ford",
    "johnson",
    "recursive",
    "recursive-improved",
    "dense",
    "sparse",
    "twice-recursive",
    "twice-recursive-sparse",
    "auto",
)

# which solver handles the recursive calls made by each algorithm
_RECURSE_AS = {
    "recursive": "recursive",
    "recursive-improved": "recursive-improved",
    "dense": "dense",
    "sparse": "dense",
    "twice-recursive": "auto",
    "twice-recursive-sparse": "auto",
    "auto": "auto",
}


@dataclass(frozen=True)
class SolverConfig:
    algo: str = "auto"
    seed: int = 0
    retries: int = 3
    base_k: int = 2
    sample_const: float = 4.0
    cb: float = 4.0
    cu: float = 1.0
    extract_mode: Optional[str] = None
    # the layered sparsifier collapses to the identity when h < c0 * ln n
    degenerate_const: float = 0.0
    # forces the hop budget of the sparse wrappers when set
    sparse_h: Optional[int] = None
    max_depth: int = 40
    tau: float = 0.0

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class Engine:
    """Carries configuration, the shared random stream and recursion depth."""

    cfg: SolverConfig
    rng: np.random.Generator = field(default=None)
    depth: int = 0
    algo: str = "auto"

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.cfg.seed)

    def child(self, algo=None):
        return Engine(self.cfg, self.rng, self.depth + 1, algo or self.algo)

    def sample(self, items, size):
        items = np.asarray(sorted(items), dtype=np.int64)
        size = min(int(size), items.size)
        if size >= items.size:
            return items
        return np.sort(self.rng.choice(items, size=size, replace=False))

    def neutralize(self, g: Graph, parent_k=None, algo=None):
        """Potential neutralizing every edge of g, or a negative cycle.

        Recursive calls fall back to the exact hop DP when they would not
        shrink the negative edge count or the depth limit is reached.
        """
        algo = algo or _RECURSE_AS.get(self.algo, self.algo)
        k = int(np.count_nonzero(g.length < 0))
        if k == 0:
            return np.zeros(g.n)
        if algo == "bellman-ford":
            res = bellman_ford_oracle(g, range(g.n))
            return res.cycle if res.cycle is not None else potential_from_distances(res.dist)
        shrinks = parent_k is None or k < parent_k
        if (algo == "johnson" or k <= self.cfg.base_k or not shrinks
                or self.depth >= self.cfg.max_depth):
            return johnson_neutralize(g, tau=self.cfg.tau)
        canon, vmap = preprocess(g)
        sub = self.child(algo)
        counters.note_depth(sub.depth)
        res = _dispatch(algo)(canon, sub)
        if is_cycle(res):
            verts = vmap.lift_cycle(res.vertices)
            total = cycle_length(g, verts)
            if total is None or total >= 0:
                return witness_cycle(g)
            return NegativeCycle(verts, total)
        phi = vmap.lift_potential(res)
        assert validate_potential(g, phi, self.cfg.tau) and neutralizes(g, phi, tau=self.cfg.tau), \
            "solver returned a potential that does not neutralize the graph"
        return phi


def witness_cycle(g: Graph) -> NegativeCycle:
    """A negative cycle of g, known to exist."""
    res = johnson_neutralize(g)
    if not is_cycle(res):
        raise RuntimeError("expected a negative cycle but the graph is neutralizable")
    return res


def lift_aux_cycle(g: Graph, cycle: NegativeCycle, orig_of):
    """Map a cycle of an auxiliary graph whose arcs copy edges of g.

    Falls back to an exact search in g when the projection is not a
    negative closed walk.
    """
    verts = [int(orig_of[v]) for v in cycle.vertices[:-1]]
    out = []
    for v in verts:
        if v >= 0 and (not out or out[-1] != v):
            out.append(v)
    while len(out) > 1 and out[0] == out[-1]:
        out.pop()
    if out:
        out.append(out[0])
        total = cycle_length(g, out)
        if total is not None and total < 0:
            return simple_cycle(g, out)
    return witness_cycle(g)


def simple_cycle(g: Graph, closed):
    """Most negative simple cycle inside a negative closed vertex walk."""
    best = {}
    for e, (t, h, w) in enumerate(zip(g.tail.tolist(), g.head.tolist(), g.length.tolist())):
        if (t, h) not in best or w < g.length[best[(t, h)]]:
            best[(t, h)] = e
    edges = [best[(a, b)] for a, b in zip(closed[:-1], closed[1:])]
    return negative_cycle_in_walk(g, edges)


def _dispatch(algo):
    from . import bootstrap, layered_sparsification

    table = {
        "recursive": lambda g, e: layered_sparsification.solve_recursive(g, e, "classic"),
        "recursive-improved": lambda g, e: layered_sparsification.solve_recursive(g, e, "improved"),
        "dense": bootstrap.solve_dense_auto,
        "sparse": bootstrap.solve_sparse,
        "twice-recursive": bootstrap.solve_twice_recursive,
        "twice-recursive-sparse": bootstrap.solve_twice_recursive_sparse,
        "auto": bootstrap.solve_twice_recursive_auto,
    }
    return table[algo]


def neutralize(g: Graph, algo="auto", cfg: Optional[SolverConfig] = None):
    """Top-level neutralization of an arbitrary graph."""
    cfg = cfg or SolverConfig(algo=algo)
    eng = Engine(cfg, algo=algo)
    return eng.neutralize(g, parent_k=None, algo=algo)


@dataclass
class SolveOutcome:
    dist: Optional[np.ndarray]
    cycle: Optional[NegativeCycle]
    counters: counters.Counters
    potential: Optional[np.ndarray] = None

    @property
    def verdict(self):
        return "cycle" if self.cycle is not None else "distances"


def reachable_from(g: Graph, source):
    seen = np.zeros(g.n, dtype=bool)
    indptr, nbr, _, _ = g.csr("all")
    stack = [int(source)]
    seen[source] = True
    while stack:
        v = stack.pop()
        for u in nbr[indptr[v]:indptr[v + 1]].tolist():
            if not seen[u]:
                seen[u] = True
                stack.append(u)
    return np.flatnonzero(seen)


def shortest_paths(g: Graph, source, algo="auto", cfg: Optional[SolverConfig] = None):
    """Distances from source, or a negative cycle reachable from it."""
    cfg = cfg or SolverConfig(algo=algo)
    with counters.counting() as c:
        if algo == "bellman-ford":
            res = bellman_ford_oracle(g, source)
            return SolveOutcome(res.dist, res.cycle, c)
        reach = reachable_from(g, source)
        sub, ids = induced(g, reach)
        local_source = int(np.searchsorted(ids, source))
        res = neutralize(sub, algo, cfg)
        if is_cycle(res):
            verts = [int(ids[v]) for v in res.vertices]
            return SolveOutcome(None, NegativeCycle(verts, res.length), c)
        d = distances_via_potential(sub, res, local_source, cfg.tau).dist
        dist = np.full(g.n, INF)
        dist[ids] = d
        return SolveOutcome(dist, None, c, res)


def ceil_log2(x):
    return max(0, math.ceil(math.log2(x))) if x > 1 else 0


def round_half_up(x):
    return int(math.floor(x + 0.5))
