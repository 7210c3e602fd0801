import math

import numpy as np
import pytest

from instances import oracle_instance, small_feasible
from negsssp.base_solvers import (
    bellman_ford_oracle,
    dijkstra,
    johnson_neutralize,
    neutralizes,
    reweight,
    validate_potential,
)
from negsssp.errors import CycleFound, ReachTooLarge
from negsssp.graph_core import GenSpec, generate, preprocess, restrict_hops
from negsssp.layered_sparsification import (
    EXIT,
    RESET,
    build_sparsifier,
    choose_h_recursive,
    reset_sample_size,
)
from negsssp.solver import SolverConfig, neutralize, shortest_paths


def _distances_in(H):
    g = H.with_hops(None)
    phi = johnson_neutralize(g)
    gr = reweight(g, phi)
    return lambda s: dijkstra(gr, [s]).dist - phi[s] + phi


def _pick_U(g, seed, frac=2 / 3):
    negs = sorted(g.neg_vertices)
    rng = np.random.default_rng(seed)
    return sorted(rng.choice(negs, size=max(1, int(len(negs) * frac)), replace=False).tolist())


# ---------------------------------------------------------------- choose_h

def test_choose_h():
    assert choose_h_recursive(1) == 1
    assert choose_h_recursive(10 ** 6, "classic") == 8
    assert choose_h_recursive(10 ** 6, "improved") == 11


def test_reset_sample_size():
    assert reset_sample_size(0, 100, 4, 4.0) == 0
    assert reset_sample_size(10, 100, 4, 4.0) == 10
    assert reset_sample_size(100, 100, 64, 1.0) == math.ceil(100 * math.log(100) / 64)


# ---------------------------------------------------------------- build_sparsifier

def test_empty_U_gives_nonnegative_sparsifier():
    g = small_feasible(1, 15, 25, 8)
    sp = build_sparsifier(g, [], 3)
    assert not np.any(reweight(sp.H, sp.phi).length < 0)
    plus = g.subgraph(g.length >= 0)
    dist = _distances_in(sp.H)
    for u in range(g.n):
        assert np.array_equal(dist(int(sp.pi0[u]))[sp.pi1], dijkstra(plus, [u]).dist)


def test_example_instance_all_pairs():
    g, _ = preprocess(generate(GenSpec(40, 120, 8, seed=3)))
    U = sorted(g.neg_vertices)
    g_u = restrict_hops(g, U)
    for attempt in range(4):
        sp = build_sparsifier(g, U, 4, rng=np.random.default_rng([3, attempt]))
        dist = _distances_in(sp.H)
        if all(np.array_equal(dist(int(sp.pi0[u]))[sp.pi1], bellman_ford_oracle(g_u, u).dist)
               for u in range(g.n)):
            break
    else:
        pytest.fail("sparsifier never preserved distances")
    assert np.count_nonzero(reweight(sp.H, sp.phi).length < 0) <= math.ceil(4 * len(U) * math.log(g.n) / 4)


@pytest.mark.parametrize("seed", range(10))
def test_sparsifier_invariants(seed):
    g = small_feasible(seed, 10, 25, 12)
    U = _pick_U(g, seed)
    h = (2, 3, 5)[seed % 3]
    sp = build_sparsifier(g, U, h, rng=np.random.default_rng(seed), c=1.0)
    H = sp.H
    assert validate_potential(H, sp.phi)
    w = reweight(H, sp.phi).length
    negs = np.flatnonzero(w < 0)
    # negative arcs are reset arcs, and reset arcs are exactly U0
    assert np.all(sp.kind[negs] == RESET)
    resets = np.flatnonzero(sp.kind == RESET)
    assert sorted(sp.orig_of[H.tail[resets]].tolist()) == sp.U0.tolist()
    assert np.all(w[sp.kind == EXIT] >= 0)
    assert len(set(sp.pi0.tolist())) == g.n == len(set(sp.pi1.tolist()))
    assert np.all(sp.layer_of[sp.pi0] == 0) and np.all(sp.layer_of[sp.pi1] == h)
    n, m = g.n, g.m
    assert H.n <= (2 + h) * n and H.m <= (2 + h) * m + h * n + n


@pytest.mark.parametrize("seed", range(10))
def test_soundness_holds_even_for_bad_samples(seed):
    g = small_feasible(seed, 10, 25, 12)
    U = _pick_U(g, seed)
    g_u = restrict_hops(g, U)
    # a tiny constant makes sampling failures likely; soundness must still hold
    sp = build_sparsifier(g, U, 4, rng=np.random.default_rng(seed), c=0.05)
    dist = _distances_in(sp.H)
    for u in range(g.n):
        assert np.all(dist(int(sp.pi0[u]))[sp.pi1] >= bellman_ford_oracle(g_u, u).dist)


def test_degenerate_sparsifier_is_the_graph():
    g = small_feasible(2, 20, 25, 8)
    U = sorted(g.neg_vertices)
    sp = build_sparsifier(g, U, 2, c0=10.0)
    assert sp.degenerate and sp.H.m == restrict_hops(g, U).m


def test_reach_bound_enforced():
    g = small_feasible(6, 20, 25, 10)
    U = sorted(g.neg_vertices)
    with pytest.raises(ReachTooLarge):
        build_sparsifier(g, U, 4, r=g.n)


def test_cycle_while_computing_potential():
    g, _ = preprocess(generate(GenSpec(20, 60, 5, planted_cycle=True, seed=1)))
    U = sorted(g.neg_vertices)
    # the hop program only certifies cycles once the budget reaches |U|
    with pytest.raises(CycleFound):
        build_sparsifier(g, U, len(U))


# ---------------------------------------------------------------- solve_recursive

def test_recursive_without_negative_edges():
    g = generate(GenSpec(30, 90, 0, seed=0))
    assert np.all(neutralize(g, "recursive") == 0)


def test_recursive_planted_cycle():
    g = generate(GenSpec(60, 240, 10, planted_cycle=True, seed=4))
    res = neutralize(g, "recursive", SolverConfig(algo="recursive", cb=0.1))
    assert res.length < 0


@pytest.mark.parametrize("variant", ["recursive", "recursive-improved"])
def test_recursive_oracle_equivalence(variant):
    for seed in range(1, 60):
        g = oracle_instance(seed)
        bf = bellman_ford_oracle(g, 0)
        for cb in (4.0, 0.1):
            out = shortest_paths(g, 0, variant, SolverConfig(algo=variant, seed=seed, cb=cb))
            assert (out.cycle is None) == (bf.cycle is None)
            if bf.cycle is None:
                assert np.array_equal(out.dist, bf.dist)


def test_recursive_returns_neutralizing_potential():
    for seed in range(1, 30):
        g = generate(GenSpec(80, 320, 15, seed=seed))
        phi = neutralize(g, "recursive", SolverConfig(algo="recursive", seed=seed, cb=0.1))
        assert validate_potential(g, phi) and neutralizes(g, phi)
