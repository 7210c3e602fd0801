import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import small_feasible
from negsssp.base_solvers import (
    INF,
    bellman_ford_oracle,
    compose,
    cycle_length,
    dijkstra,
    distances_via_potential,
    hop_sssp,
    is_cycle,
    johnson_neutralize,
    neutralizes,
    proper_hop_distances,
    proper_hop_oracle,
    reweight,
    validate_potential,
)
from negsssp.errors import NegativeEdgeEncountered, TooLarge
from negsssp.graph_core import GenSpec, Graph, generate, preprocess
from oracles import hop_distance_by_layers, proper_hop_by_permutations

G1 = Graph.from_edges(3, [(0, 1, 4), (1, 2, -2)])


def _random_graph(seed, n, m, neg, planted=False):
    return generate(GenSpec(n, m, neg, planted_cycle=planted, seed=seed))


# ---------------------------------------------------------------- dijkstra

def test_dijkstra_path():
    g = Graph.from_edges(3, [(0, 1, 4), (1, 2, 1)])
    res = dijkstra(g, [0])
    assert res.dist.tolist() == [0, 4, 5]
    assert res.path_to(2) == [0, 1]


def test_dijkstra_all_sources_is_zero():
    g = _random_graph(1, 30, 100, 0)
    assert np.all(dijkstra(g, range(30)).dist == 0)


def test_dijkstra_rejects_negative_edges():
    with pytest.raises(NegativeEdgeEncountered):
        dijkstra(G1, [0])


def test_dijkstra_matches_oracle():
    g = _random_graph(2, 200, 1200, 0)
    assert np.array_equal(dijkstra(g, [0]).dist, bellman_ford_oracle(g, 0).dist)


def test_dijkstra_ties_are_deterministic():
    g = Graph.from_edges(4, [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)])
    assert dijkstra(g, [0]).parent.tolist() == dijkstra(g, [0]).parent.tolist()
    assert dijkstra(g, [0]).path_to(3) == [0, 2]


# ---------------------------------------------------------------- hop_sssp

def test_hop_sssp_one_negative_edge():
    g = Graph.from_edges(3, [(0, 1, 5), (1, 2, -3)])
    assert hop_sssp(g, [0], 0).dist[2] == INF
    assert hop_sssp(g, [0], 1).dist[2] == 2


def test_hop_zero_is_dijkstra_on_nonnegative_part():
    g = _random_graph(3, 60, 240, 10)
    plus = g.subgraph(g.length >= 0)
    assert np.array_equal(hop_sssp(g, [0], 0).dist, dijkstra(plus, [0]).dist)


def test_hop_sssp_at_k_matches_oracle():
    g = _random_graph(13, 60, 300, 12)
    k = int(np.count_nonzero(g.length < 0))
    assert np.array_equal(hop_sssp(g, [0], k).dist, bellman_ford_oracle(g, 0).dist)


def test_hop_sssp_reports_cycles():
    g = _random_graph(4, 40, 160, 8, planted=True)
    res = hop_sssp(g, range(40), None)
    assert is_cycle(res)
    assert cycle_length(g, res.vertices) == res.length < 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 6))
def test_hop_layers_match_layered_oracle_and_are_monotone(seed, h):
    g = small_feasible(seed, 6, 15, 6)
    table = hop_sssp(g, [0], h, keep_layers=True)
    for i in range(h + 1):
        assert np.array_equal(table.layer(i), hop_distance_by_layers(g, [0], i))
        if i:
            assert np.all(table.layer(i) <= table.layer(i - 1))


def test_hop_sssp_walks_realize_values():
    g = small_feasible(5, 10, 15, 5)
    table = hop_sssp(g, [0], 3, keep_layers=True)
    for v in np.flatnonzero(np.isfinite(table.dist)).tolist():
        walk = table.walk_to(v)
        assert sum(g.length[e] for e in walk) == table.dist[v]
        assert sum(bool(g.hop_mask[e]) for e in walk) <= 3


# ---------------------------------------------------------------- bellman-ford

def test_bellman_ford_two_cycle():
    g = Graph.from_edges(2, [(0, 1, -3), (1, 0, 1)])
    cyc = bellman_ford_oracle(g, 0).cycle
    assert sorted(cyc.vertices[:-1]) == [0, 1] and cyc.length == -2


def test_bellman_ford_g1():
    assert bellman_ford_oracle(G1, 0).dist.tolist() == [0, 4, 2]


def test_bellman_ford_generated_seed_13():
    g = _random_graph(13, 60, 240, 10)
    k = int(np.count_nonzero(g.length < 0))
    assert np.array_equal(bellman_ford_oracle(g, 0).dist, hop_sssp(g, [0], k).dist)


# ---------------------------------------------------------------- proper hops

def test_proper_hop_zero_is_dijkstra():
    g = small_feasible(7, 8, 12, 5)
    plus = g.subgraph(~g.hop_mask)
    assert proper_hop_oracle(g, 0, 3, 0) == dijkstra(plus, [0]).dist[3]


def test_proper_hop_needs_distinct_negatives():
    g = Graph.from_edges(3, [(0, 1, -1), (1, 0, 3), (1, 2, 0)])
    assert proper_hop_oracle(g, 0, 2, 2) == INF


def test_proper_hop_matches_permutations():
    checked = 0
    for seed in range(12):
        g = small_feasible(seed, 6, 10, 6)
        for s in range(0, g.n, 3):
            table = proper_hop_distances(g, s)
            for eta in range(1, min(4, table.shape[0])):
                for t in range(g.n):
                    assert table[eta][t] == proper_hop_by_permutations(g, s, t, eta)
                    checked += 1
    assert checked > 500


def test_proper_hop_guard():
    edges = [(2 * i, 2 * i + 1, -1) for i in range(15)]
    with pytest.raises(TooLarge):
        proper_hop_oracle(Graph.from_edges(30, edges), 0, 1, 1)


# ---------------------------------------------------------------- potentials

def test_zero_potential_is_identity():
    assert reweight(G1, np.zeros(3)) == G1
    assert validate_potential(G1, np.zeros(3))


def test_g1_johnson_potential():
    phi = johnson_neutralize(G1)
    assert phi.tolist() == [0, 0, -2]
    gr = reweight(G1, phi)
    assert sorted(gr.edges) == [(0, 1, 4.0), (1, 2, 0.0)]
    assert neutralizes(G1, phi)


def test_johnson_on_nonnegative_graph_is_zero():
    g = _random_graph(8, 40, 150, 0)
    assert np.all(johnson_neutralize(g) == 0)


def test_reweight_round_trip():
    g = _random_graph(9, 50, 200, 10)
    phi = np.random.default_rng(0).integers(-50, 50, g.n).astype(float)
    assert reweight(reweight(g, phi), -phi) == g


def test_validate_rejects_bad_potentials():
    assert not validate_potential(G1, [0, 10, 0])
    assert not validate_potential(G1, [0, np.inf, 0])
    assert not validate_potential(G1, [0, 0])


def test_validity_follows_pinned_negative_set():
    g = Graph.from_edges(2, [(0, 1, 0), (1, 0, 3)], hops=[True, False])
    assert validate_potential(g, [-1, 0])
    assert not validate_potential(g.with_hops(None), [-1, 0])


def test_johnson_random_instance():
    g = _random_graph(10, 80, 400, 8)
    phi = johnson_neutralize(g)
    assert validate_potential(g, phi) and neutralizes(g, phi)
    gr = reweight(g, phi)
    for s in (0, 7, 33):
        d, dr = bellman_ford_oracle(g, s).dist, bellman_ford_oracle(gr, s).dist
        fin = np.isfinite(d)
        assert np.array_equal(dr[fin], (d + phi[s] - phi)[fin])


def test_reweighting_identity_all_pairs():
    g, _ = preprocess(_random_graph(11, 40, 160, 8))
    phi = johnson_neutralize(g)
    gr = reweight(g, phi)
    for s in range(g.n):
        d = bellman_ford_oracle(g, s).dist
        fin = np.isfinite(d)
        assert np.array_equal(bellman_ford_oracle(gr, s).dist[fin], (phi[s] + d - phi)[fin])


def test_compose_valid_potentials():
    for seed in range(20):
        g = _random_graph(seed, 40, 160, 8)
        phi1 = johnson_neutralize(g.subgraph(g.length >= -3))
        assert validate_potential(g, phi1)
        g1 = reweight(g, phi1)
        phi2 = johnson_neutralize(g1)
        assert validate_potential(g1, phi2)
        both = compose(phi1, phi2)
        assert validate_potential(g, both) and neutralizes(g, both)


def test_distances_via_potential_matches_oracle():
    g = _random_graph(12, 100, 500, 20)
    phi = johnson_neutralize(g)
    assert np.array_equal(distances_via_potential(g, phi, 0).dist, bellman_ford_oracle(g, 0).dist)


def test_unreachable_vertices_get_finite_potential():
    g = Graph.from_edges(3, [(0, 1, -2)])
    phi = johnson_neutralize(g)
    assert np.all(np.isfinite(phi)) and validate_potential(g, phi)
