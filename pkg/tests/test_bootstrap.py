import math

import numpy as np
import pytest

from instances import oracle_instance, small_feasible
from negsssp import bootstrap as B
from negsssp.base_solvers import (
    bellman_ford_oracle,
    dijkstra,
    hop_sssp,
    johnson_neutralize,
    neutralizes,
    reweight,
    validate_potential,
)
from negsssp.errors import MissingEstimates, NotNeutralized
from negsssp.graph_core import GenSpec, generate, restrict_hops
from negsssp.layered_sparsification import RESET
from negsssp.solver import SolverConfig, neutralize, shortest_paths


def _levels(seed, cfg, n_lo=8, n_hi=18):
    g = small_feasible(seed, n_lo, n_hi, 10)
    negs = sorted(g.neg_vertices)
    rng = np.random.default_rng(seed)
    U = sorted(rng.choice(negs, size=max(1, (2 * len(negs)) // 3), replace=False).tolist())
    return B.Levels(restrict_hops(g, U), U, cfg), rng


def _seeds(lv, rng):
    phi = johnson_neutralize(lv.sub[lv.i1])
    glob = np.full(lv.g.n, np.nan)
    glob[lv.ids[lv.i1]] = phi
    return {j: B.seed_estimates_via_neutralized_subgraph(lv, j, glob[lv.ids[j]], rng)
            for j in range(lv.i0 + 1, lv.i1 + 1)}


def _check_sandwich(lv, red, max_eta=8):
    Gi, ids = lv.sub[red.level], lv.ids[red.level]
    Hr = red.reweighted
    for a in range(Gi.n):
        exact = hop_sssp(Gi, [a], None, trace=False).dist
        tg = hop_sssp(Gi, [a], max_eta, keep_layers=True, trace=False)
        th = hop_sssp(Hr, [int(red.embed[ids[a]])], math.ceil(max_eta / red.factor),
                      keep_layers=True, trace=False)
        for eta in range(1, max_eta + 1):
            dh = th.layer(math.ceil(eta / red.factor))[red.embed[ids]]
            assert np.all(exact <= dh) and np.all(dh <= tg.layer(eta))


# ---------------------------------------------------------------- parameters

def test_dense_parameters_at_one_million():
    cfg = B.BootstrapConfig.for_k(10 ** 6)
    assert (cfg.h, cfg.h0) == (48, 4)


def test_nearest_power_of_two():
    assert [B.nearest_power_of_two(x) for x in (1, 2.9, 3, 3.1, 5.48, 6, 6.1)] == [1, 2, 2, 4, 4, 4, 8]


def test_config_invariants():
    cfg = B.BootstrapConfig(8, 2)
    assert (cfg.i0, cfg.i1, cfg.L) == (1, 2, 4)
    with pytest.raises(AssertionError):
        B.BootstrapConfig(8, 3)
    with pytest.raises(AssertionError):
        B.BootstrapConfig(4, 4)
    for k in range(1, 3000, 37):
        cfg = B.BootstrapConfig.for_k(k)
        assert cfg.h >= cfg.h0 >= 2 and cfg.i1 < cfg.L


def test_sparse_exponents():
    r17 = 17 ** 0.5
    assert round(B.SPARSE_NUM_EXPONENT, 12) == round(33 - 7 * r17, 12)
    assert round(B.SPARSE_DEN_EXPONENT, 12) == round(37 - 7 * r17, 12)
    assert round(B.SPARSE_NUM_EXPONENT, 6) == 4.138261
    assert B.sparse_hop_budget(50, 400) == 1


def test_twice_parameters():
    for k in (2, 10, 100, 10 ** 4, 10 ** 6):
        h, b = B.twice_parameters(k)
        assert h >= 2 and 1 <= b <= h
    assert B.twice_parameters(10 ** 6)[0] == round(10 ** (6 * B.TWICE_H_EXPONENT))


# ---------------------------------------------------------------- reducers

def test_empty_U_reducer_is_the_base_copy():
    g = generate(GenSpec(20, 60, 0, seed=0))
    cfg = B.BootstrapConfig(8, 2)
    lv = B.Levels(g, [], cfg)
    red = B.build_reducer(lv, lv.i1 + 1, _seeds(lv, np.random.default_rng(0)))
    assert not np.any(red.reweighted.length < 0)
    assert red.H.n == lv.sub[lv.i1 + 1].n


def test_missing_estimates():
    lv, _ = _levels(0, B.BootstrapConfig(16, 4))
    with pytest.raises(MissingEstimates):
        B.build_reducer(lv, lv.i1 + 1, {})


@pytest.mark.parametrize("seed", range(6))
def test_reducer_arcs_and_sandwich(seed):
    lv, rng = _levels(seed, B.BootstrapConfig(8, 2), 14, 20)
    est = _seeds(lv, rng)
    red = B.build_reducer(lv, lv.i1 + 1, est)
    Hr = red.reweighted
    negs = Hr.length < 0
    assert np.all(red.kind[negs] == RESET)
    assert np.array_equal(Hr.hop_mask, red.kind == RESET)
    _check_sandwich(lv, red)


def test_bootstrap_full_single_level():
    # h = h0^2 puts L at i1 + 1: one reducer, no estimate rounds
    cfg = B.BootstrapConfig(4, 2)
    assert cfg.L == cfg.i1 + 1
    lv, rng = _levels(1, cfg)
    red = B.bootstrap_full(lv, _seeds(lv, rng), rng)
    assert red.level == cfg.L
    _check_sandwich(lv, red)


@pytest.mark.parametrize("seed", range(4))
def test_bootstrap_full_sandwich_and_size(seed):
    cfg = B.BootstrapConfig(8, 2)
    lv, rng = _levels(seed, cfg, 20, 25)
    red = B.bootstrap_full(lv, _seeds(lv, rng), rng)
    assert red.level == cfg.L
    _check_sandwich(lv, red)
    G = lv.g
    bound = 8 * (G.m + len(lv.U) ** 2 * math.log(G.n) / cfg.h0)
    assert red.H.m <= bound


# ---------------------------------------------------------------- estimates

def test_seed_estimates_shift():
    lv, rng = _levels(2, B.BootstrapConfig(8, 2))
    j = lv.i1
    phi = johnson_neutralize(lv.sub[j])
    est = B.seed_estimates_via_neutralized_subgraph(lv, j, phi, rng)
    assert est.level == j and est.delta_out.shape == (lv.U.size, est.X.size)
    with pytest.raises(NotNeutralized):
        B.seed_estimates_via_neutralized_subgraph(lv, j, np.zeros(lv.sub[j].n), rng)


def test_seed_estimates_without_negative_edges():
    g = generate(GenSpec(12, 30, 0, seed=3))
    lv = B.Levels(g, [], B.BootstrapConfig(8, 2))
    est = B.seed_estimates_via_neutralized_subgraph(lv, 2, np.zeros(lv.sub[2].n), np.random.default_rng(0))
    assert est.X.size == 0 and est.delta_in.size == 0


def test_estimates_are_deterministic():
    lv, _ = _levels(3, B.BootstrapConfig(8, 2))
    a = _seeds(lv, np.random.default_rng(9))
    b = _seeds(lv, np.random.default_rng(9))
    for j in a:
        assert np.array_equal(a[j].X, b[j].X)
        assert np.array_equal(a[j].delta_out, b[j].delta_out)
        assert np.array_equal(a[j].delta_in, b[j].delta_in)


@pytest.mark.parametrize("seed", range(5))
def test_estimate_lower_bounds(seed):
    lv, rng = _levels(seed, B.BootstrapConfig(8, 2))
    est = _seeds(lv, rng)
    red = B.build_reducer(lv, lv.i1 + 1, est)
    est[lv.i1 + 1] = B.estimates_from_reducer(red, lv, rng)
    for e in est.values():
        j = e.level
        low, high = lv.hop_layer(j, 2 ** (j - 1)), lv.hop_layer(j, 2 ** j)
        for b, x in enumerate(e.X.tolist()):
            assert np.all(e.delta_out[:, b] >= low[x])
            assert np.all(e.delta_in[b, :] >= high[e.heads] - low[x])


# ---------------------------------------------------------------- solvers

@pytest.mark.parametrize("algo", ["dense", "sparse", "twice-recursive", "twice-recursive-sparse"])
def test_solver_oracle_equivalence(algo):
    for seed in range(1, 50):
        g = oracle_instance(seed)
        bf = bellman_ford_oracle(g, 0)
        cfg = SolverConfig(algo=algo, seed=seed, cb=0.1, sparse_h=2 if "sparse" in algo else None)
        out = shortest_paths(g, 0, algo, cfg)
        assert (out.cycle is None) == (bf.cycle is None)
        if bf.cycle is None:
            assert np.array_equal(out.dist, bf.dist)


def test_dense_base_case_is_johnson():
    g = generate(GenSpec(30, 90, 2, seed=5))
    phi = neutralize(g, "dense", SolverConfig(algo="dense", base_k=2))
    assert np.array_equal(phi, johnson_neutralize(g))


def test_sparse_with_unit_budget_equals_dense():
    g = generate(GenSpec(60, 200, 12, seed=6))
    a = neutralize(g, "sparse", SolverConfig(algo="sparse", seed=1, cb=0.1))
    b = neutralize(g, "dense", SolverConfig(algo="dense", seed=1, cb=0.1))
    assert np.array_equal(a, b)


def test_auto_handles_planted_cycles():
    for seed in range(5):
        g = generate(GenSpec(50, 200, 10, planted_cycle=True, seed=seed))
        res = neutralize(g, "auto", SolverConfig(seed=seed, cb=0.1))
        assert res.length < 0


def test_potentials_are_neutralizing():
    for seed in range(10):
        g = generate(GenSpec(70, 280, 14, seed=seed))
        for algo in ("dense", "twice-recursive"):
            phi = neutralize(g, algo, SolverConfig(algo=algo, seed=seed, cb=0.1))
            assert validate_potential(g, phi) and neutralizes(g, phi)
            assert np.all(reweight(g, phi).length >= 0)
            assert np.array_equal(
                dijkstra(reweight(g, phi), [0]).dist - phi[0] + phi,
                bellman_ford_oracle(g, 0).dist,
            )
