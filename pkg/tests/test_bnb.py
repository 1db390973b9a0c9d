import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from gcs_tsp.bnb import AscentConfig, BnbNode, Mode, branch_and_bound, certify_gap
from gcs_tsp.combinatorial import (EdgeConstraintSet, Penalties, bhk_optimal, greedy_tour,
                                   held_karp_ascent, tour_cost)
from gcs_tsp.convex import realize
from gcs_tsp.errors import InputError
from gcs_tsp.exact import solve_enumeration
from gcs_tsp.geometry import DEFAULT_TOL
from gcs_tsp.instance import bounded_matrix, generate

SQ = oracles.dist_matrix(oracles.square_points())


def test_square_is_proved():
    r = branch_and_bound(SQ)
    assert r.bounded_cost == pytest.approx(4.0)
    assert r.proved_optimal_on_matrix
    assert r.tour.edges == oracles_tour_edges([0, 1, 2, 3])


def oracles_tour_edges(order):
    return tuple(sorted(oracles.tour_edges(order)))


def test_three_vertices_return_immediately():
    C = oracles.dist_matrix([(0, 0), (2, 0), (0, 1)])
    r = branch_and_bound(C)
    assert r.nodes_expanded == 0 and r.proved_optimal_on_matrix
    assert r.bounded_cost == pytest.approx(3 + np.sqrt(5))


def test_argument_checks():
    with pytest.raises(InputError):
        branch_and_bound(np.zeros((2, 2)))
    with pytest.raises(InputError):
        branch_and_bound(SQ, mode="cbb")
    with pytest.raises(ValueError):
        branch_and_bound(SQ, mode="nope")


def test_node_ordering():
    a = BnbNode(1.0, 0, EdgeConstraintSet(), Penalties.zeros(3))
    b = BnbNode(1.0, 1, EdgeConstraintSet(), Penalties.zeros(3))
    c = BnbNode(0.5, 2, EdgeConstraintSet(), Penalties.zeros(3))
    assert sorted([a, b, c]) == [c, a, b]


def test_ascent_config_defaults():
    cfg = AscentConfig()
    assert (cfg.root_iters, cfg.child_iters, cfg.t0, cfg.decay) == (1000, 100, 2.0, 0.95)
    assert cfg.child_step == 0.5


@pytest.mark.parametrize("n", [5, 10, 15])
def test_matrix_optimal_rate(n):
    hits = 0
    seeds = range(100 * n, 100 * n + 200)
    for s in seeds:
        C = bounded_matrix(generate(n, 2, s))
        r = branch_and_bound(C)
        hits += abs(r.bounded_cost - bhk_optimal(C)[0]) <= 1e-9
    assert hits >= 0.95 * len(seeds)


def test_certify_gap_examples():
    assert certify_gap(10.0, 10.0) == 0.0
    assert certify_gap(11.0, 10.0) == pytest.approx(0.1)
    with pytest.raises(InputError):
        certify_gap(1.0, 0.0)


def test_certify_gap_dominates_true_gap():
    for s in range(15):
        inst = generate(8, 2, 300 + s)
        C = bounded_matrix(inst)
        r = branch_and_bound(C, sets=inst.packed())
        lower = held_karp_ascent(C).best_bound
        opt = solve_enumeration(inst).cost
        assert certify_gap(r, lower) >= (r.realized_cost - opt) / opt - 1e-12


@given(st.integers(0, 2**32), st.integers(5, 8))
def test_admissibility_and_heap_order(seed, n):
    rng = np.random.default_rng(seed)
    C = oracles.dist_matrix(rng.uniform(0, 10, (n, 2)))
    r = branch_and_bound(C, ascent=AscentConfig(root_iters=30, child_iters=5))
    keys = [k for k, _, _ in r.expanded]
    assert all(a <= b + 1e-12 for a, b in zip(keys, keys[1:]))
    for key, bound, cons in r.expanded:
        best = oracles.brute_tour(C, cons.forced, cons.forbidden)[0]
        assert key <= best + 1e-9
        if bound is not None:
            assert bound <= best + 1e-9
        else:
            assert best == np.inf
    inc = r.incumbents
    assert all(a >= b for a, b in zip(inc, inc[1:]))
    if r.proved_optimal_on_matrix:
        assert r.bounded_cost == pytest.approx(oracles.brute_tour(C)[0], abs=1e-9)


def test_deterministic():
    C = bounded_matrix(generate(12, 2, 5))
    a, b = branch_and_bound(C), branch_and_bound(C)
    assert a.tour == b.tour and a.nodes_expanded == b.nodes_expanded


def test_realized_result_with_sets():
    inst = generate(7, 2, 21)
    C = bounded_matrix(inst)
    r = branch_and_bound(C, sets=inst.packed())
    assert r.realized_cost >= r.bounded_cost - DEFAULT_TOL
    assert r.realized_cost == pytest.approx(realize(r.tour, inst.sets).cost, abs=1e-6)
    greedy = realize(greedy_tour(C.costs), inst.sets).cost
    assert r.realized_cost <= greedy + 1e-9
    assert tour_cost(r.tour.order(), C.costs) == pytest.approx(r.bounded_cost)


def test_cbb_mode():
    inst = generate(9, 2, 4)
    C = bounded_matrix(inst)
    r = branch_and_bound(C, mode=Mode.CBB, sets=inst.packed(), stall_limit=5)
    assert not r.proved_optimal_on_matrix
    assert r.realized_cost >= solve_enumeration(inst).cost - 1e-6
    assert r.realized_cost <= realize(greedy_tour(C.costs), inst.sets).cost + 1e-9


def test_node_cap_and_depth_cap():
    rng = np.random.default_rng(0)
    C = oracles.dist_matrix(rng.uniform(0, 10, (14, 2)))
    r = branch_and_bound(C, max_nodes=1, ascent=AscentConfig(root_iters=3))
    assert r.nodes_expanded <= 1 and r.tour.is_tour()
    r = branch_and_bound(C, max_depth=0, ascent=AscentConfig(root_iters=3))
    assert r.nodes_expanded == 1
