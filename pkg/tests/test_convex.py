import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from gcs_tsp.convex import Kind, Topology, bounded_cost_of, realize, realized_cost
from gcs_tsp.errors import InputError
from gcs_tsp.geometry import DEFAULT_TOL, Polytope, contains
from gcs_tsp.instance import bounded_matrix, generate, parse, point_instance

TOL = DEFAULT_TOL
FIXTURE = Path(__file__).parent / "fixtures" / "bounded_vs_realized.json"


def corner_boxes():
    # unit boxes centred on the corners of a 10 x 10 square
    return [Polytope.box([cx - 0.5, cy - 0.5], [cx + 0.5, cy + 0.5])
            for cx, cy in [(0, 0), (10, 0), (10, 10), (0, 10)]]


# -- Topology ----------------------------------------------------------------

def test_topology_kinds_validate():
    assert Topology.tour([0, 2, 1, 3]).is_tour()
    Topology(4, [(0, 1), (1, 2), (1, 3)], Kind.TREE)
    Topology.path([2, 0, 1])
    Topology(4, [(0, 1), (0, 2), (1, 2), (2, 3)], Kind.ONE_TREE, root=0)
    with pytest.raises(InputError):
        Topology(4, [(0, 1), (1, 2), (2, 0), (2, 3)], Kind.TOUR)
    with pytest.raises(InputError):
        Topology(4, [(0, 1), (1, 2)], Kind.TREE)  # disconnected
    with pytest.raises(InputError):
        Topology(4, [(0, 1), (0, 2), (0, 3)], Kind.PATH)
    with pytest.raises(InputError):
        Topology(4, [(0, 1), (0, 2), (1, 2), (2, 3)], Kind.ONE_TREE, root=3)
    with pytest.raises(InputError):
        Topology(3, [(0, 0)])
    with pytest.raises(InputError):
        Topology.tour([0, 1, 1])


def test_tour_order_normalised():
    assert Topology.tour([0, 3, 1, 2]).order() == [0, 2, 1, 3]
    assert Topology.tour([2, 1, 0]).order() == [0, 1, 2]


# -- realize examples --------------------------------------------------------

def test_triangle_of_points():
    inst = point_instance([(0, 0), (1, 0), (0, 1)])
    r = realize(Topology.tour([0, 1, 2]), inst.sets)
    assert r.cost == pytest.approx(2 + math.sqrt(2), abs=1e-9)
    assert realized_cost(Topology.tour([0, 1, 2]), inst.sets) == pytest.approx(2 + math.sqrt(2), abs=1e-9)


def test_path_between_two_boxes():
    sets = [Polytope.box([0, 0], [1, 1]), Polytope.box([3, 0], [4, 1])]
    assert realized_cost(Topology.path([0, 1]), sets) == pytest.approx(2.0, abs=TOL)


def test_square_of_boxes():
    sets = corner_boxes()
    assert realized_cost(Topology.tour([0, 1, 2, 3]), sets) == pytest.approx(36.0, abs=TOL)


def test_square_of_boxes_by_surface_grid():
    # brute force over a coordinate grid on each box boundary (corners included)
    t = np.linspace(-0.5, 0.5, 5)
    ring = np.unique(np.concatenate([np.c_[t, 0 * t - 0.5], np.c_[t, 0 * t + 0.5],
                                     np.c_[0 * t - 0.5, t], np.c_[0 * t + 0.5, t]]), axis=0)
    centers = np.array([(0, 0), (10, 0), (10, 10), (0, 10)], float)
    G = [ring + c for c in centers]
    d01 = np.linalg.norm(G[0][:, None] - G[1][None], axis=-1)
    d12 = np.linalg.norm(G[1][:, None] - G[2][None], axis=-1)
    d23 = np.linalg.norm(G[2][:, None] - G[3][None], axis=-1)
    d30 = np.linalg.norm(G[3][:, None] - G[0][None], axis=-1)
    total = (d01[:, :, None, None] + d12[None, :, :, None] + d23[None, None, :, :]
             + d30.T[:, None, None, :])
    assert total.min() == pytest.approx(36.0, abs=1e-12)
    assert realized_cost(Topology.tour([0, 1, 2, 3]), corner_boxes()) <= total.min() + TOL


def test_realization_invariants():
    inst = generate(6, 2, 3)
    r = realize(Topology.tour([0, 2, 4, 1, 5, 3]), inst.sets)
    pts = r.points
    recomputed = sum(np.linalg.norm(pts[u] - pts[v]) for u, v in Topology.tour([0, 2, 4, 1, 5, 3]).edges)
    assert abs(recomputed - r.cost) <= 1e-9
    assert all(contains(P, x, TOL) for P, x in zip(inst.sets, pts))
    assert 0.0 <= r.residual <= TOL
    assert r.lower_bound <= r.cost + 1e-12


def test_pinned_vertices_are_held():
    sets = [Polytope.box([0, 0], [1, 1]), Polytope.box([3, 0], [4, 1])]
    r = realize(Topology.path([0, 1]), sets, pinned={0: [0.0, 0.0]})
    np.testing.assert_allclose(r.points[0], [0, 0], atol=1e-12)
    assert r.cost == pytest.approx(3.0, abs=TOL)
    with pytest.raises(InputError):
        realize(Topology.path([0, 1]), sets, pinned={0: [5.0, 5.0]})


def test_size_mismatch():
    with pytest.raises(InputError):
        realize(Topology.tour([0, 1, 2]), corner_boxes())


# -- bounded_cost_of -----------------------------------------------------------

def test_bounded_cost_of_examples():
    assert bounded_cost_of(Topology(3, []), np.ones((3, 3))) == 0.0
    assert bounded_cost_of(Topology.tour([0, 1, 2]), np.ones((3, 3))) == 3.0
    with pytest.raises(InputError):
        bounded_cost_of(Topology.tour([0, 1, 2, 3]), np.ones((3, 3)))


def test_bounded_optimal_tour_is_not_realized_optimal():
    doc = json.loads(FIXTURE.read_text())
    exp = doc["expected"]
    inst = parse(FIXTURE.read_text())
    C = bounded_matrix(inst)
    costs = {o: bounded_cost_of(Topology.tour(o), C) for o in oracles.all_tours(inst.n)}
    best_bounded = min(costs, key=costs.get)
    assert oracles.tour_edges(best_bounded) == oracles.tour_edges(exp["bounded_optimal_order"])
    realized = {o: realized_cost(Topology.tour(o), inst.sets) for o in costs}
    best_realized = min(realized, key=realized.get)
    assert oracles.tour_edges(best_realized) == oracles.tour_edges(exp["realized_optimal_order"])
    assert realized[best_bounded] > realized[best_realized] + 0.1
    assert realized[best_realized] == pytest.approx(exp["realized_optimal_cost"], abs=1e-6)


# -- properties ----------------------------------------------------------------

@given(st.integers(0, 2**32), st.integers(3, 7))
def test_realized_at_least_bounded(seed, n):
    inst = generate(n, 2, seed)
    C = bounded_matrix(inst)
    order = list(np.random.default_rng(seed).permutation(n))
    topo = Topology.tour(order)
    assert realized_cost(topo, inst.sets) >= bounded_cost_of(topo, C) - n * TOL


@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=3,
                max_size=8, unique=True))
def test_point_sets_give_graph_cost(points):
    inst = point_instance(points)
    topo = Topology.tour(range(len(points)))
    C = oracles.dist_matrix(points)
    expected = sum(C[u, v] for u, v in topo.edges)
    assert realized_cost(topo, inst.sets) == pytest.approx(expected, abs=1e-9)


@given(st.integers(0, 2**32))
def test_restarts_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    inst = generate(n, 2, seed)
    topo = Topology.tour(list(rng.permutation(n)))
    costs = []
    for _ in range(16):
        x0 = np.array([P.vertices.T @ rng.dirichlet(np.ones(len(P.vertices))) for P in inst.sets])
        costs.append(realize(topo, inst.sets, x0=x0).cost)
    assert max(costs) - min(costs) <= 10 * TOL


@given(st.integers(0, 2**32), st.integers(0, 5))
def test_enlarging_a_set_never_increases_cost(seed, k):
    inst = generate(6, 2, seed)
    topo = Topology.tour([0, 3, 1, 4, 2, 5])
    before = realized_cost(topo, inst.sets)
    V = inst.sets[k].vertices
    sets = list(inst.sets)
    sets[k] = Polytope.box(V.min(axis=0) - 0.1, V.max(axis=0) + 0.1)
    assert realized_cost(topo, sets) <= before + TOL
