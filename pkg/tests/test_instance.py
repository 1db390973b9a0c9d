import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gcs_tsp.errors import InputError
from gcs_tsp.geometry import DEFAULT_TOL, Polytope, min_distance
from gcs_tsp.instance import (HALF_WIDTH, RADIUS_CAP, BoundedCostMatrix, Instance, SplitMix64,
                              bounded_matrix, chebyshev_matrix, generate, load,
                              matrix_csv, parse, point_instance, read_matrix_csv, save,
                              serialize)

TOL = DEFAULT_TOL


def test_splitmix64_reference_stream():
    # published reference outputs for seed 0
    r = SplitMix64(0)
    assert [r.next_u64() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_prng_helpers_in_range():
    r = SplitMix64(123)
    u = [r.uniform() for _ in range(1000)]
    assert min(u) >= 0.0 and max(u) < 1.0
    b = [r.below(7) for _ in range(2000)]
    assert set(b) == set(range(7))


def test_generate_is_deterministic():
    assert serialize(generate(5, 2, 42)) == serialize(generate(5, 2, 42))
    assert serialize(generate(5, 2, 42)) != serialize(generate(5, 2, 43))


def test_generate_structure():
    inst = generate(5, 2, 42)
    assert inst.n == 5 and inst.grid == 5 and inst.d == 2
    cells = set()
    for P in inst.sets:
        c, r = P.chebyshev
        assert r > 0
        cell = tuple(np.floor(c).astype(int))
        assert all(0 <= k < 5 for k in cell)
        cells.add(cell)
        # contained in the inner box around its cell center
        V = P.vertices
        center = np.array(cell) + 0.5
        assert np.all(np.abs(V - center) <= HALF_WIDTH + 1e-9)
    assert len(cells) == 5


@given(st.integers(0, 2**64 - 1), st.integers(1, 3))
def test_generated_sets_respect_radius_cap(seed, d):
    inst = generate(4, d, seed)
    for P in inst.sets:
        center = np.floor(P.chebyshev[0]) + 0.5
        assert np.linalg.norm(P.vertices - center, axis=1).max() <= RADIUS_CAP + 1e-9
        assert P.chebyshev[1] > 0


def test_generate_sets_never_touch():
    C = bounded_matrix(generate(10, 2, 7))
    off = C.costs[~np.eye(10, dtype=bool)]
    assert np.all(off > 0)


def test_generate_guards():
    with pytest.raises(InputError):
        generate(2, 2, 0)
    with pytest.raises(InputError):
        generate(5, 0, 0)


def test_generate_three_dimensional():
    inst = generate(4, 3, 1)
    assert inst.d == 3 and all(P.d == 3 for P in inst.sets)


def test_point_matrix_is_euclidean():
    inst = point_instance([(0, 0), (3, 4)])
    assert bounded_matrix(inst).costs[0, 1] == pytest.approx(5.0, abs=TOL)
    np.testing.assert_allclose(chebyshev_matrix(inst).costs, bounded_matrix(inst).costs, atol=TOL)


def test_chebyshev_vs_bounded_for_boxes():
    inst = Instance(2, (Polytope.box([0, 0], [1, 1]), Polytope.box([3, 0], [4, 1])))
    assert chebyshev_matrix(inst).costs[0, 1] == pytest.approx(3.0, abs=1e-9)
    assert bounded_matrix(inst).costs[0, 1] == pytest.approx(2.0, abs=TOL)


@given(st.integers(0, 2**32), st.integers(3, 8))
def test_chebyshev_dominates_bounded(seed, n):
    inst = generate(n, 2, seed)
    B = bounded_matrix(inst)
    assert np.all(chebyshev_matrix(inst).costs >= B.costs - 2 * TOL)
    assert np.all(np.diag(B.costs) == 0.0)


def test_bounded_matrix_entries_and_witnesses():
    inst = generate(6, 2, 11)
    C = bounded_matrix(inst)
    for i in range(6):
        for j in range(i + 1, 6):
            md = min_distance(inst.sets[i], inst.sets[j])
            assert C.costs[i, j] == pytest.approx(md.cost, abs=2 * TOL)
            assert np.linalg.norm(C.witnesses[i, j] - C.witnesses[j, i]) == pytest.approx(
                C.costs[i, j], abs=TOL)


def test_cost_matrix_validation():
    with pytest.raises(InputError):
        BoundedCostMatrix([[0, 1], [2, 0]])
    with pytest.raises(InputError):
        BoundedCostMatrix([[1, 1], [1, 0]])
    with pytest.raises(InputError):
        BoundedCostMatrix([[0, -1], [-1, 0]])
    C = BoundedCostMatrix([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        C.costs[0, 1] = 3


@given(st.integers(0, 2**64 - 1), st.integers(3, 9))
def test_round_trip(seed, n):
    inst = generate(n, 2, seed)
    back = parse(serialize(inst))
    assert back == inst
    assert serialize(back) == serialize(inst)


def test_save_and_load(tmp_path):
    inst = generate(4, 2, 9)
    save(inst, tmp_path / "i.json")
    assert load(tmp_path / "i.json") == inst


@pytest.mark.parametrize("text", [
    "not json", "[]", '{"format_version": 99}',
    '{"format_version": 1, "d": 2, "n_K": 3, "sets": []}',
    '{"format_version": 1, "d": 2, "n_K": 1, "sets": [{"id": 4, "H": [[1,0]], "g": [1]}]}',
])
def test_parse_rejects_malformed(text):
    with pytest.raises(InputError):
        parse(text)


def test_matrix_csv_round_trip():
    C = bounded_matrix(generate(5, 2, 1))
    text = matrix_csv(C)
    assert text.splitlines()[0] == "i,j,cost"
    assert len(text.splitlines()) == 1 + 10
    np.testing.assert_array_equal(read_matrix_csv(text).costs, C.costs)
