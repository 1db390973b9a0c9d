"""Acceptance criteria, each printing one PASS/FAIL line.

Seeds are fixed per criterion and size as 100000*k + 1000*n + i, so no
criterion reuses another's instances. Run with ``pytest -m acceptance -s``
to see the lines interleaved with the progress output.
"""
import json
import math
import statistics
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import random_pair
from gcs_tsp import agcs
from gcs_tsp.bnb import branch_and_bound
from gcs_tsp.combinatorial import greedy_tour, tour_cost, two_opt
from gcs_tsp.convex import Topology, bounded_cost_of, realize, realized_cost
from gcs_tsp.exact import lower_bound_suite, solve_enumeration, solve_lattice
from gcs_tsp.geometry import DEFAULT_TOL, contains, min_distance
from gcs_tsp.instance import bounded_matrix, generate, parse, point_instance

pytestmark = pytest.mark.acceptance

TOL = DEFAULT_TOL
FIXTURE = Path(__file__).parent / "fixtures" / "bounded_vs_realized.json"
OPT_TOL = 1e-4  # tolerance for calling a heuristic tour optimal


def seeds(k, n, count):
    base = 100_000 * k + 1000 * n
    return range(base, base + count)


@pytest.fixture
def verdict(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nAC{k} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
        assert ok, detail
    return emit


def warm_up():
    inst = generate(5, 2, 0)
    C = bounded_matrix(inst)
    branch_and_bound(C, sets=inst.packed())
    solve_enumeration(inst)
    solve_lattice(inst, C)
    agcs.build(3)


def delta_lower(opt, lower):
    return (opt - lower) / opt * 100


def delta_upper(h, opt):
    return (h - opt) / opt * 100


# -- 1 -------------------------------------------------------------------------

def test_ac1_augmented_graph_sizes(verdict):
    warm_up()
    t0 = time.perf_counter()
    bad = [n for n in range(2, 13) if agcs.build(n).counts() != agcs.count_formulas(n)]
    five = agcs.build(5).counts()
    dt = time.perf_counter() - t0
    ok = not bad and five == (16, 80, 352) and dt < 10
    verdict(1, ok, f"n=2..12 mismatches={bad}, n=5 counts={five}, {dt:.2f}s (< 10 s)")


# -- 2 -------------------------------------------------------------------------

def test_ac2_lattice_equals_enumeration(verdict):
    t0 = time.perf_counter()
    worst, bad = 0.0, 0
    for n in range(4, 9):
        for s in seeds(2, n, 100):
            inst = generate(n, 2, s)
            a = solve_enumeration(inst).cost
            r = solve_lattice(inst, bounded_matrix(inst))
            rel = abs(a - r.cost) / a
            worst = max(worst, rel)
            bad += rel > 1e-6 or not r.proven
    # point sets: both solvers against a textbook subset dynamic program
    pbad, pworst = 0, 0.0
    for n in range(4, 9):
        for s in seeds(2, n, 20):
            pts = np.random.default_rng(s).uniform(0, n, (n, 2))
            inst = point_instance(pts)
            ref = oracles.held_karp(oracles.dist_matrix(pts))[0]
            for c in (solve_enumeration(inst).cost, solve_lattice(inst, bounded_matrix(inst)).cost):
                pworst = max(pworst, abs(c - ref))
                pbad += abs(c - ref) > 1e-9
    dt = time.perf_counter() - t0
    ok = bad == 0 and pbad == 0 and dt < 1800
    verdict(2, ok, f"500 set instances: {bad} mismatches, max rel diff {worst:.2e} (<= 1e-6); "
                   f"100 point instances: {pbad} mismatches vs DP, max abs diff {pworst:.2e}; "
                   f"{dt:.0f}s (< 1800 s)")


# -- 3 -------------------------------------------------------------------------

def test_ac3_bound_sandwich(verdict):
    slack = 1e-6
    violations = []
    for n in (5, 8):
        for s in seeds(3, n, 200):
            inst = generate(n, 2, s)
            C = bounded_matrix(inst)
            b = lower_bound_suite(inst, C)
            h = branch_and_bound(C, sets=inst.packed())
            opt = solve_lattice(inst, C, incumbent=(h.tour.order(), h.realized_cost)).cost
            greedy = realize(greedy_tour(C), inst.packed()).cost
            chain = [b["MST-B"], b["MOT-B"], b["WOT-B"], opt, h.realized_cost, greedy]
            if any(x > y + slack for x, y in zip(chain, chain[1:])):
                violations.append((n, s))
    verdict(3, not violations, f"400 instances, MST-B <= MOT-B <= WOT-B <= opt <= BBB <= greedy "
                               f"violations: {violations or 0}")


# -- 4 -------------------------------------------------------------------------

PUBLISHED_WOT_MEAN = {5: 8.12, 10: 12.62, 15: 16.00}


def test_ac4_lower_bound_quality(verdict):
    lines, ok = [], True
    for n, ref in PUBLISHED_WOT_MEAN.items():
        wot, mst = [], []
        for s in seeds(4, n, 100):
            inst = generate(n, 2, s)
            C = bounded_matrix(inst)
            b = lower_bound_suite(inst, C)
            h = branch_and_bound(C, sets=inst.packed())
            ex = solve_lattice(inst, C, completion="bhk",
                               incumbent=(h.tour.order(), h.realized_cost))
            assert ex.proven
            wot.append(delta_lower(ex.cost, b["WOT-B"]))
            mst.append(delta_lower(ex.cost, b["MST-B"]))
        mean = statistics.fmean(wot)
        good = (math.isfinite(mean) and mean > 0 and ref / 2 <= mean <= 2 * ref
                and max(wot) < max(mst))
        ok &= good
        lines.append(f"n={n}: WOT-B mean {mean:.2f}% (window {ref / 2:.2f}-{2 * ref:.2f}), "
                     f"max {max(wot):.2f}% vs MST-B max {max(mst):.2f}% "
                     f"[{'ok' if good else 'out'}]")
    verdict(4, ok, "; ".join(lines))


# -- 5 -------------------------------------------------------------------------

def test_ac5_heuristic_quality(verdict):
    lines, ok = [], True
    for n in (5, 8):
        hits, gaps = 0, []
        for s in seeds(5, n, 100):
            inst = generate(n, 2, s)
            C = bounded_matrix(inst)
            h = branch_and_bound(C, sets=inst.packed())
            opt = solve_lattice(inst, C, incumbent=(h.tour.order(), h.realized_cost)).cost
            hits += abs(h.realized_cost - opt) <= OPT_TOL
            gaps.append(delta_upper(h.realized_cost, opt))
        rate, mean = hits / 100, statistics.fmean(gaps)
        good = rate >= 0.8 and mean <= 1.0
        ok &= good
        lines.append(f"n={n}: optimal in {rate:.0%} (>= 80%), mean dup {mean:.4f}% (<= 1%)")
    verdict(5, ok, "; ".join(lines))


# -- 6 -------------------------------------------------------------------------

def timed_bbb(inst):
    t0 = time.perf_counter()
    C = bounded_matrix(inst)
    branch_and_bound(C, sets=inst.packed())
    return time.perf_counter() - t0


def test_ac6_heuristic_speed(verdict):
    warm_up()
    t15 = statistics.median(timed_bbb(generate(15, 2, s)) for s in seeds(6, 15, 25))
    bbb8, enum8 = [], []
    for s in seeds(6, 8, 25):
        inst = generate(8, 2, s)
        bbb8.append(timed_bbb(inst))
        t0 = time.perf_counter()
        solve_enumeration(inst)
        enum8.append(time.perf_counter() - t0)
    ratio = statistics.median(enum8) / statistics.median(bbb8)
    ok = t15 <= 5.0 and ratio >= 10
    verdict(6, ok, f"BBB median at n=15 {t15:.3f}s (<= 5 s, matrix included); "
                   f"enumeration/BBB median ratio at n=8 {ratio:.0f}x (>= 10x)")


# -- 7 -------------------------------------------------------------------------

def test_ac7_hundred_sets(verdict):
    warm_up()
    inst = generate(100, 2, seeds(7, 100, 1)[0])
    t0 = time.perf_counter()
    C = bounded_matrix(inst)
    tm = time.perf_counter() - t0
    t0 = time.perf_counter()
    h = branch_and_bound(C, sets=inst.packed())
    tb = time.perf_counter() - t0
    ok = (tm <= 60 and tb <= 600 and h.tour.is_tour()
          and math.isfinite(h.realized_cost) and h.realized_cost >= h.bounded_cost - 100 * TOL)
    verdict(7, ok, f"bounded matrix {tm:.1f}s (<= 60 s); BBB {tb:.1f}s (<= 600 s), "
                   f"bounded cost {h.bounded_cost:.4f}, realized cost {h.realized_cost:.4f}")


# -- 8 -------------------------------------------------------------------------

TRIALS = 1000


def trial_shift_identity(rng):
    n = int(rng.integers(4, 12))
    A = np.triu(rng.integers(1, 100, (n, n)).astype(float), 1)
    C = A + A.T
    pi = rng.integers(-64, 64, n) / 8.0  # dyadic, so every sum is exact
    W = C + pi[:, None] + pi[None, :]
    order = list(rng.permutation(n))
    return tour_cost(order, W) == tour_cost(order, C) + 2 * pi.sum()


def trial_realized_vs_bounded(rng):
    n = int(rng.integers(3, 8))
    inst = generate(n, 2, int(rng.integers(2**63)))
    topo = Topology.tour(list(rng.permutation(n)))
    return realized_cost(topo, inst.sets) >= bounded_cost_of(topo, bounded_matrix(inst)) - n * TOL


def trial_two_opt(rng):
    n = int(rng.integers(4, 13))
    C = oracles.dist_matrix(rng.uniform(0, 10, (n, 2)))
    order = list(rng.permutation(n))
    return tour_cost(two_opt(order, C).order(), C) <= tour_cost(order, C) + 1e-12


def trial_min_distance(rng):
    P, Q = random_pair(int(rng.integers(2**32)), int(rng.integers(2, 4)))
    a, b = min_distance(P, Q), min_distance(Q, P)
    ok = abs(a.cost - b.cost) <= 2 * TOL
    ok &= contains(P, a.xP, TOL) and contains(Q, a.xQ, TOL)
    ok &= contains(Q, b.xP, TOL) and contains(P, b.xQ, TOL)
    return ok and (a.cost == 0.0 or abs(np.linalg.norm(a.xP - a.xQ) - a.cost) <= TOL)


def random_start(rng, sets):
    return np.array([P.vertices.T @ rng.dirichlet(np.ones(len(P.vertices))) for P in sets])


def trial_restarts(rng):
    n = int(rng.integers(3, 7))
    inst = generate(n, 2, int(rng.integers(2**63)))
    topo = Topology.tour(list(rng.permutation(n)))
    costs = [realize(topo, inst.sets, x0=random_start(rng, inst.sets)).cost for _ in range(4)]
    return max(costs) - min(costs) <= 10 * TOL


FIXTURE_INST = parse(FIXTURE.read_text())
FIXTURE_EXP = json.loads(FIXTURE.read_text())["expected"]


def trial_fixture(rng):
    # random starting points never let the bounded-optimal tour catch up
    sets = FIXTURE_INST.sets
    b = realize(Topology.tour(FIXTURE_EXP["bounded_optimal_order"]), sets,
                x0=random_start(rng, sets)).cost
    r = realize(Topology.tour(FIXTURE_EXP["realized_optimal_order"]), sets,
                x0=random_start(rng, sets)).cost
    return b > r + 10 * TOL


def fixture_is_a_counterexample():
    C = bounded_matrix(FIXTURE_INST)
    orders = oracles.all_tours(FIXTURE_INST.n)
    bounded = {o: bounded_cost_of(Topology.tour(o), C) for o in orders}
    best_b = min(bounded, key=bounded.get)
    best_r = solve_enumeration(FIXTURE_INST)
    return (oracles.tour_edges(best_b) == oracles.tour_edges(FIXTURE_EXP["bounded_optimal_order"])
            and realized_cost(Topology.tour(best_b), FIXTURE_INST.sets) > best_r.cost + 10 * TOL)


PROPERTIES = [
    ("shift identity", trial_shift_identity),
    ("realized >= bounded", trial_realized_vs_bounded),
    ("2-opt monotone", trial_two_opt),
    ("min_distance symmetry/witnesses", trial_min_distance),
    ("restart agreement", trial_restarts),
    ("bounded vs realized fixture", trial_fixture),
]


def test_ac8_property_suites(verdict):
    fails = {}
    for k, (name, trial) in enumerate(PROPERTIES):
        rng = np.random.default_rng(800_000 + k)
        fails[name] = sum(not trial(rng) for _ in range(TRIALS))
    fixture_ok = fixture_is_a_counterexample()
    ok = not any(fails.values()) and fixture_ok
    detail = ", ".join(f"{name} {TRIALS - f}/{TRIALS}" for name, f in fails.items())
    verdict(8, ok, f"{detail}; fixture bounded-optimal tour realizes worse: {fixture_ok}")
