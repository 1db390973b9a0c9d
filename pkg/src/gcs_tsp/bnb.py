"""Branch-and-bound tour heuristic over forced/forbidden edge sets.

Nodes are bounded by Held-Karp ascents on the bounded cost matrix. BBB
compares incumbents by matrix cost; CBB compares them by realized cost and
stops after a run of non-improving expansions.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _graph as G
from .combinatorial import (ASCENT_DECAY, ASCENT_ITERS, ASCENT_T0, NO_CONSTRAINTS,
                            EdgeConstraintSet, Penalties, cost_array, greedy_tour,
                            tour_cost, two_opt)
from .convex import Topology, realize
from .errors import InfeasibleError, InputError
from .geometry import DEFAULT_TOL


class Mode(str, Enum):
    BBB = "bbb"
    CBB = "cbb"


@dataclass(frozen=True)
class AscentConfig:
    root_iters: int = ASCENT_ITERS
    child_iters: int = 100
    t0: float = ASCENT_T0
    child_t0: float | None = None  # defaults to t0 / 4
    decay: float = ASCENT_DECAY
    root: int = 0

    @property
    def child_step(self) -> float:
        return self.t0 / 4.0 if self.child_t0 is None else self.child_t0


@dataclass(order=True)
class BnbNode:
    lower_bound: float
    seq: int
    constraints: EdgeConstraintSet = field(compare=False)
    pi: Penalties = field(compare=False)
    depth: int = field(default=0, compare=False)


@dataclass
class HeuristicResult:
    tour: Topology
    bounded_cost: float
    realized_cost: float
    nodes_expanded: int
    proved_optimal_on_matrix: bool
    points: np.ndarray | None = field(default=None, repr=False)
    root_bound: float = float("-inf")
    wall_time: float = 0.0
    incumbents: list = field(default_factory=list, repr=False)  # incumbent values in order
    # (stored key, recomputed bound or None if infeasible, constraints) per popped node
    expanded: list = field(default_factory=list, repr=False)


def _branch_edge(tree_edges, deg, C, constraints):
    """Highest-cost unforced 1-tree edge at the max-degree vertex (ties: lowest index)."""
    v = int(np.argmax(deg))
    cands = [(u, w) for u, w in tree_edges if v in (u, w) and (u, w) not in constraints.forced]
    if not cands:
        return None
    return max(cands, key=lambda e: (C[e], -e[0], -e[1]))


def _node_bound(C, constraints, root, pi, iters, t0, decay):
    n = C.shape[0]
    best_pi = np.empty(n)
    last_pi = np.empty(n)
    edges = np.empty((n, 2), dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    bound, _, code, is_tour = G.ascent(C, constraints.status(n), root, pi, iters, t0,
                                       decay, best_pi, edges, deg, last_pi)
    if code != G.OK:
        return None
    tree = [tuple(int(x) for x in e) for e in edges]
    tree = [(u, w) if u < w else (w, u) for u, w in tree]
    return bound, best_pi, tree, deg, is_tour


def branch_and_bound(C, max_nodes: int = 10_000, ascent: AscentConfig | None = None,
                     mode: Mode | str = Mode.BBB, sets=None, stall_limit: int = 15,
                     start: int = 0, max_depth: int | None = None,
                     tol: float = DEFAULT_TOL) -> HeuristicResult:
    """Best-first branch and bound seeded by greedy + 2-opt.

    The returned tour is the one with the lowest realized cost among the
    tours that served as incumbent (the greedy seed included). When ``sets``
    is None (BBB without geometry) realized costs are not available and the
    matrix incumbent is returned with ``realized_cost = nan``.
    """
    t_start = time.perf_counter()
    mode = Mode(mode)
    A = cost_array(C)
    n = A.shape[0]
    if n < 3:
        raise InputError("branch and bound needs n >= 3")
    if mode is Mode.CBB and sets is None:
        raise InputError("CBB mode needs the polytopes")
    cfg = ascent or AscentConfig()
    cache: dict[tuple, object] = {}
    anchor = [None, np.inf]  # points of the cheapest realization so far

    def realized(topo: Topology):
        if sets is None:
            return None
        key = topo.edges
        if key not in cache:
            # neighbouring tours share most edges; start from the best points
            r = realize(topo, sets, tol, x0=anchor[0])
            cache[key] = r
            if r.cost < anchor[1]:
                anchor[:] = [r.points, r.cost]
        return cache[key]

    def rcost(topo):
        return realized(topo).cost

    seed = greedy_tour(A, start)
    ub_tour = two_opt(seed, A)
    candidates = [seed, ub_tour]
    if mode is Mode.CBB:
        ub_tour = two_opt(ub_tour, A, evaluator=rcost)
        candidates.append(ub_tour)
    ub_bounded = tour_cost(ub_tour.order(), A)
    ub = rcost(ub_tour) if mode is Mode.CBB else ub_bounded
    trace = [ub]
    popped: list = []

    if n == 3:
        best_topo, proved, nodes, root_bound = ub_tour, True, 0, ub_bounded
    else:
        seq = itertools.count()
        heap: list[BnbNode] = []
        root_pi = np.zeros(n)
        # the root is evaluated with the full ascent before entering the heap
        res = _node_bound(A, NO_CONSTRAINTS, cfg.root, root_pi, cfg.root_iters, cfg.t0,
                          cfg.decay)
        root_bound = res[0] if res is not None else float("inf")
        pending = {}
        if res is not None:
            node = BnbNode(res[0], next(seq), NO_CONSTRAINTS, Penalties(res[1]), 0)
            pending[node.seq] = res
            heapq.heappush(heap, node)
        nodes = 0
        stall = 0
        while heap and nodes < max_nodes:
            node = heapq.heappop(heap)
            nodes += 1
            res = pending.pop(node.seq, None)
            if res is None:
                res = _node_bound(A, node.constraints, cfg.root, np.array(node.pi.pi),
                                  cfg.child_iters, cfg.child_step, cfg.decay)
            popped.append((node.lower_bound, None if res is None else res[0],
                           node.constraints))
            if res is None:
                continue
            bound, pi, tree, deg, is_tour = res
            improved = False
            if bound >= ub - 1e-9:
                pass
            elif is_tour:
                topo = Topology(n, tree)
                order = topo.order()
                if mode is Mode.CBB:
                    val = rcost(Topology.tour(order))
                else:
                    val = tour_cost(order, A)
                if val < ub - 1e-12:
                    ub, ub_tour, improved = val, Topology.tour(order), True
                    ub_bounded = tour_cost(order, A)
                    candidates.append(ub_tour)
                    trace.append(ub)
            elif max_depth is None or node.depth < max_depth:
                e = _branch_edge(tree, deg, A, node.constraints)
                if e is not None:
                    kids = [node.constraints.forbid(e)]
                    try:
                        kids.append(node.constraints.force(e))
                    except InfeasibleError:
                        pass
                    for cons in kids:
                        heapq.heappush(heap, BnbNode(bound, next(seq), cons,
                                                     Penalties(pi), node.depth + 1))
            if mode is Mode.CBB:
                stall = 0 if improved else stall + 1
                if stall >= stall_limit:
                    break
        proved = mode is Mode.BBB and not heap
        best_topo = ub_tour

    if sets is None:
        return HeuristicResult(best_topo, tour_cost(best_topo.order(), A), float("nan"),
                               nodes, bool(proved), None, float(root_bound),
                               time.perf_counter() - t_start, trace, popped)
    # keep the realized-best tour among everything that was an incumbent
    best = min(dict.fromkeys(candidates + [best_topo]),
               key=lambda t: (realized(t).cost, t is not best_topo))
    r = realized(best)
    return HeuristicResult(best, tour_cost(best.order(), A), r.cost, nodes, bool(proved),
                           r.points, float(root_bound), time.perf_counter() - t_start,
                           trace, popped)


def certify_gap(result: HeuristicResult | float, lower_bound: float) -> float:
    """(realized - lower) / lower: an upper bound on the true optimality gap."""
    realized_cost = getattr(result, "realized_cost", result)
    if not lower_bound > 0:
        raise InputError("lower bound must be positive")
    return (float(realized_cost) - float(lower_bound)) / float(lower_bound)
