"""Exact solvers: exhaustive enumeration and a best-first search over the
Bellman-Held-Karp subset lattice with convex prefix bounds.

A lattice state is a visit prefix starting at target 0. Its bound is the
certified lower bound of the prefix path realized with free endpoints plus a
bounded-cost bound on the remaining path back to 0. Because the continuous
prefix cost depends on the whole prefix order, states are never merged per
(visited, last) pair as in the classical dynamic program.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _graph as G
from .bnb import branch_and_bound
from .combinatorial import (bhk_optimal, cost_array, held_karp_ascent, min_one_tree,
                            mst_kruskal, tree_cost)
from .convex import realize_edges
from .errors import GuardError, InputError
from .geometry import DEFAULT_TOL
from .instance import Instance

ENUM_MAX_N = 9
BHK_MAX_N = 20


class Method(str, Enum):
    ENUMERATION = "enumeration"
    LATTICE = "lattice"


class Status(str, Enum):
    OPTIMAL = "optimal"
    NODE_CAP = "node_cap"  # incumbent only, not proven


@dataclass
class ExactResult:
    order: list
    cost: float
    waypoints: np.ndarray = field(repr=False)
    nodes: int
    method: Method
    status: Status = Status.OPTIMAL
    lower_bound: float = float("nan")
    wall_time: float = 0.0

    @property
    def proven(self) -> bool:
        return self.status is Status.OPTIMAL


def _tour_edges(order) -> np.ndarray:
    n = len(order)
    return np.array([(order[k], order[(k + 1) % n]) for k in range(n)], dtype=np.int64)


def _path_edges(order) -> np.ndarray:
    return np.array([(k, k + 1) for k in range(len(order) - 1)],
                    dtype=np.int64).reshape(-1, 2)


def tour_orders(n: int):
    """Each undirected tour once: 0 first, second vertex below the last."""
    for rest in itertools.permutations(range(1, n)):
        if n < 3 or rest[0] < rest[-1]:
            yield (0,) + rest


def solve_enumeration(inst: Instance, tol: float = DEFAULT_TOL) -> ExactResult:
    """Realize every distinct tour and keep the cheapest (n <= 9)."""
    t0 = time.perf_counter()
    n = inst.n
    if n > ENUM_MAX_N:
        raise GuardError(f"enumeration is limited to n <= {ENUM_MAX_N} (got {n})")
    if n < 3:
        raise InputError("a tour needs at least 3 sets")
    pk = inst.packed()
    sidx = np.arange(n, dtype=np.int64)
    best, count = None, 0
    for order in tour_orders(n):
        count += 1
        r = realize_edges(_tour_edges(order), sidx, pk, tol)
        if best is None or r.cost < best[0].cost:
            best = (r, order)
    r, order = best
    return ExactResult(list(order), r.cost, r.points, count, Method.ENUMERATION,
                       Status.OPTIMAL, r.cost, time.perf_counter() - t0)


class _Completion:
    """Lower bounds on the bounded cost of finishing a tour.

    ``mst``: MST over the unvisited targets plus {last, 0}.
    ``bhk``: the exact bounded cost of the cheapest path 0 -> unvisited -> last,
    read from a Bellman-Held-Karp table (never below the MST bound).
    """

    def __init__(self, A: np.ndarray, kind: str):
        self.A = A
        self.kind = kind
        self.n = A.shape[0]
        self.memo: dict[tuple[int, int], float] = {}
        if kind == "bhk":
            if self.n > BHK_MAX_N:
                raise GuardError(f"the bhk completion bound needs n <= {BHK_MAX_N}")
            self.D = G.bhk_table(A)
        elif kind != "mst":
            raise InputError(f"unknown completion bound {kind!r}")

    def __call__(self, visited: int, last: int) -> float:
        key = (visited, last)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        n = self.n
        full = (1 << n) - 1
        rest = full & ~visited
        if rest == 0:
            val = float(self.A[last, 0])
        elif self.kind == "bhk" and last == 0:
            D = self.D[(1 << (n - 1)) - 1, 1:]
            val = float(np.min(D + self.A[1:, 0]))
        elif self.kind == "bhk":
            # path 0 -> rest -> last, bits shifted to the table's 1..n-1 layout
            S = (rest | (1 << last)) >> 1
            val = float(self.D[S, last])
        else:
            include = np.array([(rest >> v) & 1 or v in (0, last) for v in range(n)],
                               dtype=np.bool_)
            out = np.empty((n, 2), dtype=np.int64)
            k, _ = G.kruskal(self.A, np.zeros((n, n), dtype=np.int64), include, out)
            val = float(sum(self.A[u, v] for u, v in out[:k]))
        self.memo[key] = val
        return val


def solve_lattice(inst: Instance, C, tol: float = DEFAULT_TOL, node_cap: int = 1_000_000,
                  completion: str = "mst", incumbent: tuple | None = None,
                  trace: list | None = None) -> ExactResult:
    """Best-first branch and bound over visit prefixes.

    ``incumbent`` optionally seeds the search with ``(order, cost)``; by
    default the BBB heuristic supplies it. Returns status ``node_cap`` (not
    proven) if the cap is reached with open states left. If ``trace`` is a
    list, every generated prefix is appended to it as ``(prefix, lb)``.
    """
    t0 = time.perf_counter()
    n = inst.n
    if n < 3:
        raise InputError("a tour needs at least 3 sets")
    A = cost_array(C)
    if A.shape[0] != n:
        raise InputError(f"cost matrix is {A.shape[0]}x{A.shape[0]} but the instance has {n} sets")
    pk = inst.packed()
    bound = _Completion(A, completion)
    all_idx = np.arange(n, dtype=np.int64)
    margin = 1e-9 * (1.0 + float(A.max()))

    if incumbent is None:
        h = branch_and_bound(A, sets=pk, tol=tol)
        incumbent = (h.tour.order(), h.realized_cost)
    best_order = list(incumbent[0])
    r = realize_edges(_tour_edges(best_order), all_idx, pk, tol)
    best_cost, best_pts = r.cost, r.points

    seq = itertools.count()
    # entries: (lb, seq, prefix tuple, visited bitmask, prefix points)
    heap = [(bound(1, 0), next(seq), (0,), 1, pk.centers[[0]])]
    nodes = 0
    capped = False
    while heap:
        lb, _, prefix, visited, pts = heapq.heappop(heap)
        if lb >= best_cost - margin:
            break  # everything left is at least as expensive
        if nodes >= node_cap:
            capped = True
            break
        nodes += 1
        depth = len(prefix)
        for v in range(1, n):
            if visited >> v & 1:
                continue
            new = prefix + (v,)
            vis = visited | (1 << v)
            if depth + 1 == n:
                # orientation: keep tours whose second vertex is below the last
                if new[1] > new[-1]:
                    continue
                r = realize_edges(_tour_edges(new), all_idx, pk, tol,
                                  x0=np.vstack([pts, pk.centers[[v]]])[np.argsort(new)])
                if r.cost < best_cost:
                    best_cost, best_order, best_pts = r.cost, list(new), r.points
                continue
            # the final vertex must exceed new[1], so some unvisited one has to
            if (((1 << n) - 1) & ~vis) >> (new[1] + 1) == 0:
                continue
            sidx = np.array(new, dtype=np.int64)
            x0 = np.vstack([pts, pk.centers[[v]]])
            r = realize_edges(_path_edges(new), sidx, pk, tol, x0=x0, strict=False)
            child_lb = max(r.lower_bound, r.cost - r.residual) + bound(vis, v)
            if trace is not None:
                trace.append((new, child_lb))
            if child_lb < best_cost - margin:
                heapq.heappush(heap, (child_lb, next(seq), new, vis, r.points))
    status = Status.NODE_CAP if capped else Status.OPTIMAL
    lower = heap[0][0] if capped and heap else best_cost
    return ExactResult(best_order, float(best_cost), best_pts, nodes, Method.LATTICE,
                       status, float(min(lower, best_cost)), time.perf_counter() - t0)


def lower_bound_suite(inst: Instance, C, root: int | None = None,
                      ascent_iters: int = 1000, t0: float = 2.0,
                      decay: float = 0.95) -> dict[str, float]:
    """MST-B, MOT-B (best root), WOT-B and, for n <= 9, BoundedTour.

    WOT-B starts its ascent at the best MOT root (or ``root`` if given), so
    WOT-B >= MOT-B holds by construction.
    """
    A = cost_array(C)
    n = A.shape[0]
    if n < 3:
        raise InputError("bounds need at least 3 sets")
    out = {"MST-B": tree_cost(mst_kruskal(A), A)}
    roots = range(n) if root is None else [root]
    mots = {r: min_one_tree(A, r).cost for r in roots}
    best_root = max(mots, key=lambda r: (mots[r], -r))
    out["MOT-B"] = mots[best_root]
    out["WOT-B"] = held_karp_ascent(A, best_root, max_iter=ascent_iters, t0=t0,
                                    decay=decay).best_bound
    if n <= ENUM_MAX_N:
        out["BoundedTour"] = bhk_optimal(A)[0]
    return out
