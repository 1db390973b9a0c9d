"""Classical graph layer over a static cost matrix.

Kruskal with forced/forbidden edges, minimum 1-trees, the Held-Karp
ascent (the WOT-B bound), the greedy tour and 2-opt. Ties are always
broken by the lowest vertex or lexicographic edge index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _graph as G
from .convex import Kind, Topology
from .errors import InfeasibleError, InputError

ASCENT_ITERS = 1000
ASCENT_T0 = 2.0
ASCENT_DECAY = 0.95


def _pair(e) -> tuple[int, int]:
    u, v = (int(x) for x in e)
    if u == v:
        raise InputError(f"self-loop ({u}, {v}) is not an edge")
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class EdgeConstraintSet:
    """Forced edges S_Y and forbidden edges S_X."""

    forced: frozenset = frozenset()
    forbidden: frozenset = frozenset()

    def __post_init__(self):
        forced = frozenset(_pair(e) for e in self.forced)
        forbidden = frozenset(_pair(e) for e in self.forbidden)
        object.__setattr__(self, "forced", forced)
        object.__setattr__(self, "forbidden", forbidden)
        both = forced & forbidden
        if both:
            raise InfeasibleError(f"edges both forced and forbidden: {sorted(both)}")
        deg: dict[int, int] = {}
        for u, v in forced:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        over = sorted(v for v, k in deg.items() if k > 2)
        if over:
            raise InfeasibleError(f"more than two forced edges at vertices {over}")

    def force(self, e) -> EdgeConstraintSet:
        return EdgeConstraintSet(self.forced | {_pair(e)}, self.forbidden)

    def forbid(self, e) -> EdgeConstraintSet:
        return EdgeConstraintSet(self.forced, self.forbidden | {_pair(e)})

    def status(self, n: int) -> np.ndarray:
        S = np.zeros((n, n), dtype=np.int64)
        for u, v in self.forced:
            if v >= n:
                raise InputError(f"forced edge ({u}, {v}) out of range for n={n}")
            S[u, v] = S[v, u] = G.FORCED
        for u, v in self.forbidden:
            if v >= n:
                raise InputError(f"forbidden edge ({u}, {v}) out of range for n={n}")
            S[u, v] = S[v, u] = G.FORBIDDEN
        return S

    def admits(self, topology: Topology) -> bool:
        """True when the edge set contains every forced and no forbidden edge."""
        edges = set(topology.edges)
        return self.forced <= edges and not (self.forbidden & edges)


NO_CONSTRAINTS = EdgeConstraintSet()


@dataclass(frozen=True)
class Penalties:
    pi: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float).reshape(-1)
        if not np.all(np.isfinite(pi)):
            raise InputError("penalties must be finite")
        pi.flags.writeable = False
        object.__setattr__(self, "pi", pi)

    @classmethod
    def zeros(cls, n: int) -> Penalties:
        return cls(np.zeros(n))


@dataclass(frozen=True)
class OneTree:
    topology: Topology
    root: int
    penalized_cost: float
    cost: float  # unbiased: penalized_cost - 2 * sum(pi)
    degrees: np.ndarray = field(repr=False)

    @property
    def is_tour(self) -> bool:
        return bool(np.all(self.degrees == 2))


@dataclass(frozen=True)
class AscentResult:
    pi: Penalties
    best_bound: float
    tree: OneTree
    iterations: int
    last_pi: Penalties


def cost_array(C) -> np.ndarray:
    """Accept a BoundedCostMatrix or anything array-like."""
    A = np.asarray(getattr(C, "costs", C), dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("cost matrix must be square")
    return np.ascontiguousarray(A)


def _pi_array(pi, n: int) -> np.ndarray:
    if pi is None:
        return np.zeros(n)
    arr = np.asarray(getattr(pi, "pi", pi), dtype=float).reshape(-1)
    if arr.shape[0] != n:
        raise InputError(f"penalty vector has length {arr.shape[0]}, expected {n}")
    return np.ascontiguousarray(arr)


def _raise_code(code: int):
    if code == G.CYCLE:
        raise InfeasibleError("forced edges contain a cycle")
    if code == G.DISCONNECTED:
        raise InfeasibleError("graph is disconnected once forbidden edges are removed")
    if code == G.ROOT:
        raise InfeasibleError("root cannot receive exactly two edges under the constraints")


def mst_kruskal(C, constraints: EdgeConstraintSet = NO_CONSTRAINTS,
                exclude: Iterable[int] = ()) -> Topology:
    A = cost_array(C)
    n = A.shape[0]
    include = np.ones(n, dtype=np.bool_)
    for v in exclude:
        include[int(v)] = False
    out = np.empty((max(n - 1, 1), 2), dtype=np.int64)
    k, code = G.kruskal(A, constraints.status(n), include, out)
    _raise_code(code)
    support = frozenset(np.flatnonzero(include).tolist())
    return Topology(n, [tuple(e) for e in out[:k].tolist()], Kind.TREE,
                    support=None if len(support) == n else support)


def tree_cost(topology: Topology, C) -> float:
    A = cost_array(C)
    return float(sum(A[u, v] for u, v in topology.edges))


def min_one_tree(C, root: int = 0, pi=None,
                 constraints: EdgeConstraintSet = NO_CONSTRAINTS) -> OneTree:
    A = cost_array(C)
    n = A.shape[0]
    if n < 3:
        raise InputError("a 1-tree needs at least 3 vertices")
    if not 0 <= root < n:
        raise InputError(f"root {root} out of range")
    p = _pi_array(pi, n)
    W = A + p[:, None] + p[None, :]
    edges = np.empty((n, 2), dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    w, code = G.one_tree(W, constraints.status(n), root, edges, deg)
    _raise_code(code)
    return _make_tree(edges, deg, root, float(w), float(w - 2.0 * p.sum()))


def _make_tree(edges, deg, root, penalized, unbiased) -> OneTree:
    n = len(deg)
    topo = Topology(n, [tuple(e) for e in edges.tolist()], Kind.ONE_TREE, root=int(root))
    deg = deg.copy()
    deg.flags.writeable = False
    return OneTree(topo, int(root), penalized, unbiased, deg)


def ascent_step(pi, degrees, t: float) -> np.ndarray:
    """One Held-Karp update pi + t (d - 2)."""
    pi = np.asarray(getattr(pi, "pi", pi), dtype=float)
    return pi + t * (np.asarray(degrees, dtype=float) - 2.0)


def held_karp_ascent(C, root: int = 0, constraints: EdgeConstraintSet = NO_CONSTRAINTS,
                     max_iter: int = ASCENT_ITERS, t0: float = ASCENT_T0,
                     decay: float = ASCENT_DECAY, pi0=None) -> AscentResult:
    """Best 1-tree bound over the ascent iterates (iterate 0 included)."""
    A = cost_array(C)
    n = A.shape[0]
    if max_iter < 1:
        raise InputError("max_iter must be >= 1")
    if n < 3:
        raise InputError("the ascent needs at least 3 vertices")
    p0 = _pi_array(pi0, n)
    best_pi = np.empty(n)
    last_pi = np.empty(n)
    edges = np.empty((n, 2), dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    bound, iters, code, _ = G.ascent(A, constraints.status(n), root, p0, int(max_iter),
                                     float(t0), float(decay), best_pi, edges, deg, last_pi)
    _raise_code(code)
    penalized = float(bound + 2.0 * best_pi.sum())
    tree = _make_tree(edges, deg, root, penalized, float(bound))
    return AscentResult(Penalties(best_pi), float(bound), tree, int(iters), Penalties(last_pi))


def tour_cost(order: Sequence[int], C) -> float:
    return float(G.tour_cost(cost_array(C), np.asarray(order, dtype=np.int64)))


def greedy_tour(C, start: int = 0) -> Topology:
    """Nearest unvisited neighbour from ``start``; ties go to the lowest index."""
    A = cost_array(C)
    n = A.shape[0]
    if n < 3:
        raise InputError("a tour needs at least 3 vertices")
    if not 0 <= start < n:
        raise InputError(f"start {start} out of range")
    seen = np.zeros(n, dtype=bool)
    order = [int(start)]
    seen[start] = True
    for _ in range(n - 1):
        row = np.where(seen, np.inf, A[order[-1]])
        nxt = int(np.argmin(row))  # argmin returns the first (lowest) index on ties
        order.append(nxt)
        seen[nxt] = True
    return Topology.tour(order)


def two_opt_move(order: Sequence[int], i: int, j: int) -> list[int]:
    """Replace edges (o[i], o[i+1]) and (o[j], o[j+1]) by reversing o[i+1..j]."""
    o = list(order)
    if not 0 <= i < j < len(o):
        raise InputError("need 0 <= i < j < n")
    o[i + 1: j + 1] = o[i + 1: j + 1][::-1]
    return o


def _tour_order(tour) -> list[int]:
    if isinstance(tour, Topology):
        return tour.order()
    order = [int(v) for v in tour]
    if sorted(order) != list(range(len(order))):
        raise InputError("tour order must be a permutation of 0..n-1")
    return order


def two_opt(tour, C, evaluator: Callable[[Topology], float] | None = None,
            max_passes: int | None = None) -> Topology:
    """First-improvement 2-opt to local optimality.

    Without an evaluator moves are judged by matrix cost. With one, a move
    is accepted when ``evaluator(candidate) < evaluator(current)`` (e.g.
    realized cost); the scan then continues from the next candidate.
    """
    A = cost_array(C)
    order = _tour_order(tour)
    n = len(order)
    if n < 4:
        return Topology.tour(order)
    if evaluator is None:
        out, _ = G.two_opt_matrix(A, np.asarray(order, dtype=np.int64))
        return Topology.tour(out.tolist())
    # evaluations are expensive, so keep scanning after a move instead of
    # restarting; a full pass without a move still certifies local optimality
    best = float(evaluator(Topology.tour(order)))
    passes = 0
    improved = True
    while improved and (max_passes is None or passes < max_passes):
        improved = False
        passes += 1
        for i in range(n - 2):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                cand = two_opt_move(order, i, j)
                val = float(evaluator(Topology.tour(cand)))
                if val < best - 1e-12:
                    order, best = cand, val
                    improved = True
    return Topology.tour(order)


def bhk_optimal(C) -> tuple[float, list[int]]:
    """Optimal matrix tour by the Bellman-Held-Karp dynamic program (n <= 20)."""
    A = cost_array(C)
    n = A.shape[0]
    if n < 3:
        raise InputError("a tour needs at least 3 vertices")
    if n > 20:
        raise InputError("the subset table is limited to n <= 20")
    D = G.bhk_table(A)
    full = (1 << (n - 1)) - 1
    closing = D[full, 1:] + A[1:, 0]
    j = int(np.argmin(closing)) + 1
    best = float(closing[j - 1])
    order = [j]
    S = full
    while S != (1 << (j - 1)):
        prev = S ^ (1 << (j - 1))
        cands = [k for k in range(1, n) if prev >> (k - 1) & 1]
        k = min(cands, key=lambda k: (D[prev, k] + A[k, j], k))
        order.append(k)
        S, j = prev, k
    order.append(0)
    return best, order[::-1]
