"""Fixed-topology realization: place one point in each polytope so that the
total Euclidean length of a given edge set is minimal.

With the discrete structure fixed the problem is convex. The solver
minimises a smoothed sum of edge lengths by spectral projected gradient and
stops on a certified duality gap below ``tol``, or on a stall at the finest
smoothing level. ``Realization.residual`` is the certified gap in either case
and ``Realization.lower_bound`` is always a rigorous bound.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from . import _kernels as K
from .errors import InputError, NumericalError
from .geometry import DEFAULT_TOL, PolytopePack, pack

EPS_SCHEDULE = np.array([1e-2, 1e-4, 1e-6, 1e-8, 1e-10])
MAX_ITER = 50_000
STALL_WINDOW = 25
CHECK_EVERY = 5
STALL_REL = 1e-3


class Kind(str, Enum):
    PATH = "path"
    TREE = "tree"
    ONE_TREE = "one_tree"
    TOUR = "tour"
    GENERAL = "general"


def _norm_edge(u, v):
    u, v = int(u), int(v)
    return (u, v) if u < v else (v, u)


def _components(vertices, edges):
    parent = {v: v for v in vertices}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in edges:
        parent[find(u)] = find(v)
    return len({find(v) for v in vertices})


@dataclass(frozen=True)
class Topology:
    """Undirected edge set over vertex indices ``0..n-1``.

    ``support`` restricts the spanned vertex set (used for trees built with
    excluded vertices); ``root`` is the designated root of a one-tree.
    """

    n: int
    edges: tuple
    kind: Kind = Kind.GENERAL
    root: int | None = None
    support: frozenset | None = None

    def __post_init__(self):
        edges = tuple(sorted(_norm_edge(u, v) for u, v in self.edges))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "kind", Kind(self.kind))
        if len(set(edges)) != len(edges):
            raise InputError("duplicate edge")
        for u, v in edges:
            if u == v or u < 0 or v >= self.n:
                raise InputError(f"invalid edge ({u}, {v}) for n={self.n}")
        self._validate()

    def _validate(self):
        verts = sorted(self.support) if self.support is not None else list(range(self.n))
        vset = set(verts)
        if any(u not in vset or v not in vset for u, v in self.edges):
            raise InputError("edge touches a vertex outside the support")
        deg = self.degrees()
        connected = _components(verts, self.edges) == 1 if verts else True
        kind, m, nv = self.kind, len(self.edges), len(verts)
        if kind is Kind.GENERAL:
            return
        if not connected:
            raise InputError(f"{kind.value} topology must be connected")
        if kind is Kind.TREE and m != nv - 1:
            raise InputError("tree needs |V|-1 edges")
        if kind is Kind.PATH:
            if m != nv - 1 or (nv > 1 and sorted(deg[v] for v in verts)[:2] != [1, 1]) \
                    or any(deg[v] > 2 for v in verts):
                raise InputError("not a simple path")
        if kind is Kind.TOUR:
            if nv < 3 or m != nv or any(deg[v] != 2 for v in verts):
                raise InputError("tour needs every vertex at degree 2 on a single cycle")
        if kind is Kind.ONE_TREE:
            if m != nv or self.root is None or deg[self.root] != 2:
                raise InputError("one-tree needs |V| edges and a degree-2 root")
            rest = [v for v in verts if v != self.root]
            sub = [e for e in self.edges if self.root not in e]
            if _components(rest, sub) != 1:
                raise InputError("one-tree minus its root must be a spanning tree")

    @classmethod
    def tour(cls, order: Sequence[int]) -> Topology:
        order = [int(v) for v in order]
        n = len(order)
        if sorted(order) != list(range(n)):
            raise InputError("tour order must be a permutation of 0..n-1")
        return cls(n, [(order[k], order[(k + 1) % n]) for k in range(n)], Kind.TOUR)

    @classmethod
    def path(cls, order: Sequence[int], n: int | None = None) -> Topology:
        order = [int(v) for v in order]
        n = len(order) if n is None else n
        support = frozenset(order) if len(order) != n else None
        return cls(n, [(order[k], order[k + 1]) for k in range(len(order) - 1)],
                   Kind.PATH, support=support)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def is_tour(self) -> bool:
        if self.n < 3 or len(self.edges) != self.n or np.any(self.degrees() != 2):
            return False
        return _components(range(self.n), self.edges) == 1

    def order(self) -> list[int]:
        """Cyclic visit order of a tour, from 0 toward its smaller neighbour."""
        if not self.is_tour():
            raise InputError("order() is only defined for tours")
        adj = defaultdict(list)
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        out = [0, min(adj[0])]
        while len(out) < self.n:
            a, b = adj[out[-1]]
            out.append(a if a != out[-2] else b)
        return out

    def edge_array(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)


@dataclass
class Realization:
    points: np.ndarray
    cost: float
    residual: float
    iterations: int
    lower_bound: float = field(default=0.0)


def _as_pack(sets) -> PolytopePack:
    if isinstance(sets, PolytopePack):
        return sets
    return pack(list(sets))


def realize_edges(edges: np.ndarray, sidx: np.ndarray, pk: PolytopePack,
                  tol: float = DEFAULT_TOL, x0: np.ndarray | None = None,
                  pinned: np.ndarray | None = None, strict: bool = True) -> Realization:
    """Kernel entry: vertex ``i`` of ``edges`` lives in polytope ``sidx[i]``."""
    n = sidx.shape[0]
    if x0 is None:
        x0 = pk.centers[sidx]
    x0 = np.ascontiguousarray(x0, dtype=float)
    if pinned is None:
        pinned = np.zeros(n, dtype=np.bool_)
    out = np.empty_like(x0)
    cost, gap, lower, iters, status = K.realize(
        x0, edges, sidx, pinned, pk.H, pk.g, pk.rptr, pk.V, pk.vptr, pk.FM,
        pk.Fc, pk.FB, pk.Fk, pk.fptr, tol, pk.diameter, EPS_SCHEDULE, MAX_ITER, STALL_WINDOW,
        CHECK_EVERY, STALL_REL, out)
    res = Realization(out, float(cost), float(max(gap, 0.0)), int(iters), float(lower))
    # A stall at the final smoothing level is accepted as convergence; the
    # residual then reports the (looser) certified gap honestly.
    if strict and status == K.MAXITER:
        raise NumericalError(
            f"realization hit the iteration cap with certified gap {gap:.3e}",
            best=res, residual=float(gap))
    return res


def realize(topology: Topology, sets, tol: float = DEFAULT_TOL,
            pinned: Mapping[int, Sequence[float]] | None = None,
            x0: np.ndarray | None = None) -> Realization:
    """Optimal points for a fixed topology.

    ``sets`` is a sequence of :class:`Polytope` (or a prebuilt pack). Pinned
    vertices are held at the given points, which must lie in their sets.
    """
    pk = _as_pack(sets)
    if topology.n != pk.n:
        raise InputError(f"topology has {topology.n} vertices but {pk.n} sets were given")
    sidx = np.arange(pk.n, dtype=np.int64)
    start = np.array(pk.centers if x0 is None else x0, dtype=float)
    if start.shape != (pk.n, pk.d):
        raise InputError(f"x0 must have shape {(pk.n, pk.d)}")
    mask = np.zeros(pk.n, dtype=np.bool_)
    for v, p in (pinned or {}).items():
        p = np.asarray(p, dtype=float).reshape(-1)
        rows = slice(pk.rptr[v], pk.rptr[v + 1])
        if p.shape[0] != pk.d or np.any(pk.H[rows] @ p > pk.g[rows] + tol):
            raise InputError(f"pinned point for vertex {v} is not in its set")
        start[v] = p
        mask[v] = True
    return realize_edges(topology.edge_array(), sidx, pk, tol, start, mask)


def realized_cost(topology: Topology, sets, tol: float = DEFAULT_TOL) -> float:
    return realize(topology, sets, tol).cost


def bounded_cost_of(topology: Topology, C) -> float:
    """Sum of bounded (set-to-set) edge costs over the topology's edges."""
    costs = np.asarray(getattr(C, "costs", C), dtype=float)
    total = 0.0
    for u, v in topology.edges:
        if u >= costs.shape[0] or v >= costs.shape[1] or not np.isfinite(costs[u, v]):
            raise InputError(f"cost matrix has no entry for edge ({u}, {v})")
        total += costs[u, v]
    return float(total)
