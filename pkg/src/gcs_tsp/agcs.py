"""The augmented graph that encodes a tour as a source-to-sink path.

One subgraph per subset S of targets with 0 in S, each holding a copy of
every target. Intra-subgraph edges connect all ordered pairs; an
inter-subgraph edge moves target v from S - {v} to S, which is how a path
records that v has just been visited. Subsets are bitmasks with target 0 at
bit 0, and subgraphs are laid out by layer (|S| - 1) and then mask value.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import GuardError, InputError

MAX_N = 20
CLOSING_NOTE = "x_s = x_t"


def count_formulas(n_K: int) -> tuple[int, int, int]:
    """Closed-form (subgraphs, vertices, edges)."""
    n = int(n_K)
    if n < 2:
        raise InputError("n_K must be >= 2")
    return 2 ** (n - 1), n * 2 ** (n - 1), (n - 1) * (2 * n + 1) * 2 ** (n - 2)


def subset_str(mask: int) -> str:
    bits = [str(v) for v in range(mask.bit_length()) if mask >> v & 1]
    return "{" + ",".join(bits) + "}"


@dataclass
class AugmentedGraph:
    n: int
    subsets: np.ndarray  # masks in layer order
    targets: np.ndarray  # target of each vertex id
    vertex_subset: np.ndarray  # subset mask of each vertex id
    intra_edges: np.ndarray = field(repr=False)  # (m, 2) directed id pairs
    inter_edges: np.ndarray = field(repr=False)
    source: int = 0
    sink: int = 0
    _index: np.ndarray = field(default=None, repr=False)  # mask -> subgraph index

    @property
    def n_subgraphs(self) -> int:
        return len(self.subsets)

    @property
    def n_vertices(self) -> int:
        return len(self.targets)

    @property
    def n_edges(self) -> int:
        return len(self.intra_edges) + len(self.inter_edges)

    def counts(self) -> tuple[int, int, int]:
        return self.n_subgraphs, self.n_vertices, self.n_edges

    def vertex_id(self, target: int, mask: int) -> int:
        if not (mask & 1) or mask >> self.n:
            raise InputError(f"{subset_str(mask)} is not a subgraph key")
        if not 0 <= target < self.n:
            raise InputError(f"target {target} out of range")
        return int(self._index[mask]) * self.n + int(target)

    def vertex(self, vid: int) -> tuple[int, int]:
        return int(self.targets[vid]), int(self.vertex_subset[vid])

    @property
    def subgraphs(self) -> dict[int, list[int]]:
        n = self.n
        return {int(m): list(range(k * n, (k + 1) * n)) for k, m in enumerate(self.subsets)}

    def layer(self, mask: int) -> int:
        return bin(int(mask)).count("1") - 1

    def has_edge(self, u: int, v: int) -> bool:
        tu, su = self.vertex(u)
        tv, sv = self.vertex(v)
        if su == sv:
            return tu != tv
        # inter edge: copy of v in S - {v} to v in S
        return tu == tv and tv != 0 and sv == su | (1 << tv) and not su >> tv & 1


def build(n_K: int) -> AugmentedGraph:
    n = int(n_K)
    if not 2 <= n <= MAX_N:
        raise GuardError(f"n_K must be in [2, {MAX_N}] (got {n_K})")
    rest = np.arange(2 ** (n - 1), dtype=np.int64)
    masks = (rest << 1) | 1
    pop = np.array([bin(int(m)).count("1") for m in masks])
    masks = masks[np.lexsort((masks, pop))]
    M = len(masks)
    index = np.full(1 << n, -1, dtype=np.int32)
    index[masks] = np.arange(M, dtype=np.int32)
    idt = np.int32 if M * n < 2 ** 31 else np.int64
    targets = np.tile(np.arange(n, dtype=np.int8 if n < 128 else np.int16), M)
    vsub = np.repeat(masks, n)
    a, b = np.nonzero(~np.eye(n, dtype=bool))
    base = (np.arange(M, dtype=np.int64) * n)[:, None]
    intra = np.stack([(base + a).ravel(), (base + b).ravel()], axis=1).astype(idt)
    inter = []
    for k in range(M):
        m = int(masks[k])
        for v in range(1, n):
            if m >> v & 1:
                inter.append((int(index[m ^ (1 << v)]) * n + v, k * n + v))
    inter = np.array(inter, dtype=idt).reshape(-1, 2)
    full = (1 << n) - 1
    return AugmentedGraph(n, masks, targets, vsub, intra, inter,
                          source=int(index[1]) * n, sink=int(index[full]) * n, _index=index)


def path_to_tour(g: AugmentedGraph, path) -> list[int]:
    """Visit order read off the inter-subgraph crossings, prefixed by 0."""
    path = [int(v) for v in path]
    if len(path) < 2 or path[0] != g.source or path[-1] != g.sink:
        raise InputError("path must run from the source to the sink")
    order = [0]
    for u, v in zip(path, path[1:]):
        if not (0 <= u < g.n_vertices and 0 <= v < g.n_vertices) or not g.has_edge(u, v):
            raise InputError(f"({u}, {v}) is not an edge of the augmented graph")
        tu, su = g.vertex(u)
        tv, sv = g.vertex(v)
        if su != sv:
            order.append(tv)
    if sorted(order) != list(range(g.n)):
        raise InputError("path does not visit every target exactly once")
    return order


def tour_to_path(g: AugmentedGraph, order) -> list[int]:
    """Canonical path for a visit order: one intra and one inter edge per layer."""
    order = [int(v) for v in order]
    if sorted(order) != list(range(g.n)) or order[0] != 0:
        raise InputError("order must be a permutation of 0..n-1 starting at 0")
    path = [g.source]
    mask = 1
    for v in order[1:]:
        path.append(g.vertex_id(v, mask))
        mask |= 1 << v
        path.append(g.vertex_id(v, mask))
    path.append(g.sink)
    return path


def export_dot(g: AugmentedGraph) -> str:
    """Graphviz text, one cluster per subgraph, layers left to right."""
    lines = ["digraph AGCS {", "  rankdir=LR;", "  node [shape=circle];"]
    n = g.n
    for k, m in enumerate(g.subsets):
        m = int(m)
        lines.append(f"  subgraph cluster_{m} {{")
        lines.append(f'    label="S={subset_str(m)}";')
        for t in range(n):
            vid = k * n + t
            extra = ""
            if vid == g.source:
                extra = ', shape=doublecircle, xlabel="source"'
            elif vid == g.sink:
                extra = f', shape=doublecircle, xlabel="sink: {CLOSING_NOTE}"'
            lines.append(f'    v{vid} [label="K{t}"{extra}];')
        lines.append("  }")
    for u, v in g.intra_edges:
        lines.append(f"  v{u} -> v{v};")
    for u, v in g.inter_edges:
        lines.append(f"  v{u} -> v{v} [style=bold];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_json(g: AugmentedGraph) -> str:
    doc = {
        "format_version": 1,
        "n_K": g.n,
        "subsets": [int(m) for m in g.subsets],
        "vertices": [{"id": i, "target": int(t), "subset": int(s)}
                     for i, (t, s) in enumerate(zip(g.targets, g.vertex_subset))],
        "intra_edges": g.intra_edges.tolist(),
        "inter_edges": g.inter_edges.tolist(),
        "source": g.source,
        "sink": g.sink,
        "sink_constraint": CLOSING_NOTE,
    }
    return json.dumps(doc, indent=1) + "\n"
