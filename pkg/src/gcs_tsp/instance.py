"""Random instances, their file format, and set-to-set cost matrices.

Instances are generated with a small portable PRNG (splitmix64) so a seed
reproduces the same polytopes in any language; the constants are listed in
``docs/instance_format.md``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InputError, NumericalError
from .geometry import DEFAULT_TOL, Polytope, pack, pair_distance

FORMAT_VERSION = 1
CELL_WIDTH = 1.0
HALF_WIDTH = 0.45
RADIUS_CAP = 0.45  # every set lies in this ball (cell widths) around its cell center
OFFSET_RANGE = (0.15, 0.45)
N_DIRECTIONS = (6, 10)

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """splitmix64: one 64-bit add, two xor-shift-multiply rounds, a final xor-shift."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def below(self, m: int) -> int:
        """Unbiased integer in [0, m) by rejection."""
        if m <= 0:
            raise ValueError("m must be positive")
        limit = (1 << 64) - ((1 << 64) % m)
        while True:
            z = self.next_u64()
            if z < limit:
                return z % m

    def normal(self) -> float:
        # Box-Muller, cosine branch only (keeps the stream stateless)
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class Instance:
    d: int
    sets: tuple
    seed: int = 0
    grid: int = 0

    def __post_init__(self):
        sets = tuple(self.sets)
        object.__setattr__(self, "sets", sets)
        if not sets:
            raise InputError("an instance needs at least one set")
        if any(not isinstance(P, Polytope) for P in sets):
            raise InputError("sets must be Polytope objects")
        if any(P.d != self.d for P in sets):
            raise InputError(f"every set must have dimension {self.d}")

    @property
    def n(self) -> int:
        return len(self.sets)

    def packed(self):
        # packing caches faces and vertices on the polytopes; cheap after the first call
        return pack(list(self.sets))


@dataclass
class BoundedCostMatrix:
    """Symmetric pairwise cost matrix with zero diagonal.

    ``witnesses[i, j]`` (optional) is the point of set i realizing the cost
    to set j.
    """

    costs: np.ndarray
    witnesses: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        C = np.array(self.costs, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise InputError("cost matrix must be square")
        if not np.all(np.isfinite(C)) or np.any(C < 0):
            raise InputError("costs must be finite and nonnegative")
        if np.any(np.diag(C) != 0.0):
            raise InputError("cost matrix diagonal must be zero")
        if not np.array_equal(C, C.T):
            raise InputError("cost matrix must be symmetric")
        C.flags.writeable = False
        self.costs = C

    @property
    def n(self) -> int:
        return self.costs.shape[0]

    def __getitem__(self, ij):
        return self.costs[ij]


def _cell_center(cell: int, grid: int, d: int) -> np.ndarray:
    c = np.empty(d)
    for a in range(d):
        cell, r = divmod(cell, grid)
        c[a] = (r + 0.5) * CELL_WIDTH
    return c


def _direction(rng: SplitMix64, d: int) -> np.ndarray:
    if d == 2:
        th = 2.0 * math.pi * rng.uniform()
        return np.array([math.cos(th), math.sin(th)])
    while True:
        v = np.array([rng.normal() for _ in range(d)])
        nv = float(np.linalg.norm(v))
        if nv > 1e-12:
            return v / nv


def random_polytope(rng: SplitMix64, center: np.ndarray) -> Polytope:
    """Random directions with random offsets, clipped to the cell's inner box and
    shrunk about the cell center if a vertex lies outside the radius cap."""
    d = center.shape[0]
    lo, hi = N_DIRECTIONS
    k = lo + rng.below(hi - lo + 1)
    rows, rhs = [], []
    for _ in range(k):
        h = _direction(rng, d)
        off = OFFSET_RANGE[0] + (OFFSET_RANGE[1] - OFFSET_RANGE[0]) * rng.uniform()
        rows.append(h)
        rhs.append(float(h @ center) + off * CELL_WIDTH)
    for a in range(d):
        e = np.zeros(d)
        e[a] = 1.0
        rows.append(e)
        rhs.append(float(center[a]) + HALF_WIDTH * CELL_WIDTH)
        rows.append(-e)
        rhs.append(-float(center[a]) + HALF_WIDTH * CELL_WIDTH)
    H, g = np.array(rows), np.array(rhs)
    reach = float(np.max(np.linalg.norm(Polytope(H, g).vertices - center, axis=1)))
    cap = RADIUS_CAP * CELL_WIDTH
    if reach > cap:
        hc = H @ center
        g = hc + (g - hc) * (cap / reach)
    return Polytope(H, g)


def generate(n_K: int, d: int = 2, seed: int = 0) -> Instance:
    """``n_K`` random polytopes in distinct cells of an ``n_K``-per-axis grid."""
    if int(n_K) != n_K or n_K < 3:
        raise InputError("n_K must be an integer >= 3")
    if int(d) != d or d < 1:
        raise InputError("d must be a positive integer")
    n_K, d = int(n_K), int(d)
    cells = n_K ** d
    rng = SplitMix64(seed)
    # partial Fisher-Yates over the cell indices; a dict keeps it sparse
    swapped: dict[int, int] = {}
    chosen = []
    for i in range(n_K):
        j = i + rng.below(cells - i)
        vi, vj = swapped.get(i, i), swapped.get(j, j)
        swapped[i], swapped[j] = vj, vi
        chosen.append(vj)
    sets = [random_polytope(rng, _cell_center(c, n_K, d)) for c in chosen]
    return Instance(d, tuple(sets), int(seed) & MASK64, n_K)


def bounded_matrix(inst: Instance, tol: float = DEFAULT_TOL) -> BoundedCostMatrix:
    """Minimum set-to-set distances for every pair, with witnesses."""
    pk = inst.packed()
    n, d = pk.n, pk.d
    C = np.zeros((n, n))
    W = np.empty((n, n, d))
    W[np.arange(n), np.arange(n)] = pk.centers
    for i in range(n):
        for j in range(i + 1, n):
            try:
                md = pair_distance(pk, i, j, tol)
            except NumericalError as exc:
                raise NumericalError(f"pair ({i}, {j}): {exc}", best=exc.best,
                                     residual=exc.residual) from exc
            C[i, j] = C[j, i] = md.cost
            W[i, j] = md.xP
            W[j, i] = md.xQ
    return BoundedCostMatrix(C, W)


def chebyshev_matrix(inst: Instance) -> BoundedCostMatrix:
    """Distances between Chebyshev centers."""
    X = np.array([P.chebyshev[0] for P in inst.sets])
    C = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 0.0)
    W = np.broadcast_to(X[:, None, :], (len(X), len(X), X.shape[1])).copy()
    return BoundedCostMatrix(C, W)


def point_instance(points: Sequence[Sequence[float]], seed: int = 0) -> Instance:
    """Degenerate instance with one singleton set per point."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise InputError("points must be a 2-D array")
    return Instance(pts.shape[1], tuple(Polytope.point(p) for p in pts), seed, 0)


# -- serialization -------------------------------------------------------

def serialize(inst: Instance) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "d": inst.d,
        "n_K": inst.n,
        "seed": inst.seed,
        "grid": inst.grid,
        "prng": "splitmix64",
        "sets": [{"id": i, "H": P.H.tolist(), "g": P.g.tolist()}
                 for i, P in enumerate(inst.sets)],
    }
    # json writes floats with repr, the shortest round-trip form
    return json.dumps(doc, indent=1) + "\n"


def parse(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"instance file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("instance document must be an object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise InputError(f"unsupported format_version {version!r}")
    try:
        d = int(doc["d"])
        records = sorted(doc["sets"], key=lambda r: int(r["id"]))
        sets = tuple(Polytope(r["H"], r["g"]) for r in records)
        seed, grid, n_K = int(doc.get("seed", 0)), int(doc.get("grid", 0)), int(doc["n_K"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed instance file: {exc}") from exc
    if [int(r["id"]) for r in records] != list(range(len(records))):
        raise InputError("set ids must be 0..n_K-1")
    if n_K != len(sets):
        raise InputError(f"header says n_K={n_K} but {len(sets)} sets are present")
    return Instance(d, sets, seed, grid)


def save(inst: Instance, path) -> None:
    Path(path).write_text(serialize(inst))


def load(path) -> Instance:
    return parse(Path(path).read_text())


def matrix_csv(C: BoundedCostMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "cost"])
    n = C.n
    for i in range(n):
        for j in range(i + 1, n):
            w.writerow([i, j, repr(float(C.costs[i, j]))])
    return buf.getvalue()


def read_matrix_csv(text: str) -> BoundedCostMatrix:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise InputError("matrix CSV has no rows")
    n = max(max(int(r["i"]), int(r["j"])) for r in rows) + 1
    C = np.zeros((n, n))
    for r in rows:
        i, j = int(r["i"]), int(r["j"])
        C[i, j] = C[j, i] = float(r["cost"])
    return BoundedCostMatrix(C)
