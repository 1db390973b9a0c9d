"""Polytopes in halfspace form and the primitives built on them.

A :class:`Polytope` is ``{x : H x <= g}``. Construction rejects empty and
unbounded systems. Projection is exact: every face of the polytope is
enumerated once (lazily) and a query point is projected onto each face's
affine hull; the nearest candidate that lies in the polytope is the answer.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linprog

from . import _kernels as K
from .errors import (EmptyPolytopeError, InputError, NumericalError,
                     UnboundedPolytopeError)

DEFAULT_TOL = 1e-7
MAX_ITER = 10_000
WOLFE_ITER = 1_000


class Polytope:
    """Convex polytope ``{x in R^d : H x <= g}``.

    Arrays are copied and frozen; instances are immutable and hashable by
    content.
    """

    def __init__(self, H, g, *, check: bool = True):
        H = np.array(H, dtype=float, ndmin=2)
        g = np.array(g, dtype=float).reshape(-1)
        if H.ndim != 2 or H.shape[0] != g.shape[0]:
            raise InputError(f"H {H.shape} and g {g.shape} do not agree")
        if H.shape[1] < 1:
            raise InputError("dimension must be positive")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
            raise InputError("H and g must be finite")
        H.flags.writeable = False
        g.flags.writeable = False
        self.H = H
        self.g = g
        if check:
            if H.shape[0] < H.shape[1] + 1:
                raise UnboundedPolytopeError(
                    f"{H.shape[0]} halfspaces cannot bound a set in R^{H.shape[1]}")
            self._check_bounded()

    @classmethod
    def box(cls, lo, hi) -> Polytope:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        d = lo.shape[0]
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @classmethod
    def point(cls, p) -> Polytope:
        return cls.box(p, p)

    @property
    def d(self) -> int:
        return self.H.shape[1]

    @property
    def m_rows(self) -> int:
        return self.H.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Polytope):
            return NotImplemented
        return np.array_equal(self.H, other.H) and np.array_equal(self.g, other.g)

    def __hash__(self):
        return hash((self.H.tobytes(), self.g.tobytes()))

    def __repr__(self):
        return f"Polytope(d={self.d}, rows={self.m_rows})"

    def _check_bounded(self):
        # {Hx <= g} is bounded iff the rows positively span R^d, i.e. H has
        # full column rank and H^T lam = 0 for some lam >= 1 (one LP)
        m, d = self.H.shape
        if np.linalg.matrix_rank(self.H) < d:
            raise UnboundedPolytopeError("rows do not span R^d")
        res = linprog(np.zeros(m), A_eq=self.H.T, b_eq=np.zeros(d),
                      bounds=[(1.0, None)] * m, method="highs")
        if res.status == 2:
            raise UnboundedPolytopeError("rows do not positively span R^d")
        if res.status != 0:
            raise NumericalError(f"boundedness LP failed: {res.message}")
        self.chebyshev  # raises on an empty system

    @cached_property
    def chebyshev(self) -> tuple[np.ndarray, float]:
        norms = np.linalg.norm(self.H, axis=1)
        c = np.zeros(self.d + 1)
        c[-1] = -1.0
        A = np.hstack([self.H, norms[:, None]])
        res = linprog(c, A_ub=A, b_ub=self.g,
                      bounds=[(None, None)] * self.d + [(0, None)], method="highs")
        if res.status == 2:
            raise EmptyPolytopeError("halfspace system is infeasible")
        if res.status != 0:
            raise NumericalError(f"Chebyshev LP failed: {res.message}")
        center = res.x[:-1].copy()
        center.flags.writeable = False
        r = float(res.x[-1])
        return center, r if r > 0.0 else 0.0

    @cached_property
    def _scale(self) -> float:
        return 1e-9 * (1.0 + float(np.max(np.abs(self.g))))

    @cached_property
    def vertices(self) -> np.ndarray:
        """Vertices (internal; used for support functions and faces)."""
        d = self.d
        tol = self._scale
        found = []
        for S in itertools.combinations(range(self.m_rows), d):
            A = self.H[list(S)]
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            v = np.linalg.solve(A, self.g[list(S)])
            if np.all(self.H @ v <= self.g + tol):
                if not any(np.max(np.abs(v - u)) <= 1e3 * tol for u in found):
                    found.append(v)
        if not found:
            raise NumericalError("no vertices found for a bounded polytope")
        out = np.array(found)
        out.flags.writeable = False
        return out

    @cached_property
    def faces(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Per-face affine projectors and direction bases.

        Returns ``(M, c, B, k)``: face f maps y to ``M[f] @ y + c[f]`` and
        ``B[f, :, :k[f]]`` spans the face's affine hull. Face 0 is the
        whole space (the interior candidate). Hulls are taken from each
        face's vertices rather than from its rows, which stays accurate when
        nearly parallel rows meet at a vertex.
        """
        d = self.d
        V = self.vertices
        tol = 1e3 * self._scale
        tight = np.abs(V @ self.H.T - self.g) <= tol
        # vertex set of each row as a bitmask; a face's set is an AND of these
        masks = [sum(1 << int(v) for v in np.flatnonzero(tight[:, r]))
                 for r in range(self.m_rows)]
        Ms = [np.eye(d)]
        cs = [np.zeros(d)]
        Bs = [np.eye(d)]
        ks = [d]
        seen = set()
        for k in range(1, d + 1):
            for S in itertools.combinations(range(self.m_rows), k):
                key = masks[S[0]]
                for r in S[1:]:
                    key &= masks[r]
                if key == 0 or key in seen:
                    continue
                seen.add(key)
                on = [v for v in range(len(V)) if key >> v & 1]
                base = V[on].mean(axis=0)
                B = np.zeros((d, d))
                kf = 0
                if len(on) > 1:
                    _, sv, vt = np.linalg.svd(V[on] - base)
                    kf = int(np.sum(sv > tol))
                    B[:, :kf] = vt[:kf].T
                P = B[:, :kf] @ B[:, :kf].T
                Ms.append(P)
                cs.append(base - P @ base)
                Bs.append(B)
                ks.append(kf)
        return (np.array(Ms), np.array(cs), np.array(Bs),
                np.array(ks, dtype=np.int64))


@dataclass(frozen=True)
class PolytopePack:
    """Concatenated kernel arrays for a list of polytopes."""

    d: int
    n: int
    H: np.ndarray
    g: np.ndarray
    rptr: np.ndarray
    V: np.ndarray
    vptr: np.ndarray
    FM: np.ndarray
    Fc: np.ndarray
    FB: np.ndarray
    Fk: np.ndarray
    fptr: np.ndarray
    centers: np.ndarray
    diameter: float


def pack(sets: Sequence[Polytope]) -> PolytopePack:
    if not sets:
        raise InputError("need at least one polytope")
    d = sets[0].d
    if any(P.d != d for P in sets):
        raise InputError("all polytopes must share a dimension")

    def ptr(sizes):
        return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    faces = [P.faces for P in sets]
    V = np.vstack([P.vertices for P in sets])
    span = V.max(axis=0) - V.min(axis=0)
    return PolytopePack(
        d=d,
        n=len(sets),
        H=np.ascontiguousarray(np.vstack([P.H for P in sets])),
        g=np.ascontiguousarray(np.concatenate([P.g for P in sets])),
        rptr=ptr([P.m_rows for P in sets]),
        V=np.ascontiguousarray(V),
        vptr=ptr([len(P.vertices) for P in sets]),
        FM=np.ascontiguousarray(np.concatenate([f[0] for f in faces])),
        Fc=np.ascontiguousarray(np.concatenate([f[1] for f in faces])),
        FB=np.ascontiguousarray(np.concatenate([f[2] for f in faces])),
        Fk=np.concatenate([f[3] for f in faces]),
        fptr=ptr([len(f[3]) for f in faces]),
        centers=np.array([P.chebyshev[0] for P in sets]),
        diameter=float(max(np.linalg.norm(span), 1.0)),
    )


def _point(P: Polytope, x, name="x") -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != P.d:
        raise InputError(f"{name} has dimension {x.shape[0]}, polytope has {P.d}")
    if not np.all(np.isfinite(x)):
        raise InputError(f"{name} must be finite")
    return x


def contains(P: Polytope, x, tol: float = 0.0) -> bool:
    x = _point(P, x)
    return bool(np.all(P.H @ x <= P.g + tol))


def chebyshev_center(P: Polytope) -> tuple[np.ndarray, float]:
    """Center and radius of the largest ball inscribed in ``P``."""
    c, r = P.chebyshev
    return c.copy(), r


def project(P: Polytope, y, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Closest point of ``P`` to ``y``."""
    y = _point(P, y, "y")
    pk = pack([P])
    out = np.empty(P.d)
    K.project_one(y, 0, pk.H, pk.g, pk.rptr, pk.FM, pk.Fc, pk.fptr, out)
    viol = float(np.max(P.H @ out - P.g))
    if viol > tol:
        raise NumericalError("projection left the polytope", best=out, residual=viol)
    return out


class MinDistance(NamedTuple):
    cost: float
    xP: np.ndarray
    xQ: np.ndarray


def min_distance(P: Polytope, Q: Polytope, tol: float = DEFAULT_TOL) -> MinDistance:
    """Minimum Euclidean distance between two polytopes, with witnesses."""
    if P.d != Q.d:
        raise InputError(f"dimension mismatch: {P.d} vs {Q.d}")
    return pair_distance(pack([P, Q]), 0, 1, tol)


def pair_distance(pk: PolytopePack, i: int, j: int, tol: float = DEFAULT_TOL) -> MinDistance:
    xp = np.empty(pk.d)
    xq = np.empty(pk.d)
    cost, lower, _, status = K.min_distance(
        i, j, pk.H, pk.g, pk.rptr, pk.V, pk.vptr, pk.FM, pk.Fc, pk.FB, pk.Fk,
        pk.fptr, pk.centers[j], tol, MAX_ITER, xp, xq)
    if status == K.MAXITER:
        # near-parallel faces make alternating projections crawl; the
        # minimum-norm-point method is finite on vertex sets
        cost, lower, _, status = K.wolfe_distance(i, j, pk.V, pk.vptr, tol, WOLFE_ITER, xp, xq)
    if status == K.MAXITER:
        raise NumericalError(
            f"alternating projections did not converge for pair ({i}, {j})",
            best=(xp, xq), residual=cost - lower)
    return MinDistance(float(cost), xp, xq)
