"""numba kernels for the classical-graph layer (MST, 1-trees, ascent, 2-opt).

Edge status matrices use FREE = 0, FORCED = 1, FORBIDDEN = -1. Every
kernel breaks cost ties by lexicographic (i, j) order.
"""
import numpy as np
from numba import njit

FREE = 0
FORCED = 1
FORBIDDEN = -1

OK = 0
CYCLE = 1
DISCONNECTED = 2
ROOT = 3


@njit(cache=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(cache=True)
def sorted_pairs(W, include):
    """Upper-triangle pairs among included vertices sorted by (W, i, j)."""
    n = W.shape[0]
    m = 0
    for i in range(n):
        if include[i]:
            for j in range(i + 1, n):
                if include[j]:
                    m += 1
    pairs = np.empty((m, 2), dtype=np.int64)
    w = np.empty(m)
    k = 0
    for i in range(n):
        if include[i]:
            for j in range(i + 1, n):
                if include[j]:
                    pairs[k, 0] = i
                    pairs[k, 1] = j
                    w[k] = W[i, j]
                    k += 1
    # pairs are generated in lexicographic order, so a stable sort keeps ties lexicographic
    order = np.argsort(w, kind="mergesort")
    return pairs[order]


@njit(cache=True)
def kruskal(W, status, include, out):
    """Minimum spanning tree over included vertices.

    Forced edges are merged first, forbidden edges skipped. Writes the tree
    edges to ``out`` and returns (n_edges, code).
    """
    n = W.shape[0]
    parent = np.arange(n)
    nv = 0
    for i in range(n):
        if include[i]:
            nv += 1
    k = 0
    for i in range(n):
        if not include[i]:
            continue
        for j in range(i + 1, n):
            if include[j] and status[i, j] == FORCED:
                a = _find(parent, i)
                b = _find(parent, j)
                if a == b:
                    return k, CYCLE
                parent[a] = b
                out[k, 0] = i
                out[k, 1] = j
                k += 1
    if k < nv - 1:
        pairs = sorted_pairs(W, include)
        for e in range(pairs.shape[0]):
            i = pairs[e, 0]
            j = pairs[e, 1]
            if status[i, j] != FREE:
                continue
            a = _find(parent, i)
            b = _find(parent, j)
            if a != b:
                parent[a] = b
                out[k, 0] = i
                out[k, 1] = j
                k += 1
                if k == nv - 1:
                    break
    if k < nv - 1:
        return k, DISCONNECTED
    return k, OK


@njit(cache=True)
def _key_less(w1, a1, b1, w2, a2, b2):
    if w1 != w2:
        return w1 < w2
    if a1 != a2:
        return a1 < a2
    return b1 < b2


@njit(cache=True)
def prim(W, status, include, out):
    """Dense O(n^2) minimum spanning tree; same contract as :func:`kruskal`.

    Edges are ranked by (W, i, j) with forced edges below everything, a
    strict total order, so the tree is the unique one Kruskal also returns.
    Edges are written in the order they join the tree.
    """
    n = W.shape[0]
    parent = np.arange(n)
    nv = 0
    first = -1
    for i in range(n):
        if include[i]:
            nv += 1
            if first < 0:
                first = i
    # forced edges must be acyclic
    for i in range(n):
        if not include[i]:
            continue
        for j in range(i + 1, n):
            if include[j] and status[i, j] == FORCED:
                a = _find(parent, i)
                b = _find(parent, j)
                if a == b:
                    return 0, CYCLE
                parent[a] = b
    if nv <= 1:
        return 0, OK
    in_tree = np.zeros(n, dtype=np.bool_)
    kw = np.full(n, np.inf)
    ka = np.full(n, -1, dtype=np.int64)
    kb = np.full(n, -1, dtype=np.int64)
    u = first
    in_tree[u] = True
    k = 0
    for _ in range(nv - 1):
        for v in range(n):
            if not include[v] or in_tree[v] or status[u, v] == FORBIDDEN:
                continue
            w = -np.inf if status[u, v] == FORCED else W[u, v]
            a = min(u, v)
            b = max(u, v)
            if ka[v] < 0 or _key_less(w, a, b, kw[v], ka[v], kb[v]):
                kw[v] = w
                ka[v] = a
                kb[v] = b
        best = -1
        for v in range(n):
            if include[v] and not in_tree[v] and ka[v] >= 0:
                if best < 0 or _key_less(kw[v], ka[v], kb[v], kw[best], ka[best], kb[best]):
                    best = v
        if best < 0:
            return k, DISCONNECTED
        out[k, 0] = ka[best]
        out[k, 1] = kb[best]
        k += 1
        in_tree[best] = True
        u = best
    return k, OK


@njit(cache=True)
def one_tree(W, status, root, out, deg):
    """MST on all vertices but ``root`` plus the two cheapest root edges.

    Returns (weight under W, code); ``out`` gets n edges and ``deg`` the
    vertex degrees.
    """
    n = W.shape[0]
    include = np.ones(n, dtype=np.bool_)
    include[root] = False
    k, code = prim(W, status, include, out)
    if code != OK:
        return np.inf, code
    # root edges: forced ones first, then cheapest free ones (ties by index)
    nr = 0
    used = np.zeros(n, dtype=np.bool_)
    for j in range(n):
        if j != root and status[root, j] == FORCED:
            if nr == 2:
                return np.inf, ROOT
            out[k, 0] = min(root, j)
            out[k, 1] = max(root, j)
            used[j] = True
            k += 1
            nr += 1
    while nr < 2:
        best = -1
        bw = np.inf
        for j in range(n):
            if j == root or used[j] or status[root, j] != FREE:
                continue
            if W[root, j] < bw:
                bw = W[root, j]
                best = j
        if best < 0:
            return np.inf, ROOT
        out[k, 0] = min(root, best)
        out[k, 1] = max(root, best)
        used[best] = True
        k += 1
        nr += 1
    total = 0.0
    deg[:] = 0
    for e in range(n):
        total += W[out[e, 0], out[e, 1]]
        deg[out[e, 0]] += 1
        deg[out[e, 1]] += 1
    return total, OK


@njit(cache=True)
def ascent(C, status, root, pi0, max_iter, t0, decay, best_pi, best_edges, best_deg,
           last_pi):
    """Held-Karp subgradient ascent pi <- pi + t (deg - 2).

    Returns (best bound, iterations run, code, best_is_tour). The best
    bound's pi, 1-tree and degrees go to the ``best_*`` buffers; the final pi
    goes to ``last_pi``. Stops early once a 1-tree is a tour.
    """
    n = C.shape[0]
    pi = pi0.copy()
    W = np.empty((n, n))
    edges = np.empty((n, 2), dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    best = -np.inf
    best_tour = False
    t = t0
    it = 0
    for it in range(1, max_iter + 1):
        s = 0.0
        for i in range(n):
            s += pi[i]
            for j in range(n):
                W[i, j] = C[i, j] + pi[i] + pi[j]
        w, code = one_tree(W, status, root, edges, deg)
        if code != OK:
            last_pi[:] = pi
            return -np.inf, it, code, False
        bound = w - 2.0 * s
        tour = True
        for i in range(n):
            if deg[i] != 2:
                tour = False
                break
        if bound > best:
            best = bound
            best_tour = tour
            best_pi[:] = pi
            best_edges[:, :] = edges
            best_deg[:] = deg
        if tour:
            break
        for i in range(n):
            pi[i] += t * (deg[i] - 2)
        t *= decay
    last_pi[:] = pi
    return best, it, OK, best_tour


@njit(cache=True)
def tour_cost(C, order):
    n = order.shape[0]
    s = 0.0
    for k in range(n):
        s += C[order[k], order[(k + 1) % n]]
    return s


@njit(cache=True)
def two_opt_matrix(C, order):
    """First-improvement 2-opt; rescans from the start after every move."""
    n = order.shape[0]
    o = order.copy()
    moves = 0
    improved = True
    while improved:
        improved = False
        for i in range(n - 2):
            a = o[i]
            b = o[i + 1]
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                c = o[j]
                d = o[(j + 1) % n]
                delta = C[a, c] + C[b, d] - C[a, b] - C[c, d]
                if delta < -1e-12:
                    lo = i + 1
                    hi = j
                    while lo < hi:
                        tmp = o[lo]
                        o[lo] = o[hi]
                        o[hi] = tmp
                        lo += 1
                        hi -= 1
                    moves += 1
                    improved = True
                    break
            if improved:
                break
    return o, moves


@njit(cache=True)
def bhk_table(C):
    """Classical Bellman-Held-Karp table over subsets of 1..n-1.

    D[S, j] is the cheapest path that starts at 0, visits exactly the
    vertices in bitmask S (bit j-1 for vertex j) and ends at j in S.
    """
    n = C.shape[0]
    m = n - 1
    full = 1 << m
    D = np.full((full, n), np.inf)
    for j in range(1, n):
        D[1 << (j - 1), j] = C[0, j]
    for S in range(1, full):
        for j in range(1, n):
            bj = 1 << (j - 1)
            if not (S & bj):
                continue
            v = D[S, j]
            if v == np.inf:
                continue
            for k in range(1, n):
                bk = 1 << (k - 1)
                if S & bk:
                    continue
                T = S | bk
                c = v + C[j, k]
                if c < D[T, k]:
                    D[T, k] = c
    return D
