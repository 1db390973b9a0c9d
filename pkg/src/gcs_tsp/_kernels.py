"""Compiled inner loops: face-enumeration projection, polytope distance,
and the smoothed projected-gradient solver for fixed topologies.

Polytopes reach these kernels as a "pack": concatenated arrays with CSR-style
offset vectors (``rptr`` for halfspace rows, ``vptr`` for vertices, ``fptr``
for faces). Face ``f`` projects a point y onto its affine hull as
``FM[f] @ y + Fc[f]``; ``FB[f, :, :Fk[f]]`` is an orthonormal basis of the
hull's direction space.
"""
import numpy as np
from numba import njit

INF = np.inf

# status codes shared with the Python wrappers
OK = 0
INTERSECT = 1
MAXITER = 2
STALLED = 3


@njit(cache=True)
def feas_tol(p, g, rptr):
    s = 0.0
    for r in range(rptr[p], rptr[p + 1]):
        a = abs(g[r])
        if a > s:
            s = a
    return 1e-10 * (1.0 + s)


@njit(cache=True)
def max_violation(z, p, H, g, rptr):
    d = z.shape[0]
    worst = -INF
    for r in range(rptr[p], rptr[p + 1]):
        s = -g[r]
        for a in range(d):
            s += H[r, a] * z[a]
        if s > worst:
            worst = s
    return worst


@njit(cache=True)
def project_one(y, p, H, g, rptr, FM, Fc, fptr, out):
    """Exact Euclidean projection of ``y`` onto polytope ``p``.

    Every face hull candidate that lands inside the polytope is a feasible
    point; the true projection is one of them, so the nearest feasible
    candidate is the answer. Returns the face index, or ``-1 - f`` when no
    candidate passed the feasibility test and the least-violating one was
    used instead.
    """
    d = y.shape[0]
    tol = feas_tol(p, g, rptr)
    z = np.empty(d)
    best = INF
    best_f = -1
    fall = INF
    fall_f = -1
    for f in range(fptr[p], fptr[p + 1]):
        for a in range(d):
            s = Fc[f, a]
            for b in range(d):
                s += FM[f, a, b] * y[b]
            z[a] = s
        viol = max_violation(z, p, H, g, rptr)
        dist = 0.0
        for a in range(d):
            t = z[a] - y[a]
            dist += t * t
        if viol <= tol:
            if dist < best:
                best = dist
                best_f = f
                for a in range(d):
                    out[a] = z[a]
                if dist == 0.0:
                    break
        elif viol < fall:
            fall = viol
            fall_f = f
    if best_f >= 0:
        return best_f
    f = fall_f
    for a in range(d):
        s = Fc[f, a]
        for b in range(d):
            s += FM[f, a, b] * y[b]
        out[a] = s
    return -1 - f


@njit(cache=True)
def support_min(s, p, V, vptr):
    """min over the polytope of s.x (attained at a vertex)."""
    d = s.shape[0]
    best = INF
    for k in range(vptr[p], vptr[p + 1]):
        t = 0.0
        for a in range(d):
            t += s[a] * V[k, a]
        if t < best:
            best = t
    return best


@njit(cache=True)
def _face_pair(fp, fq, Fc, FB, Fk, xp, xq):
    """Closest pair between the affine hulls of faces fp and fq."""
    d = Fc.shape[1]
    kp = Fk[fp]
    kq = Fk[fq]
    rhs = np.empty(d)
    for a in range(d):
        rhs[a] = Fc[fq, a] - Fc[fp, a]
    if kp + kq == 0:
        for a in range(d):
            xp[a] = Fc[fp, a]
            xq[a] = Fc[fq, a]
        return
    A = np.zeros((d, kp + kq))
    for a in range(d):
        for c in range(kp):
            A[a, c] = FB[fp, a, c]
        for c in range(kq):
            A[a, kp + c] = -FB[fq, a, c]
    sol = np.linalg.lstsq(A, rhs)[0]
    for a in range(d):
        s = Fc[fp, a]
        for c in range(kp):
            s += FB[fp, a, c] * sol[c]
        xp[a] = s
        t = Fc[fq, a]
        for c in range(kq):
            t += FB[fq, a, c] * sol[kp + c]
        xq[a] = t


@njit(cache=True)
def _dist(x, y):
    s = 0.0
    for a in range(x.shape[0]):
        t = x[a] - y[a]
        s += t * t
    return np.sqrt(s)


@njit(cache=True)
def min_distance(i, j, H, g, rptr, V, vptr, FM, Fc, FB, Fk, fptr, start,
                 tol, max_iter, xp, xq):
    """Alternating projections between polytopes i and j.

    After every sweep the active faces are polished with an exact
    affine-hull solve, and a separating-hyperplane bound certifies the gap.
    Returns (cost, certified lower bound, iterations, status).
    """
    d = xp.shape[0]
    cp = np.empty(d)
    cq = np.empty(d)
    w = np.empty(d)
    fp = project_one(start, i, H, g, rptr, FM, Fc, fptr, xp)
    fq = project_one(xp, j, H, g, rptr, FM, Fc, fptr, xq)
    dist = _dist(xp, xq)
    lower = 0.0
    target = 0.1 * tol
    for it in range(1, max_iter + 1):
        if dist <= target:
            return 0.0, 0.0, it, INTERSECT
        if fp >= 0 and fq >= 0:
            _face_pair(fp, fq, Fc, FB, Fk, cp, cq)
            if (max_violation(cp, i, H, g, rptr) <= feas_tol(i, g, rptr)
                    and max_violation(cq, j, H, g, rptr) <= feas_tol(j, g, rptr)):
                dc = _dist(cp, cq)
                if dc < dist:
                    for a in range(d):
                        xp[a] = cp[a]
                        xq[a] = cq[a]
                    dist = dc
                    if dist <= target:
                        return 0.0, 0.0, it, INTERSECT
        for a in range(d):
            w[a] = (xp[a] - xq[a]) / dist
        lo = support_min(w, i, V, vptr)
        for a in range(d):
            w[a] = -w[a]
        lo += support_min(w, j, V, vptr)
        if lo > lower:
            lower = lo
        if dist - lower <= target:
            return dist, lower, it, OK
        fp = project_one(xq, i, H, g, rptr, FM, Fc, fptr, xp)
        fq = project_one(xp, j, H, g, rptr, FM, Fc, fptr, xq)
        dn = _dist(xp, xq)
        if dn < dist:
            dist = dn
    return dist, lower, max_iter, MAXITER


@njit(cache=True)
def _argmin_vertex(s, p, V, vptr):
    d = s.shape[0]
    best = INF
    arg = vptr[p]
    for k in range(vptr[p], vptr[p + 1]):
        t = 0.0
        for a in range(d):
            t += s[a] * V[k, a]
        if t < best:
            best = t
            arg = k
    return arg


@njit(cache=True)
def wolfe_distance(i, j, V, vptr, tol, max_iter, xp, xq):
    """Wolfe's minimum-norm-point algorithm on the difference P_i - P_j.

    Finite for polytopes and insensitive to near-parallel faces, where
    alternating projections crawl. Corral points are vertex pairs (a, b)
    standing for V[a] - V[b]. Same return convention as min_distance.
    """
    d = xp.shape[0]
    cap = d + 2
    ia = np.empty(cap, dtype=np.int64)
    ib = np.empty(cap, dtype=np.int64)
    lam = np.empty(cap)
    P = np.empty((cap, d))
    x = np.empty(d)
    w = np.empty(d)
    for a in range(d):
        w[a] = 1.0
    ia[0] = _argmin_vertex(w, i, V, vptr)
    for a in range(d):
        w[a] = -w[a]
    ib[0] = _argmin_vertex(w, j, V, vptr)
    for a in range(d):
        P[0, a] = V[ia[0], a] - V[ib[0], a]
        x[a] = P[0, a]
    lam[0] = 1.0
    m = 1
    target = 0.1 * tol
    lower = 0.0
    scale = 0.0
    for k in range(V.shape[0]):
        for a in range(d):
            if abs(V[k, a]) > scale:
                scale = abs(V[k, a])
    eps = 1e-15 * (1.0 + scale) ** 2
    used = max_iter
    for it in range(1, max_iter + 1):
        nx = 0.0
        for a in range(d):
            nx += x[a] * x[a]
        nx = np.sqrt(nx)
        if nx <= target:
            return 0.0, 0.0, it, INTERSECT
        # linear oracle over the difference set in direction x
        for a in range(d):
            w[a] = x[a] / nx
        a_new = _argmin_vertex(w, i, V, vptr)
        for a in range(d):
            w[a] = -w[a]
        b_new = _argmin_vertex(w, j, V, vptr)
        lo = 0.0
        for a in range(d):
            lo += x[a] / nx * (V[a_new, a] - V[b_new, a])
        if lo > lower:
            lower = lo
        if nx - lower <= target or m == cap:
            used = it
            break
        dup = False
        for c in range(m):
            if ia[c] == a_new and ib[c] == b_new:
                dup = True
        if dup:
            used = it
            break
        ia[m] = a_new
        ib[m] = b_new
        for a in range(d):
            P[m, a] = V[a_new, a] - V[b_new, a]
        lam[m] = 0.0
        m += 1
        # minor cycles: move toward the affine minimizer of the corral
        while True:
            K = np.zeros((m + 1, m + 1))
            r = np.zeros(m + 1)
            for c in range(m):
                for e in range(m):
                    s = 0.0
                    for a in range(d):
                        s += P[c, a] * P[e, a]
                    K[c, e] = s
                K[c, m] = 1.0
                K[m, c] = 1.0
            r[m] = 1.0
            alpha = np.linalg.lstsq(K, r)[0][:m]
            if np.all(alpha > eps):
                for c in range(m):
                    lam[c] = alpha[c]
                break
            theta = 1.0
            for c in range(m):
                if alpha[c] <= eps:
                    den = lam[c] - alpha[c]
                    if den > 0.0 and lam[c] / den < theta:
                        theta = lam[c] / den
            keep = 0
            for c in range(m):
                v = theta * alpha[c] + (1.0 - theta) * lam[c]
                if v > eps:
                    ia[keep] = ia[c]
                    ib[keep] = ib[c]
                    lam[keep] = v
                    for a in range(d):
                        P[keep, a] = P[c, a]
                    keep += 1
            if keep == m:
                # no progress possible; drop the weakest point
                worst = 0
                for c in range(m):
                    if alpha[c] < alpha[worst]:
                        worst = c
                for c in range(worst, m - 1):
                    ia[c] = ia[c + 1]
                    ib[c] = ib[c + 1]
                    lam[c] = lam[c + 1]
                    for a in range(d):
                        P[c, a] = P[c + 1, a]
                keep = m - 1
            m = keep
            tot = 0.0
            for c in range(m):
                tot += lam[c]
            for c in range(m):
                lam[c] /= tot
            if m == 1:
                break
        for a in range(d):
            s = 0.0
            for c in range(m):
                s += lam[c] * P[c, a]
            x[a] = s
    for a in range(d):
        sp = 0.0
        sq = 0.0
        for c in range(m):
            sp += lam[c] * V[ia[c], a]
            sq += lam[c] * V[ib[c], a]
        xp[a] = sp
        xq[a] = sq
    dist = _dist(xp, xq)
    if dist <= target:
        return 0.0, 0.0, used, INTERSECT
    if dist - lower <= target:
        return dist, lower, used, OK
    return dist, lower, used, MAXITER


# ---------------------------------------------------------------------------
# fixed-topology realization


@njit(cache=True)
def _smooth_fg(x, edges, eps, grad):
    grad[:, :] = 0.0
    d = x.shape[1]
    e2 = eps * eps
    f = 0.0
    for e in range(edges.shape[0]):
        u = edges[e, 0]
        v = edges[e, 1]
        r2 = 0.0
        for a in range(d):
            t = x[u, a] - x[v, a]
            r2 += t * t
        s = np.sqrt(r2 + e2)
        f += s
        for a in range(d):
            t = (x[u, a] - x[v, a]) / s
            grad[u, a] += t
            grad[v, a] -= t
    return f


@njit(cache=True)
def _smooth_f(x, edges, eps):
    d = x.shape[1]
    e2 = eps * eps
    f = 0.0
    for e in range(edges.shape[0]):
        u = edges[e, 0]
        v = edges[e, 1]
        r2 = 0.0
        for a in range(d):
            t = x[u, a] - x[v, a]
            r2 += t * t
        f += np.sqrt(r2 + e2)
    return f


@njit(cache=True)
def true_cost(x, edges):
    d = x.shape[1]
    f = 0.0
    for e in range(edges.shape[0]):
        u = edges[e, 0]
        v = edges[e, 1]
        r2 = 0.0
        for a in range(d):
            t = x[u, a] - x[v, a]
            r2 += t * t
        f += np.sqrt(r2)
    return f


@njit(cache=True)
def _dual_bound(x, edges, eps, sidx, pinned, V, vptr, smooth):
    """Lagrangian lower bound from unit-ball edge multipliers built at x."""
    n, d = x.shape
    s = np.zeros((n, d))
    for e in range(edges.shape[0]):
        u = edges[e, 0]
        v = edges[e, 1]
        r2 = 0.0
        for a in range(d):
            t = x[u, a] - x[v, a]
            r2 += t * t
        if smooth:
            den = np.sqrt(r2 + eps * eps)
        else:
            den = np.sqrt(r2)
            if den == 0.0:
                continue
        for a in range(d):
            t = (x[u, a] - x[v, a]) / den
            s[u, a] += t
            s[v, a] -= t
    total = 0.0
    for i in range(n):
        if pinned[i]:
            for a in range(d):
                total += s[i, a] * x[i, a]
        else:
            total += support_min(s[i], sidx[i], V, vptr)
    return total


@njit(cache=True)
def _project_all(y, sidx, pinned, H, g, rptr, FM, Fc, fptr, out):
    n = y.shape[0]
    for i in range(n):
        if pinned[i]:
            continue
        project_one(y[i], sidx[i], H, g, rptr, FM, Fc, fptr, out[i])


@njit(cache=True)
def _lowest_face(xi, p, FM, Fc, Fk, fptr, snap, z):
    """Lowest-dimensional face whose affine hull passes within ``snap`` of xi."""
    d = xi.shape[0]
    best_f = -1
    best_k = 1 << 30
    w = np.empty(d)
    for f in range(fptr[p], fptr[p + 1]):
        if Fk[f] >= best_k:
            continue
        dev = 0.0
        for a in range(d):
            s = Fc[f, a]
            for b in range(d):
                s += FM[f, a, b] * xi[b]
            w[a] = s
            dev += (s - xi[a]) ** 2
        if np.sqrt(dev) <= snap:
            best_k = Fk[f]
            best_f = f
            for a in range(d):
                z[a] = w[a]
    return best_f


@njit(cache=True)
def newton_polish(x, edges, sidx, pinned, H, g, rptr, FM, Fc, FB, Fk, fptr,
                  snap, max_steps, eps):
    """Newton refinement of x with every point held on its current face.

    Once the active faces are identified the objective (smoothed by ``eps``,
    or exact when ``eps == 0``) is smooth in the face coordinates, so a few
    damped Newton steps reach machine-precision positions. With ``eps == 0``
    the polish is refused (returns False) when an edge has zero length.
    """
    n, d = x.shape
    nd = n * d
    face = np.full(n, -1, dtype=np.int64)
    off = np.zeros(n + 1, dtype=np.int64)
    z = np.empty(d)
    for i in range(n):
        k = 0
        if not pinned[i]:
            p = sidx[i]
            f = _lowest_face(x[i], p, FM, Fc, Fk, fptr, snap, z)
            if f >= 0 and max_violation(z, p, H, g, rptr) <= feas_tol(p, g, rptr):
                for a in range(d):
                    x[i, a] = z[a]
                face[i] = f
                k = Fk[f]
            else:
                face[i] = fptr[p]
                k = d
        off[i + 1] = off[i] + k
    nk = off[n]
    if nk == 0:
        return True
    J = np.zeros((nd, nk))
    for i in range(n):
        f = face[i]
        for c in range(off[i + 1] - off[i]):
            for a in range(d):
                J[i * d + a, off[i] + c] = FB[f, a, c]
    xn = np.empty_like(x)
    e2 = eps * eps
    f0 = _smooth_f(x, edges, eps)
    for step in range(max_steps):
        gx = np.zeros(nd)
        Hx = np.zeros((nd, nd))
        for e in range(edges.shape[0]):
            u = edges[e, 0]
            v = edges[e, 1]
            r2 = 0.0
            for a in range(d):
                r2 += (x[u, a] - x[v, a]) ** 2
            r = np.sqrt(r2 + e2)
            if e2 == 0.0 and r < 1e-9:
                return False
            for a in range(d):
                ua = (x[u, a] - x[v, a]) / r
                gx[u * d + a] += ua
                gx[v * d + a] -= ua
                for b in range(d):
                    ub = (x[u, b] - x[v, b]) / r
                    hab = ((1.0 if a == b else 0.0) - ua * ub) / r
                    Hx[u * d + a, u * d + b] += hab
                    Hx[v * d + a, v * d + b] += hab
                    Hx[u * d + a, v * d + b] -= hab
                    Hx[v * d + a, u * d + b] -= hab
        gt = J.T @ gx
        if np.max(np.abs(gt)) < 1e-13:
            return True
        Ht = J.T @ Hx @ J
        mu = 1e-10 * (1.0 + np.max(np.abs(np.diag(Ht))))
        for c in range(nk):
            Ht[c, c] += mu
        dt = np.linalg.solve(Ht, -gt)
        dx = J @ dt
        lam = 1.0
        accepted = False
        fn = f0
        while lam > 1e-6:
            ok = True
            for i in range(n):
                for a in range(d):
                    xn[i, a] = x[i, a] + lam * dx[i * d + a]
                if not pinned[i]:
                    if max_violation(xn[i], sidx[i], H, g, rptr) > feas_tol(sidx[i], g, rptr):
                        ok = False
                        break
            if ok:
                fn = _smooth_f(xn, edges, eps)
                if fn <= f0:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            return True
        for i in range(n):
            for a in range(d):
                x[i, a] = xn[i, a]
        if f0 - fn <= 1e-16 * max(f0, 1.0):
            return True
        f0 = fn
    return True


@njit(cache=True)
def realize(x0, edges, sidx, pinned, H, g, rptr, V, vptr, FM, Fc, FB, Fk, fptr,
            tol, scale, eps_rel, max_iter, stall_window, check_every, stall_rel, out):
    """Minimise the total Euclidean edge length with x_i in polytope sidx[i].

    Spectral projected gradient on sum sqrt(|x_u - x_v|^2 + eps^2) with an
    eps continuation. Every ``check_every`` iterations the unsmoothed cost
    and a dual lower bound are evaluated; near convergence the iterate is
    also Newton-polished on its active faces. The run stops once the
    certified gap is within ``tol``. Pinned rows of ``x0`` are never moved.

    Returns (cost, gap, lower_bound, iterations, status).
    """
    n, d = x0.shape
    x = x0.copy()
    _project_all(x0, sidx, pinned, H, g, rptr, FM, Fc, fptr, x)
    grad = np.empty((n, d))
    gnew = np.empty((n, d))
    trial = np.empty((n, d))
    xt = np.empty((n, d))
    dvec = np.empty((n, d))
    xp = np.empty((n, d))
    mem = 10
    hist = np.empty(mem)

    best_cost = true_cost(x, edges)
    for i in range(n):
        for a in range(d):
            out[i, a] = x[i, a]
    if edges.shape[0] == 0:
        return 0.0, 0.0, 0.0, 0, OK
    best_lower = -INF
    it_total = 0
    last_polish = -1000
    thresh = stall_rel * tol / max(scale, 1e-300)
    for stage in range(eps_rel.shape[0]):
        eps = eps_rel[stage] * scale
        f = _smooth_fg(x, edges, eps, grad)
        gmax = 0.0
        for i in range(n):
            if pinned[i]:
                continue
            for a in range(d):
                if abs(grad[i, a]) > gmax:
                    gmax = abs(grad[i, a])
        if gmax == 0.0:
            gmax = 1.0
        alpha = 0.01 * scale / gmax
        for k in range(mem):
            hist[k] = f
        stall = 0
        k_in_stage = 0
        while it_total < max_iter:
            it_total += 1
            k_in_stage += 1
            for i in range(n):
                for a in range(d):
                    if pinned[i]:
                        trial[i, a] = x[i, a]
                    else:
                        trial[i, a] = x[i, a] - alpha * grad[i, a]
            _project_all(trial, sidx, pinned, H, g, rptr, FM, Fc, fptr, xt)
            gd = 0.0
            dmax = 0.0
            for i in range(n):
                for a in range(d):
                    if pinned[i]:
                        dvec[i, a] = 0.0
                    else:
                        dvec[i, a] = xt[i, a] - x[i, a]
                    gd += grad[i, a] * dvec[i, a]
                    if abs(dvec[i, a]) > dmax:
                        dmax = abs(dvec[i, a])
            stationary = dmax <= 1e-15 * max(scale, 1.0) or gd >= 0.0
            if not stationary:
                fmax = hist[0]
                for k in range(1, mem):
                    if hist[k] > fmax:
                        fmax = hist[k]
                lam = 1.0
                fn = f
                while True:
                    for i in range(n):
                        for a in range(d):
                            trial[i, a] = x[i, a] + lam * dvec[i, a]
                    fn = _smooth_f(trial, edges, eps)
                    if fn <= fmax + 1e-4 * lam * gd or lam < 1e-12:
                        break
                    lam *= 0.5
                _smooth_fg(trial, edges, eps, gnew)
                sts = 0.0
                sty = 0.0
                for i in range(n):
                    for a in range(d):
                        sv = trial[i, a] - x[i, a]
                        yv = gnew[i, a] - grad[i, a]
                        sts += sv * sv
                        sty += sv * yv
                if sty > 0.0:
                    alpha = sts / sty
                else:
                    alpha = 1e3 * scale
                if alpha < 1e-14 * scale:
                    alpha = 1e-14 * scale
                if alpha > 1e6 * scale:
                    alpha = 1e6 * scale
                change = abs(f - fn) / max(abs(f), 1.0)
                if change < thresh:
                    stall = stall + 1
                else:
                    stall = 0
                for i in range(n):
                    for a in range(d):
                        x[i, a] = trial[i, a]
                        grad[i, a] = gnew[i, a]
                f = fn
                hist[it_total % mem] = f

            stage_end = stationary or stall >= stall_window
            if stage_end or k_in_stage % check_every == 0:
                c = true_cost(x, edges)
                if c < best_cost:
                    best_cost = c
                    for i in range(n):
                        for a in range(d):
                            out[i, a] = x[i, a]
                lo = _dual_bound(x, edges, eps, sidx, pinned, V, vptr, False)
                if lo > best_lower:
                    best_lower = lo
                lo = _dual_bound(x, edges, eps, sidx, pinned, V, vptr, True)
                if lo > best_lower:
                    best_lower = lo
                gap = best_cost - best_lower
                if gap > tol and (stage_end or (gap < 1e-4 * scale
                                                and it_total - last_polish >= 25)):
                    last_polish = it_total
                    for i in range(n):
                        for a in range(d):
                            xp[i, a] = x[i, a]
                    ok = newton_polish(xp, edges, sidx, pinned, H, g, rptr, FM, Fc,
                                       FB, Fk, fptr, 1e-6 * scale, 30, 0.0)
                    pe = 0.0
                    if not ok:
                        # zero-length edges: continue down a smoothing ladder
                        pe = eps
                        floor = max(0.1 * tol / edges.shape[0], 1e-13 * scale)
                        while True:
                            pe = max(pe * 1e-2, floor)
                            newton_polish(xp, edges, sidx, pinned, H, g, rptr, FM, Fc,
                                          FB, Fk, fptr, 1e-6 * scale, 30, pe)
                            if pe <= floor:
                                break
                    c = true_cost(xp, edges)
                    if c < best_cost:
                        best_cost = c
                        for i in range(n):
                            for a in range(d):
                                out[i, a] = xp[i, a]
                    lo = _dual_bound(xp, edges, pe, sidx, pinned, V, vptr, pe > 0.0)
                    if lo > best_lower:
                        best_lower = lo
                    gap = best_cost - best_lower
                if gap <= tol:
                    return best_cost, max(gap, 0.0), best_lower, it_total, OK
            if stage_end:
                break
        if it_total >= max_iter:
            return best_cost, best_cost - best_lower, best_lower, it_total, MAXITER
    return best_cost, best_cost - best_lower, best_lower, it_total, STALLED
