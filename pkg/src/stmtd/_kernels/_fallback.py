"""Pure-Python implementations of the numerical kernels.

Same signatures and semantics as the compiled ``_core`` module; used when
the extension is not built or ``STMTD_PURE_PYTHON`` is set.
"""

from itertools import combinations

import numpy as np

PIVOT_TOL = 1e-12
COST_TOL = 1e-12
FEAS_TOL = 1e-9

OPTIMAL = 0
INFEASIBLE = 1
ITERATION_LIMIT = 2


def _pivot(T, basis, r, e):
    T[r] /= T[r, e]
    col = T[:, e].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    basis[r] = e


def _run(T, basis, allowed, max_iter):
    """Bland's-rule simplex on tableau ``T``; last row holds reduced costs."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        d = T[m, :-1]
        e = -1
        for j in range(d.shape[0]):
            if allowed[j] and d[j] < -COST_TOL:
                e = j
                break
        if e < 0:
            return OPTIMAL
        r = -1
        best = 0.0
        for k in range(m):
            a = T[k, e]
            if a > PIVOT_TOL:
                ratio = T[k, -1] / a
                if r < 0 or ratio < best - 1e-15 or (abs(ratio - best) <= 1e-15 and basis[k] < basis[r]):
                    r = k
                    best = ratio
        if r < 0:
            # unbounded cannot happen inside the simplex
            return ITERATION_LIMIT
        _pivot(T, basis, r, e)
    return ITERATION_LIMIT


def lp_simplex(f, G):
    """Minimize ``f @ p`` over the probability simplex subject to ``G @ p >= 0``.

    Returns ``(status, p, objective)``; ``status`` is 0 (optimal),
    1 (infeasible) or 2 (iteration limit).
    """
    f = np.asarray(f, dtype=float)
    G = np.asarray(G, dtype=float).reshape(-1, f.shape[0])
    n = f.shape[0]
    K = G.shape[0]
    ncol = n + K + 1
    m = K + 1
    T = np.zeros((m + 1, ncol + 1))
    T[:K, :n] = -G
    T[np.arange(K), n + np.arange(K)] = 1.0
    T[K, :n] = 1.0
    T[K, n + K] = 1.0
    T[K, -1] = 1.0
    basis = list(range(n, n + K + 1))
    # phase 1: minimize the artificial variable
    T[m, :n] = -1.0
    T[m, -1] = -1.0
    allowed = np.ones(ncol, dtype=bool)
    max_iter = 50 * (m + ncol) + 100
    status = _run(T, basis, allowed, max_iter)
    if status != OPTIMAL:
        return status, np.full(n, np.nan), np.nan
    if -T[m, -1] > FEAS_TOL:
        return INFEASIBLE, np.full(n, np.nan), np.nan
    art = n + K
    if art in basis:
        r = basis.index(art)
        for j in range(n + K):
            if abs(T[r, j]) > PIVOT_TOL:
                _pivot(T, basis, r, j)
                break
    allowed[art] = False
    # phase 2 reduced costs
    cost = np.zeros(ncol)
    cost[:n] = f
    T[m, :] = 0.0
    T[m, :ncol] = cost
    for k in range(m):
        cb = cost[basis[k]]
        if cb != 0.0:
            T[m] -= cb * T[k]
    status = _run(T, basis, allowed, max_iter)
    if status != OPTIMAL:
        return status, np.full(n, np.nan), np.nan
    p = np.zeros(n)
    for k in range(m):
        if basis[k] < n:
            p[basis[k]] = T[k, -1]
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    return OPTIMAL, p, float(f @ p)


def polytope_vertices(G, n):
    """Vertices of ``{p in simplex : G @ p >= 0}`` as rows of an array."""
    G = np.asarray(G, dtype=float).reshape(-1, n)
    K = G.shape[0]
    if n == 1:
        p = np.ones((1, 1))
        if K and np.any(G @ p[0] < -FEAS_TOL):
            return np.zeros((0, 1))
        return p
    rows = np.vstack([np.eye(n), G])
    combos = np.array(list(combinations(range(n + K), n - 1)), dtype=np.intp)
    A = np.empty((combos.shape[0], n, n))
    A[:, : n - 1, :] = rows[combos]
    A[:, n - 1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    det = np.linalg.det(A)
    ok = np.abs(det) > 1e-10
    if not ok.any():
        return np.zeros((0, n))
    P = np.linalg.solve(A[ok], np.broadcast_to(b, (int(ok.sum()), n))[..., None])[..., 0]
    feas = np.all(P >= -FEAS_TOL, axis=1)
    if K:
        feas &= np.all(P @ G.T >= -FEAS_TOL, axis=1)
    P = np.clip(P[feas], 0.0, None)
    if P.shape[0] == 0:
        return np.zeros((0, n))
    P /= P.sum(axis=1, keepdims=True)
    out = []
    for p in P:
        if not any(np.max(np.abs(p - q)) < FEAS_TOL for q in out):
            out.append(p)
    return np.array(out)


def walk_chain(cumP, u, s0):
    """State path of a Markov chain driven by uniforms ``u`` (length N -> N+1 states)."""
    cumP = np.asarray(cumP, dtype=float)
    n = cumP.shape[1]
    path = np.empty(len(u) + 1, dtype=np.intp)
    s = int(s0)
    path[0] = s
    for k, x in enumerate(u):
        j = int(np.searchsorted(cumP[s], x, side="right"))
        s = j if j < n else n - 1
        path[k + 1] = s
    return path
