# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical kernels: dense simplex LP, polytope vertex
enumeration and Markov chain walking. Mirrors ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef double PIVOT_TOL = 1e-12
cdef double COST_TOL = 1e-12
cdef double FEAS_TOL = 1e-9

OPTIMAL = 0
INFEASIBLE = 1
ITERATION_LIMIT = 2


cdef void _pivot(double[:, ::1] T, Py_ssize_t[::1] basis, Py_ssize_t r, Py_ssize_t e) noexcept nogil:
    cdef Py_ssize_t rows = T.shape[0], cols = T.shape[1], k, j
    cdef double piv = T[r, e], fac
    for j in range(cols):
        T[r, j] /= piv
    for k in range(rows):
        if k == r:
            continue
        fac = T[k, e]
        if fac != 0.0:
            for j in range(cols):
                T[k, j] -= fac * T[r, j]
    basis[r] = e


cdef int _run(double[:, ::1] T, Py_ssize_t[::1] basis, char[::1] allowed, Py_ssize_t max_iter) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0] - 1, ncol = T.shape[1] - 1
    cdef Py_ssize_t it, j, k, e, r
    cdef double a, ratio, best
    for it in range(max_iter):
        e = -1
        for j in range(ncol):
            if allowed[j] and T[m, j] < -COST_TOL:
                e = j
                break
        if e < 0:
            return 0
        r = -1
        best = 0.0
        for k in range(m):
            a = T[k, e]
            if a > PIVOT_TOL:
                ratio = T[k, ncol] / a
                if r < 0 or ratio < best - 1e-15 or (fabs(ratio - best) <= 1e-15 and basis[k] < basis[r]):
                    r = k
                    best = ratio
        if r < 0:
            return 2
        _pivot(T, basis, r, e)
    return 2


def lp_simplex(f, G):
    """Minimize ``f @ p`` over the probability simplex subject to ``G @ p >= 0``."""
    cdef double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n = fv.shape[0]
    cdef double[:, ::1] Gv = np.ascontiguousarray(np.asarray(G, dtype=np.float64).reshape(-1, n))
    cdef Py_ssize_t K = Gv.shape[0]
    cdef Py_ssize_t ncol = n + K + 1, m = K + 1
    cdef Py_ssize_t i, j, k, r, art = n + K
    cdef int status
    cdef double cb, total
    T_arr = np.zeros((m + 1, ncol + 1))
    cdef double[:, ::1] T = T_arr
    basis_arr = np.arange(n, n + K + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] basis = basis_arr
    allowed_arr = np.ones(ncol, dtype=np.int8)
    cdef char[::1] allowed = allowed_arr
    cdef Py_ssize_t max_iter = 50 * (m + ncol) + 100
    cdef double[::1] cost

    for k in range(K):
        for j in range(n):
            T[k, j] = -Gv[k, j]
        T[k, n + k] = 1.0
    for j in range(n):
        T[K, j] = 1.0
        T[m, j] = -1.0
    T[K, art] = 1.0
    T[K, ncol] = 1.0
    T[m, ncol] = -1.0

    with nogil:
        status = _run(T, basis, allowed, max_iter)
    if status != 0:
        return status, np.full(n, np.nan), np.nan
    if -T[m, ncol] > FEAS_TOL:
        return 1, np.full(n, np.nan), np.nan
    for r in range(m):
        if basis[r] == art:
            for j in range(n + K):
                if fabs(T[r, j]) > PIVOT_TOL:
                    _pivot(T, basis, r, j)
                    break
            break
    allowed[art] = 0

    cost_arr = np.zeros(ncol)
    cost = cost_arr
    for j in range(n):
        cost[j] = fv[j]
    for j in range(ncol + 1):
        T[m, j] = cost[j] if j < ncol else 0.0
    for k in range(m):
        cb = cost[basis[k]]
        if cb != 0.0:
            for j in range(ncol + 1):
                T[m, j] -= cb * T[k, j]
    with nogil:
        status = _run(T, basis, allowed, max_iter)
    if status != 0:
        return status, np.full(n, np.nan), np.nan

    p_arr = np.zeros(n)
    cdef double[::1] p = p_arr
    for k in range(m):
        if basis[k] < n:
            p[basis[k]] = T[k, ncol]
    total = 0.0
    for j in range(n):
        if p[j] < 0.0:
            p[j] = 0.0
        total += p[j]
    cb = 0.0
    for j in range(n):
        p[j] /= total
        cb += fv[j] * p[j]
    return 0, p_arr, cb


cdef bint _solve_vertex(double[:, ::1] rows, Py_ssize_t[::1] pick, Py_ssize_t n,
                        double[:, ::1] A, double[::1] x) noexcept nogil:
    """Solve [rows[pick]; 1...1] x = e_n by Gaussian elimination with partial pivoting."""
    cdef Py_ssize_t i, j, k, piv
    cdef double best, fac, tmp
    for i in range(n - 1):
        for j in range(n):
            A[i, j] = rows[pick[i], j]
        A[i, n] = 0.0
    for j in range(n):
        A[n - 1, j] = 1.0
    A[n - 1, n] = 1.0
    for k in range(n):
        piv = k
        best = fabs(A[k, k])
        for i in range(k + 1, n):
            if fabs(A[i, k]) > best:
                best = fabs(A[i, k])
                piv = i
        if best < 1e-10:
            return False
        if piv != k:
            for j in range(n + 1):
                tmp = A[k, j]
                A[k, j] = A[piv, j]
                A[piv, j] = tmp
        for i in range(k + 1, n):
            fac = A[i, k] / A[k, k]
            if fac != 0.0:
                for j in range(k, n + 1):
                    A[i, j] -= fac * A[k, j]
    for k in range(n - 1, -1, -1):
        tmp = A[k, n]
        for j in range(k + 1, n):
            tmp -= A[k, j] * x[j]
        x[k] = tmp / A[k, k]
    return True


def polytope_vertices(G, Py_ssize_t n):
    """Vertices of ``{p in simplex : G @ p >= 0}`` as rows of an array."""
    cdef double[:, ::1] Gv = np.ascontiguousarray(np.asarray(G, dtype=np.float64).reshape(-1, n))
    cdef Py_ssize_t K = Gv.shape[0]
    cdef Py_ssize_t total = n + K, k, i, j, c, found = 0, cap
    cdef double s, dist, dmax
    cdef bint feasible, dup
    if n == 1:
        for k in range(K):
            if Gv[k, 0] < -FEAS_TOL:
                return np.zeros((0, 1))
        return np.ones((1, 1))
    rows_arr = np.vstack([np.eye(n), np.asarray(Gv)])
    cdef double[:, ::1] rows = rows_arr
    pick_arr = np.arange(n - 1, dtype=np.intp)
    cdef Py_ssize_t[::1] pick = pick_arr
    A_arr = np.empty((n, n + 1))
    cdef double[:, ::1] A = A_arr
    x_arr = np.empty(n)
    cdef double[::1] x = x_arr
    cap = 64
    out_arr = np.empty((cap, n))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r = n - 1

    while True:
        if _solve_vertex(rows, pick, n, A, x):
            feasible = True
            for j in range(n):
                if x[j] < -FEAS_TOL:
                    feasible = False
                    break
            if feasible:
                for k in range(K):
                    s = 0.0
                    for j in range(n):
                        s += Gv[k, j] * x[j]
                    if s < -FEAS_TOL:
                        feasible = False
                        break
            if feasible:
                s = 0.0
                for j in range(n):
                    if x[j] < 0.0:
                        x[j] = 0.0
                    s += x[j]
                for j in range(n):
                    x[j] /= s
                dup = False
                for c in range(found):
                    dmax = 0.0
                    for j in range(n):
                        dist = fabs(out[c, j] - x[j])
                        if dist > dmax:
                            dmax = dist
                    if dmax < FEAS_TOL:
                        dup = True
                        break
                if not dup:
                    if found == cap:
                        cap *= 2
                        grown = np.empty((cap, n))
                        grown[:found] = out_arr[:found]
                        out_arr = grown
                        out = out_arr
                    for j in range(n):
                        out[found, j] = x[j]
                    found += 1
        # next combination of n-1 indices out of total
        i = r - 1
        while i >= 0 and pick[i] == total - r + i:
            i -= 1
        if i < 0:
            break
        pick[i] += 1
        for j in range(i + 1, r):
            pick[j] = pick[j - 1] + 1
    return np.array(out_arr[:found])


def walk_chain(cumP, u, Py_ssize_t s0):
    """State path of a Markov chain driven by uniforms ``u`` (length N -> N+1 states)."""
    cdef double[:, ::1] C = np.ascontiguousarray(cumP, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t N = uv.shape[0], n = C.shape[1], k, j, s = s0
    path_arr = np.empty(N + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] path = path_arr
    cdef double x
    path[0] = s
    with nogil:
        for k in range(N):
            x = uv[k]
            j = 0
            while j < n and C[s, j] <= x:
                j += 1
            if j >= n:
                j = n - 1
            s = j
            path[k + 1] = s
    return path_arr
