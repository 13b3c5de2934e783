# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; see ``_kernels_py`` for semantics."""

import numpy as np

from libc.math cimport fabs, fmax, INFINITY

cdef enum:
    OPTIMAL = 0
    UNBOUNDED = 1
    ITERATION_LIMIT = 2


cdef void _pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t rows = T.shape[0], cols = T.shape[1], i, c
    cdef double p = T[r, j], f
    for c in range(cols):
        T[r, c] /= p
    for i in range(rows):
        if i == r:
            continue
        f = T[i, j]
        if f == 0.0:
            continue
        for c in range(cols):
            T[i, c] -= f * T[r, c]
        T[i, j] = 0.0
    T[r, j] = 1.0


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j):
    _pivot(T, r, j)


def simplex_pivot_loop(double[:, ::1] T, long[::1] basis, Py_ssize_t ncols,
                       double tol, long max_iter):
    cdef Py_ssize_t m = T.shape[0] - 1, rhs = T.shape[1] - 1
    cdef Py_ssize_t i, j, r
    cdef long it = 0
    cdef int status = ITERATION_LIMIT
    cdef double ratio, rmin, a, cmax, ptol
    with nogil:
        while it < max_iter:
            j = -1
            for i in range(ncols):
                if T[m, i] > tol:
                    j = i
                    break
            if j < 0:
                status = OPTIMAL
                break
            # pivots must be large relative to the column: dividing by
            # round-off-sized entries blows up the tableau
            cmax = 0.0
            for i in range(m):
                if T[i, j] > cmax:
                    cmax = T[i, j]
            if cmax <= tol:
                status = UNBOUNDED
                break
            ptol = fmax(tol, 1e-9 * cmax)
            rmin = INFINITY
            for i in range(m):
                a = T[i, j]
                if a > ptol:
                    # round-off can leave a basic value slightly negative
                    ratio = fmax(T[i, rhs], 0.0) / a
                    if ratio < rmin:
                        rmin = ratio
            r = -1
            for i in range(m):
                a = T[i, j]
                if a > ptol:
                    ratio = fmax(T[i, rhs], 0.0) / a
                    if ratio <= rmin + tol * (1.0 + fabs(rmin)):
                        if r < 0 or basis[i] < basis[r]:
                            r = i
            _pivot(T, r, j)
            basis[r] = j
            it += 1
    return status, it


def hit_and_run(double[::1] x0, double[:, ::1] directions,
                double[::1] uniforms, Py_ssize_t thin, double eps):
    cdef Py_ssize_t steps = directions.shape[0], n = x0.shape[0]
    cdef Py_ssize_t s, i, k = 0
    cdef double hi, lo, d, v, t
    out_arr = np.empty((steps // thin, n))
    cdef double[:, ::1] out = out_arr
    x_arr = np.array(x0, dtype=float)
    cdef double[::1] x = x_arr
    with nogil:
        for s in range(steps):
            hi = INFINITY
            lo = -INFINITY
            for i in range(n):
                d = directions[s, i]
                if d < -eps:
                    v = -x[i] / d
                    if v < hi:
                        hi = v
                elif d > eps:
                    v = -x[i] / d
                    if v > lo:
                        lo = v
            if hi == INFINITY:
                hi = 0.0
            if lo == -INFINITY:
                lo = 0.0
            if hi > lo:
                t = lo + uniforms[s] * (hi - lo)
                for i in range(n):
                    x[i] += t * directions[s, i]
                    if x[i] < 0.0:
                        x[i] = 0.0
            if (s + 1) % thin == 0:
                for i in range(n):
                    out[k, i] = x[i]
                k += 1
    return out_arr


def log_capital_paths(double[:, ::1] log_returns, long[:, ::1] outcomes):
    cdef Py_ssize_t T = outcomes.shape[0], n = outcomes.shape[1]
    cdef Py_ssize_t S = log_returns.shape[0]
    cdef Py_ssize_t t, i, a, b
    final_arr = np.empty((T, S))
    last_arr = np.zeros((T, S, S), dtype=np.int64)
    acc_arr = np.empty(S)
    cdef double[:, ::1] final = final_arr
    cdef long long[:, :, ::1] last_fail = last_arr
    cdef double[::1] acc = acc_arr
    cdef long x
    with nogil:
        for t in range(T):
            for a in range(S):
                acc[a] = 0.0
            for i in range(n):
                x = outcomes[t, i]
                for a in range(S):
                    acc[a] += log_returns[a, x]
                for a in range(S):
                    for b in range(S):
                        if a != b and acc[a] <= acc[b]:
                            last_fail[t, a, b] = i + 1
            for a in range(S):
                final[t, a] = acc[a]
    return final_arr, last_arr
