# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the hot kernels.

Kept in lockstep with ``_fallback``: identical arithmetic, identical
operation order, so the two backends agree bit for bit.
"""

import numpy as np

cimport cython


def monomial_matrix(const double[:, ::1] pts, const int[:, ::1] exps, int nmax):
    """See ``_fallback.monomial_matrix``."""
    cdef Py_ssize_t m = pts.shape[0]
    cdef Py_ssize_t d = pts.shape[1]
    cdef Py_ssize_t N = exps.shape[0]
    out_arr = np.empty((m, N))
    tab_arr = np.empty((d, nmax + 1))
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] tab = tab_arr
    cdef Py_ssize_t i, j, ax
    cdef int k
    cdef double v, x
    for i in range(m):
        for ax in range(d):
            tab[ax, 0] = 1.0
            x = pts[i, ax]
            for k in range(1, nmax + 1):
                tab[ax, k] = tab[ax, k - 1] * x
        for j in range(N):
            v = tab[0, exps[j, 0]]
            for ax in range(1, d):
                v = v * tab[ax, exps[j, ax]]
            out[i, j] = v
    return out_arr


def legendre_matrix(const double[:, ::1] t, const int[:, ::1] exps, const double[::1] normfac,
                    int nmax):
    """See ``_fallback.legendre_matrix``."""
    cdef Py_ssize_t m = t.shape[0]
    cdef Py_ssize_t d = t.shape[1]
    cdef Py_ssize_t N = exps.shape[0]
    out_arr = np.empty((m, N))
    tab_arr = np.empty((d, nmax + 1))
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] tab = tab_arr
    cdef Py_ssize_t i, j, ax
    cdef int k
    cdef double v, tt, a, b, p0, p1, p2
    for i in range(m):
        for ax in range(d):
            tt = t[i, ax]
            p2 = 1.0
            tab[ax, 0] = 1.0 * normfac[0]
            if nmax >= 1:
                p1 = tt
                tab[ax, 1] = tt * normfac[1]
            for k in range(2, nmax + 1):
                a = <double> (2 * k - 1)
                b = <double> (k - 1)
                p0 = ((a * tt) * p1 - b * p2) / (<double> k)
                tab[ax, k] = p0 * normfac[k]
                p2 = p1
                p1 = p0
        for j in range(N):
            v = tab[0, exps[j, 0]]
            for ax in range(1, d):
                v = v * tab[ax, exps[j, ax]]
            out[i, j] = v
    return out_arr


def sa_block(double[:, ::1] coeffs, const double[:, ::1] phis,
             const double[:, ::1] targets, const double[::1] gammas):
    """See ``_fallback.sa_block``. Updates ``coeffs`` in place."""
    cdef Py_ssize_t m = phis.shape[0]
    cdef Py_ssize_t N = phis.shape[1]
    cdef Py_ssize_t p = coeffs.shape[1]
    cdef Py_ssize_t s, j, l
    cdef double nrm, acc, step
    for s in range(m):
        nrm = 0.0
        for j in range(N):
            nrm += phis[s, j] * phis[s, j]
        for l in range(p):
            acc = 0.0
            for j in range(N):
                acc += coeffs[j, l] * phis[s, j]
            step = (targets[s, l] - acc) / (nrm + gammas[s])
            for j in range(N):
                coeffs[j, l] += step * phis[s, j]
