# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: cyclic Jacobi on complex Hermitian matrices and the
block-eigenvalue evaluator used by the partition searches.

Mirrors ``framedisc._kernels_py`` exactly in interface and tolerances.
"""

import numpy as np
from libc.math cimport sqrt, fabs, hypot

ctypedef double complex cplx

BACKEND = "cython"

cdef double TOL = 1e-14
cdef int MAX_SWEEPS = 50
cdef double _SKIP = 1e-18


cdef inline double _abs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef void _jacobi(cplx[:, ::1] A, cplx[:, ::1] V, bint want_vectors) noexcept nogil:
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, j, k, p, q, sweep
    cdef double fro2 = 0.0, off2, r, tau, t, c, s, app, aqq, fro
    cdef cplx apq, phase, ep, x, y
    if n < 2:
        return
    for i in range(n):
        for j in range(n):
            fro2 += _abs2(A[i, j])
    fro = sqrt(fro2)
    for sweep in range(MAX_SWEEPS):
        off2 = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off2 += _abs2(A[i, j])
        if sqrt(off2) <= TOL * fro:
            return
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                r = sqrt(_abs2(apq))
                if r <= _SKIP * fro:
                    continue
                phase = apq / r
                ep = phase.conjugate()
                app = A[p, p].real
                aqq = A[q, q].real
                tau = (aqq - app) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + hypot(1.0, tau))
                else:
                    t = -1.0 / (-tau + hypot(1.0, tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    x = A[k, p]
                    y = A[k, q]
                    A[k, p] = c * x - s * ep * y
                    A[k, q] = s * x + c * ep * y
                for k in range(n):
                    x = A[p, k]
                    y = A[q, k]
                    A[p, k] = c * x - s * phase * y
                    A[q, k] = s * x + c * phase * y
                A[p, q] = 0
                A[q, p] = 0
                if want_vectors:
                    for k in range(n):
                        x = V[k, p]
                        y = V[k, q]
                        V[k, p] = c * x - s * ep * y
                        V[k, q] = s * x + c * ep * y


def jacobi_eigh(A):
    """Eigenvalues (ascending) and eigenvectors of one Hermitian matrix."""
    cdef cplx[:, ::1] a = np.array(A, dtype=np.complex128, order="C", copy=True)
    n = a.shape[0]
    Vn = np.eye(n, dtype=np.complex128)
    cdef cplx[:, ::1] v = Vn
    with nogil:
        _jacobi(a, v, True)
    w = np.asarray(a).diagonal().real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], np.ascontiguousarray(Vn[:, order])


def batched_eigvalsh(A):
    """Ascending eigenvalues for a stack of Hermitian matrices ``(b, n, n)``."""
    src = np.ascontiguousarray(A, dtype=np.complex128)
    cdef Py_ssize_t b = src.shape[0], n = src.shape[1], i, k
    out = np.empty((b, n))
    cdef double[:, ::1] o = out
    cdef cplx[:, :, ::1] s = src
    buf_arr = np.empty((n, n), dtype=np.complex128)
    cdef cplx[:, ::1] buf = buf_arr
    with nogil:
        for i in range(b):
            buf[:, :] = s[i]
            _jacobi(buf, buf, False)
            for k in range(n):
                o[i, k] = buf[k, k].real
    out.sort(axis=1)
    return out


cdef void _extremes(const cplx[:, :, ::1] outers, const cplx[:, :, ::1] offsets,
                    const int[::1] labels, cplx[:, :, ::1] blocks,
                    double[:, ::1] res) noexcept nogil:
    cdef Py_ssize_t m = outers.shape[0], d = outers.shape[1], r = offsets.shape[0]
    cdef Py_ssize_t i, j, k, lab
    cdef double lo, hi, val
    for k in range(r):
        for i in range(d):
            for j in range(d):
                blocks[k, i, j] = -offsets[k, i, j]
    for lab in range(m):
        k = labels[lab]
        for i in range(d):
            for j in range(d):
                blocks[k, i, j] = blocks[k, i, j] + outers[lab, i, j]
    for k in range(r):
        _jacobi(blocks[k], blocks[k], False)
        lo = blocks[k, 0, 0].real
        hi = lo
        for i in range(1, d):
            val = blocks[k, i, i].real
            if val < lo:
                lo = val
            if val > hi:
                hi = val
        res[k, 0] = lo
        res[k, 1] = hi


def block_extreme_eigs(outers, offsets, assign):
    """Smallest/largest eigenvalue of ``sum_{i in block k} outers[i] - offsets[k]``.

    ``assign`` is ``(n, m)`` with block labels in ``range(r)``; returns
    ``(n, r, 2)``.
    """
    cdef const cplx[:, :, ::1] P = np.ascontiguousarray(outers, dtype=np.complex128)
    cdef const cplx[:, :, ::1] T = np.ascontiguousarray(offsets, dtype=np.complex128)
    cdef const int[:, ::1] a = np.ascontiguousarray(assign, dtype=np.int32)
    cdef Py_ssize_t n = a.shape[0], r = T.shape[0], d = P.shape[1], row
    out = np.empty((n, r, 2))
    cdef double[:, :, ::1] o = out
    cdef cplx[:, :, ::1] blocks = np.empty((r, d, d), dtype=np.complex128)
    with nogil:
        for row in range(n):
            _extremes(P, T, a[row], blocks, o[row])
    return out


def exhaustive_block_extreme_eigs(outers, offsets, long long r, long long start, long long count):
    """As ``block_extreme_eigs`` for the assignments of lexicographic rank
    ``start .. start+count-1`` (first vector is the most significant digit)."""
    cdef const cplx[:, :, ::1] P = np.ascontiguousarray(outers, dtype=np.complex128)
    cdef const cplx[:, :, ::1] T = np.ascontiguousarray(offsets, dtype=np.complex128)
    cdef Py_ssize_t m = P.shape[0], d = P.shape[1], nb = T.shape[0], row, i
    cdef long long idx
    out = np.empty((count, nb, 2))
    cdef double[:, :, ::1] o = out
    cdef int[::1] labels = np.empty(m, dtype=np.int32)
    cdef cplx[:, :, ::1] blocks = np.empty((nb, d, d), dtype=np.complex128)
    with nogil:
        for row in range(count):
            idx = start + row
            for i in range(m - 1, -1, -1):
                labels[i] = <int>(idx % r)
                idx = idx // r
            _extremes(P, T, labels, blocks, o[row])
    return out


def decode_assignments(start, count, m, r):
    """Assignments with lexicographic rank ``start .. start+count-1``."""
    idx = np.arange(start, start + count, dtype=np.int64)
    powers = r ** np.arange(m - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] // powers[None, :]) % r).astype(np.int32)
