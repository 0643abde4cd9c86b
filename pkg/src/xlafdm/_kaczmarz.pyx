# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Kaczmarz sweeps. Same contracts as xlafdm._kaczmarz_py.

Complex data are split into real and imaginary planes so the inner products
and updates compile to plain vectorizable double loops.
"""

import numpy as np
from libc.math cimport sqrt


cdef inline void _dot(const double* ar, const double* ai,
                      const double* br, const double* bi,
                      Py_ssize_t length, double* outr, double* outi) noexcept nogil:
    cdef double sr = 0.0, si = 0.0
    cdef Py_ssize_t l
    for l in range(length):
        sr += ar[l] * br[l] - ai[l] * bi[l]
        si += ar[l] * bi[l] + ai[l] * br[l]
    outr[0] = sr
    outi[0] = si


def kaczmarz_primal(hrows, const long long[::1] rows, Py_ssize_t target,
                    double gamma, double delta, ref=None):
    # rows of H are read in place as interleaved (re, im) pairs; no copy of H
    hrows = np.ascontiguousarray(hrows, dtype=np.complex128)
    cdef Py_ssize_t k = hrows.shape[0]
    cdef Py_ssize_t length = hrows.shape[1]
    cdef const double[:, ::1] hv = hrows.view(np.float64)
    cdef Py_ssize_t steps = rows.shape[0]
    cdef Py_ssize_t t, l, r
    cdef double ar, ai, er, ei, den, acc, dr, di, hr, hi
    cdef const double* row

    cdef double[::1] mre = np.zeros(length)
    cdef double[::1] mim = np.zeros(length)
    cdef double[::1] nre = np.zeros(k)
    cdef double[::1] nim = np.zeros(k)
    cdef double[::1] norms = np.empty(k)
    cdef double[::1] rre, rim, hist
    cdef bint track = ref is not None
    hist_arr = None
    if track:
        ref = np.asarray(ref, dtype=np.complex128)
        rre = np.ascontiguousarray(ref.real)
        rim = np.ascontiguousarray(ref.imag)
        hist_arr = np.empty(steps)
        hist = hist_arr
    for t in range(steps):
        if rows[t] < 0 or rows[t] >= k:
            raise IndexError("row index out of range")

    with nogil:
        for r in range(k):
            row = &hv[r, 0]
            acc = 0.0
            for l in range(2 * length):
                acc += row[l] * row[l]
            norms[r] = acc

        for t in range(steps):
            r = rows[t]
            row = &hv[r, 0]
            # <h_r, m> = sum conj(h) m
            ar = 0.0
            ai = 0.0
            for l in range(length):
                hr = row[2 * l]
                hi = row[2 * l + 1]
                ar += hr * mre[l] + hi * mim[l]
                ai += hr * mim[l] - hi * mre[l]
            er = -ar - gamma * nre[r]
            ei = -ai - gamma * nim[r]
            if r == target:
                er = er + 1.0
            den = norms[r] + delta
            er = er / den
            ei = ei / den
            for l in range(length):
                hr = row[2 * l]
                hi = row[2 * l + 1]
                mre[l] += er * hr - ei * hi
                mim[l] += er * hi + ei * hr
            nre[r] += er
            nim[r] += ei
            if track:
                acc = 0.0
                for l in range(length):
                    dr = mre[l] - rre[l]
                    di = mim[l] - rim[l]
                    acc += dr * dr + di * di
                hist[t] = sqrt(acc)

    m = np.asarray(mre) + 1j * np.asarray(mim)
    n = np.asarray(nre) + 1j * np.asarray(nim)
    return m, n, hist_arr


def kaczmarz_dual(gram, const long long[::1] targets, const long long[:, ::1] rows,
                  double gamma, double delta):
    gram = np.asarray(gram, dtype=np.complex128)
    cdef double[:, ::1] gre = np.ascontiguousarray(gram.real)
    cdef double[:, ::1] gim = np.ascontiguousarray(gram.imag)
    cdef Py_ssize_t k = gre.shape[0]
    cdef Py_ssize_t cols = rows.shape[0]
    cdef Py_ssize_t steps = rows.shape[1]
    cdef Py_ssize_t c, t, r, tgt
    cdef double ar, ai, er, ei, den

    out_re = np.zeros((cols, k))
    out_im = np.zeros((cols, k))
    cdef double[:, ::1] nre = out_re
    cdef double[:, ::1] nim = out_im

    with nogil:
        for c in range(cols):
            tgt = targets[c]
            for t in range(steps):
                r = rows[c, t]
                _dot(&gre[r, 0], &gim[r, 0], &nre[c, 0], &nim[c, 0], k, &ar, &ai)
                er = -ar - gamma * nre[c, r]
                ei = -ai - gamma * nim[c, r]
                if r == tgt:
                    er = er + 1.0
                den = gre[r, r] + delta
                nre[c, r] += er / den
                nim[c, r] += ei / den
    return out_re + 1j * out_im
