# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_kernels_py``."""
import numpy as np


def hammerstein_basis(const double complex[::1] x, int k_terms, int l_taps):
    cdef Py_ssize_t n = x.shape[0]
    out = np.zeros((n, k_terms * l_taps), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t i, lag, k
    cdef double complex v, branch
    cdef double mag2
    for i in range(n):
        for lag in range(l_taps):
            if i < lag:
                continue
            v = x[i - lag]
            mag2 = v.real * v.real + v.imag * v.imag
            branch = v
            for k in range(k_terms):
                o[i, k * l_taps + lag] = branch
                branch = branch * mag2
    return out


def hammerstein_apply(const double complex[::1] x, const double complex[:, ::1] coeffs):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k_terms = coeffs.shape[0]
    cdef Py_ssize_t l_taps = coeffs.shape[1]
    out = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] y = out
    cdef Py_ssize_t i, lag, k
    cdef double complex v, acc, total
    cdef double mag2
    for i in range(n):
        total = 0
        for lag in range(l_taps):
            if i < lag:
                break
            v = x[i - lag]
            mag2 = v.real * v.real + v.imag * v.imag
            acc = coeffs[k_terms - 1, lag]
            for k in range(k_terms - 2, -1, -1):
                acc = acc * mag2 + coeffs[k, lag]
            total = total + acc * v
        y[i] = total
    return out


def tdl_filter(const double complex[::1] x, const double complex[:, ::1] taps,
               Py_ssize_t block_len, const double complex[::1] history):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_blocks = taps.shape[0]
    cdef Py_ssize_t l_taps = taps.shape[1]
    cdef Py_ssize_t pad = history.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] y = out
    cdef Py_ssize_t i, lag, b, j
    cdef double complex acc, s
    for i in range(n):
        b = i // block_len
        if b >= n_blocks:
            b = n_blocks - 1
        acc = 0
        for lag in range(l_taps):
            j = i - lag
            if j >= 0:
                s = x[j]
            elif pad + j >= 0:
                s = history[pad + j]
            else:
                continue
            acc = acc + taps[b, lag] * s
        y[i] = acc
    return out
