# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Semantics match ``ddmft._pykernels`` bit for bit."""

import numpy as np

ctypedef fused cplx:
    float complex
    double complex


def averages_recursion(const double[:, ::1] power):
    """Average-of-squares term for a block of time sequences.

    ``power[n, k]`` holds the squared modulus of frame ``n`` of sequence ``k``.
    """
    cdef Py_ssize_t nframes = power.shape[0]
    cdef Py_ssize_t width = power.shape[1]
    out_arr = np.zeros((nframes, width), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t n, k, row
    cdef double w_prev, w_new
    with nogil:
        if nframes > 0:
            row = nframes - 1
            for k in range(width):
                out[row, k] = power[0, k] + power[row, k]
        for n in range(1, nframes):
            row = nframes - n - 1
            w_prev = <double>n / <double>(n + 1)
            w_new = <double>(n + 1)
            for k in range(width):
                out[row, k] = w_prev * out[row + 1, k] + (power[n, k] + power[row, k]) / w_new
    return out_arr


def accumulate_pairs(double[:, :] acc, const cplx[:, :] window,
                     const cplx[:] current, const Py_ssize_t[:] slots):
    """``acc[l] += |window[slots[l]] - current|**2`` for every ``slots[l] >= 0``."""
    cdef Py_ssize_t nlags = acc.shape[0]
    cdef Py_ssize_t width = acc.shape[1]
    cdef Py_ssize_t l, q, s
    cdef double dr, di
    with nogil:
        for l in range(nlags):
            s = slots[l]
            if s < 0:
                continue
            for q in range(width):
                dr = <double>window[s, q].real - <double>current[q].real
                di = <double>window[s, q].imag - <double>current[q].imag
                acc[l, q] += dr * dr + di * di
