# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython kernels for occurrence-similarity scoring.

Dot products run through BLAS dgemm in row blocks; the per-occurrence max
over query vectors and the top-k mean are fused on each block, so the full
occurrences-by-queries similarity matrix is never materialized. Inputs are
unit-normalized float64 row matrices.
"""
from libc.stdlib cimport free, malloc

import numpy as np

from scipy.linalg.cython_blas cimport dgemm

DEF BLOCK_ROWS = 8192


cdef inline void _block_row_maxima(
    const double[:, ::1] occ,
    Py_ssize_t lo,
    Py_ssize_t hi,
    const double[:, ::1] queries,
    double* scratch,
    double* maxima,
) noexcept nogil:
    """maxima[0:hi-lo] = per-row max of occ[lo:hi] @ queries.T via dgemm."""
    cdef int m = <int> queries.shape[0]
    cdef int d = <int> queries.shape[1]
    cdef int rows = <int> (hi - lo)
    cdef double alpha = 1.0, beta = 0.0
    cdef char trans_t = b'T', trans_n = b'N'
    # scratch holds the (rows x m) product in C order: fortran (m x rows)
    dgemm(
        &trans_t, &trans_n, &m, &rows, &d,
        &alpha,
        <double*> &queries[0, 0], &d,
        <double*> &occ[lo, 0], &d,
        &beta, scratch, &m,
    )
    cdef Py_ssize_t i, q
    cdef double best
    for i in range(rows):
        best = scratch[i * m]
        for q in range(1, m):
            if scratch[i * m + q] > best:
                best = scratch[i * m + q]
        maxima[i] = best


cdef inline double _topk_mean(const double* values, Py_ssize_t n, double* top, int k) noexcept nogil:
    """Mean of the k largest entries of values[0:n] (all of them if n < k)."""
    cdef Py_ssize_t i, j
    cdef int filled = 0
    cdef double v, total
    for i in range(n):
        v = values[i]
        # `top` is ascending; top[0] is the smallest kept value
        if filled < k:
            j = filled
            top[j] = v
            while j > 0 and top[j] < top[j - 1]:
                top[j] = top[j - 1]
                top[j - 1] = v
                j -= 1
            filled += 1
        elif v > top[0]:
            j = 0
            while j + 1 < k and top[j + 1] < v:
                top[j] = top[j + 1]
                j += 1
            top[j] = v
    total = 0.0
    for j in range(filled):
        total += top[j]
    total /= filled
    if total > 1.0:
        total = 1.0
    elif total < -1.0:
        total = -1.0
    return total


def topk_mean_max_sim_batch(
    const double[:, ::1] occ,
    const long long[::1] offsets,
    const double[:, ::1] queries,
    int k,
):
    """Batched top-k mean of per-occurrence maxima over row segments."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if occ.shape[1] != queries.shape[1]:
        raise ValueError("dimension mismatch between occurrences and queries")
    cdef Py_ssize_t n_segments = offsets.shape[0] - 1
    cdef Py_ssize_t total = occ.shape[0]
    cdef Py_ssize_t i
    for i in range(n_segments):
        if offsets[i] >= offsets[i + 1]:
            raise ValueError(f"empty occurrence segment at index {i}")
    if n_segments and offsets[n_segments] > total:
        raise ValueError("offsets exceed occurrence rows")

    out_arr = np.empty(n_segments, dtype=np.float64)
    cdef double[::1] out = out_arr
    if n_segments == 0:
        return out_arr

    cdef int m = <int> queries.shape[0]
    cdef Py_ssize_t used = offsets[n_segments]
    cdef double* maxima = <double*> malloc(used * sizeof(double))
    cdef double* scratch = <double*> malloc(BLOCK_ROWS * m * sizeof(double))
    cdef double* top = <double*> malloc(k * sizeof(double))
    if maxima == NULL or scratch == NULL or top == NULL:
        free(maxima); free(scratch); free(top)
        raise MemoryError()
    cdef Py_ssize_t lo, hi
    try:
        with nogil:
            lo = 0
            while lo < used:
                hi = lo + BLOCK_ROWS
                if hi > used:
                    hi = used
                _block_row_maxima(occ, lo, hi, queries, scratch, maxima + lo)
                lo = hi
            for i in range(n_segments):
                out[i] = _topk_mean(
                    maxima + offsets[i], offsets[i + 1] - offsets[i], top, k
                )
    finally:
        free(maxima); free(scratch); free(top)
    return out_arr


def topk_mean_max_sim(const double[:, ::1] occ, const double[:, ::1] queries, int k):
    """Mean of the k largest per-occurrence maxima of occ·queriesᵀ."""
    if occ.shape[0] == 0:
        raise ValueError("no occurrence vectors")
    offsets = np.array([0, occ.shape[0]], dtype=np.int64)
    return float(topk_mean_max_sim_batch(occ, offsets, queries, k)[0])
