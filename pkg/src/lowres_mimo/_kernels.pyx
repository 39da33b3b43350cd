# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled exhaustive-search kernels.

Semantics are identical to :mod:`lowres_mimo._kernels_py`; per-hypothesis
scores are accumulated left to right over subchannels so both backends
produce bit-identical scores.
"""

import numpy as np

cimport cython
from libc.math cimport INFINITY


def weighted_argmin(const unsigned char[:, ::1] obs,
                    const unsigned char[:, ::1] codewords,
                    const double[:, ::1] alpha,
                    const double[:, ::1] beta):
    cdef Py_ssize_t n_obs = obs.shape[0]
    cdef Py_ssize_t n_cw = codewords.shape[0]
    cdef Py_ssize_t n = codewords.shape[1]
    cdef Py_ssize_t t, l, i, best_l, ties
    cdef double s, best

    index = np.zeros(n_obs, dtype=np.int64)
    score = np.zeros(n_obs, dtype=np.float64)
    tie_count = np.zeros(n_obs, dtype=np.int64)
    cdef long long[::1] index_v = index
    cdef double[::1] score_v = score
    cdef long long[::1] ties_v = tie_count

    with nogil:
        for t in range(n_obs):
            best = 0.0
            for i in range(n):
                if obs[t, i] == codewords[0, i]:
                    best = best + alpha[0, i]
                else:
                    best = best + beta[0, i]
            best_l = 0
            ties = 1
            for l in range(1, n_cw):
                s = 0.0
                for i in range(n):
                    if obs[t, i] == codewords[l, i]:
                        s = s + alpha[l, i]
                    else:
                        s = s + beta[l, i]
                    # non-negative weights: partial sums never decrease
                    if s > best:
                        break
                if s < best:
                    best = s
                    best_l = l
                    ties = 1
                elif s == best:
                    ties = ties + 1
            index_v[t] = best_l
            score_v[t] = best
            ties_v[t] = ties
    return index, score, tie_count


def table_argmin(const unsigned char[:, ::1] obs, const double[:, :, ::1] cost):
    cdef Py_ssize_t n_obs = obs.shape[0]
    cdef Py_ssize_t n_cw = cost.shape[0]
    cdef Py_ssize_t n = cost.shape[1]
    cdef Py_ssize_t t, l, i, best_l, ties
    cdef double s, best

    index = np.zeros(n_obs, dtype=np.int64)
    score = np.zeros(n_obs, dtype=np.float64)
    tie_count = np.zeros(n_obs, dtype=np.int64)
    cdef long long[::1] index_v = index
    cdef double[::1] score_v = score
    cdef long long[::1] ties_v = tie_count

    with nogil:
        for t in range(n_obs):
            best = 0.0
            for i in range(n):
                best = best + cost[0, i, obs[t, i]]
            best_l = 0
            ties = 1
            for l in range(1, n_cw):
                s = 0.0
                for i in range(n):
                    s = s + cost[l, i, obs[t, i]]
                    if s > best:
                        break
                if s < best:
                    best = s
                    best_l = l
                    ties = 1
                elif s == best:
                    ties = ties + 1
            index_v[t] = best_l
            score_v[t] = best
            ties_v[t] = ties
    return index, score, tie_count


def min_pairwise_distance(const unsigned char[:, ::1] codewords):
    cdef Py_ssize_t n_cw = codewords.shape[0]
    cdef Py_ssize_t n = codewords.shape[1]
    cdef Py_ssize_t a, b, i, d, best
    if n_cw < 2:
        return n
    best = n
    with nogil:
        for a in range(n_cw - 1):
            for b in range(a + 1, n_cw):
                d = 0
                for i in range(n):
                    if codewords[a, i] != codewords[b, i]:
                        d = d + 1
                        if d >= best:
                            break
                if d < best:
                    best = d
                    if best == 0:
                        break
            if best == 0:
                break
    return best
