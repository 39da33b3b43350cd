"""Pure-numpy implementations of the exhaustive-search kernels.

Scores are accumulated one subchannel at a time, in increasing subchannel
order, which reproduces the compiled kernels' floating-point results exactly.
"""

import numpy as np

_CHUNK_ELEMS = 1 << 22


def _chunks(n_obs, n_cw):
    step = max(1, _CHUNK_ELEMS // max(n_cw, 1))
    for start in range(0, n_obs, step):
        yield slice(start, min(start + step, n_obs))


def _finish(scores):
    index = np.argmin(scores, axis=1)
    best = scores[np.arange(scores.shape[0]), index]
    ties = np.count_nonzero(scores == best[:, None], axis=1)
    return index.astype(np.int64), best, ties.astype(np.int64)


def weighted_argmin(obs, codewords, alpha, beta):
    n_obs = obs.shape[0]
    n_cw, n = codewords.shape
    index = np.zeros(n_obs, dtype=np.int64)
    score = np.zeros(n_obs, dtype=np.float64)
    ties = np.zeros(n_obs, dtype=np.int64)
    for sl in _chunks(n_obs, n_cw):
        block = obs[sl]
        s = np.zeros((block.shape[0], n_cw))
        for i in range(n):
            match = block[:, i, None] == codewords[None, :, i]
            s += np.where(match, alpha[None, :, i], beta[None, :, i])
        index[sl], score[sl], ties[sl] = _finish(s)
    return index, score, ties


def table_argmin(obs, cost):
    n_obs = obs.shape[0]
    n_cw, n, _ = cost.shape
    index = np.zeros(n_obs, dtype=np.int64)
    score = np.zeros(n_obs, dtype=np.float64)
    ties = np.zeros(n_obs, dtype=np.int64)
    for sl in _chunks(n_obs, n_cw):
        block = obs[sl]
        s = np.zeros((block.shape[0], n_cw))
        for i in range(n):
            s += cost[:, i, :][:, block[:, i]].T
        index[sl], score[sl], ties[sl] = _finish(s)
    return index, score, ties


def min_pairwise_distance(codewords):
    n_cw, n = codewords.shape
    if n_cw < 2:
        return n
    best = n
    step = max(1, _CHUNK_ELEMS // max(n_cw * n, 1))
    for start in range(0, n_cw - 1, step):
        stop = min(start + step, n_cw - 1)
        a = codewords[start:stop]
        d = np.count_nonzero(a[:, None, :] != codewords[None, :, :], axis=2)
        # keep only pairs (a, b) with b > a
        rows = np.arange(start, stop)[:, None]
        d = np.where(np.arange(n_cw)[None, :] > rows, d, n + 1)
        best = min(best, int(d.min()))
        if best == 0:
            break
    return best
