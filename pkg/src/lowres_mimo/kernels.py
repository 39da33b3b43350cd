"""Backend selection for the exhaustive-search kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``LOWRES_MIMO_PURE`` is set to a non-empty value other
than ``0``, the numpy fallback is used. Both backends return identical
results, including tie counts.

All kernels search hypotheses ``l = 0 .. M-1`` and keep the lowest index
among equal scores.
"""

import os

import numpy as np

from . import _kernels_py

_py_backend = _kernels_py

if os.environ.get("LOWRES_MIMO_PURE", "") not in ("", "0"):
    _compiled_backend = None
else:
    try:
        from . import _kernels as _compiled_backend
    except ImportError:  # extension not built
        _compiled_backend = None

BACKENDS = {"python": _py_backend}
if _compiled_backend is not None:
    BACKENDS["compiled"] = _compiled_backend

BACKEND = "compiled" if _compiled_backend is not None else "python"
_impl = BACKENDS[BACKEND]


def _get(backend):
    if backend is None:
        return _impl
    try:
        return BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {backend!r}") from None


def _as_obs(obs):
    obs = np.ascontiguousarray(obs, dtype=np.uint8)
    if obs.ndim == 1:
        obs = obs[None, :]
    return obs


def weighted_argmin(obs, codewords, alpha, beta, backend=None):
    """Minimise the weighted Hamming distance over all codewords.

    ``obs`` is ``(T, N)`` (or ``(N,)``), ``codewords`` is ``(M, N)`` and
    ``alpha``/``beta`` are ``(M, N)`` non-negative match/mismatch weights.
    Returns ``(index, score, tie_count)`` arrays of length ``T``.
    """
    obs = _as_obs(obs)
    codewords = np.ascontiguousarray(codewords, dtype=np.uint8)
    alpha = np.ascontiguousarray(np.broadcast_to(alpha, codewords.shape), dtype=np.float64)
    beta = np.ascontiguousarray(np.broadcast_to(beta, codewords.shape), dtype=np.float64)
    if obs.shape[1] != codewords.shape[1]:
        raise ValueError(
            f"observation length {obs.shape[1]} != codeword length {codewords.shape[1]}"
        )
    return _get(backend).weighted_argmin(obs, codewords, alpha, beta)


def table_argmin(obs, cost, backend=None):
    """Minimise ``sum_i cost[l, i, obs[i]]`` over hypotheses ``l``.

    ``cost`` has shape ``(M, N, p)`` with entries in ``[0, inf]``.
    """
    obs = _as_obs(obs)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if obs.shape[1] != cost.shape[1]:
        raise ValueError(f"observation length {obs.shape[1]} != {cost.shape[1]}")
    if obs.size and int(obs.max()) >= cost.shape[2]:
        raise ValueError("observation level outside the cost table")
    return _get(backend).table_argmin(obs, cost)


def min_pairwise_distance(codewords, backend=None):
    codewords = np.ascontiguousarray(codewords, dtype=np.uint8)
    return int(_get(backend).min_pairwise_distance(codewords))
