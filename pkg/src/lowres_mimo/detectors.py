"""Exhaustive codebook decoders, a ZF baseline and SIC complexity reduction.

Every decoder searches all hypotheses and resolves equal scores in favour of
the lowest codeword index. Single-observation functions return a
:class:`DetectionResult`; the ``*_batch`` variants take ``(T, N)`` arrays and
return ``(index, score, tie_count)`` arrays.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import subspace_angles

from . import kernels
from .codebook import Codebook, WeightSet, build_codebook
from .effective_channel import (
    ErrorProbs,
    TransitionTensor,
    exact_error_probs,
    transition_tensor,
)
from .model import (
    NOISE_VAR,
    Constellation,
    QuantizerSpec,
    index_to_messages,
    indices_to_messages,
    messages_to_indices,
    user_columns,
)


@dataclass(frozen=True)
class DetectionResult:
    index: int
    messages: tuple
    score: float
    tie_count: int
    degenerate: bool = False
    evaluations: int = 0


def _result(index, score, ties, m, k, evaluations, degenerate=False):
    return DetectionResult(
        int(index),
        tuple(int(v) for v in index_to_messages(int(index), m, k)),
        float(score),
        int(ties),
        degenerate,
        evaluations,
    )


# ---------------------------------------------------------------------------
# Batch decoders
# ---------------------------------------------------------------------------


def mdd_batch(obs, cb: Codebook):
    return kernels.weighted_argmin(obs, cb.codewords, 0.0, 1.0)


def weighted_batch(obs, cb: Codebook, weights: WeightSet):
    if weights.shape != cb.codewords.shape:
        raise ValueError(f"weight shape {weights.shape} != codebook shape {cb.codewords.shape}")
    return kernels.weighted_argmin(obs, cb.codewords, weights.alpha, weights.beta)


def wmdd_weights(eps: ErrorProbs) -> WeightSet:
    if np.any(np.isneginf(eps.log_eps)):
        raise ValueError("zero error probability: apply a floor before wMDD")
    if np.any(eps.log_eps > 0):
        raise ValueError("error probabilities must not exceed 1")
    return WeightSet.from_log_eps(eps.log_eps)


def wmdd_batch(obs, cb: Codebook, eps: ErrorProbs):
    return weighted_batch(obs, cb, wmdd_weights(eps))


def emld_batch(obs, tensor: TransitionTensor):
    """Returns ``(index, log_likelihood, tie_count)``."""
    index, cost, ties = kernels.table_argmin(obs, -tensor.log_probs)
    return index, -cost, ties


# ---------------------------------------------------------------------------
# Single-observation decoders
# ---------------------------------------------------------------------------


def mdd(r, cb: Codebook) -> DetectionResult:
    idx, score, ties = mdd_batch(r, cb)
    return _result(idx[0], score[0], ties[0], cb.m, cb.k, cb.size)


def unified_weighted_decode(r, cb: Codebook, w: WeightSet) -> DetectionResult:
    idx, score, ties = weighted_batch(r, cb, w)
    return _result(idx[0], score[0], ties[0], cb.m, cb.k, cb.size)


def wmdd(r, cb: Codebook, eps: ErrorProbs) -> DetectionResult:
    return unified_weighted_decode(r, cb, wmdd_weights(eps))


def emld(r, tensor: TransitionTensor) -> DetectionResult:
    """Maximum-likelihood decoding over the effective channel.

    If every hypothesis has zero likelihood, index 0 is returned with
    ``degenerate=True``.
    """
    idx, ll, ties = emld_batch(r, tensor)
    degenerate = bool(np.isneginf(ll[0]))
    return _result(0 if degenerate else idx[0], ll[0], ties[0], tensor.m, tensor.k,
                   tensor.shape[0], degenerate)


# ---------------------------------------------------------------------------
# Zero-forcing baseline
# ---------------------------------------------------------------------------


def dequantize(r, q: QuantizerSpec, noise_var: float = NOISE_VAR) -> np.ndarray:
    """Representative analog value per level.

    Interior bins map to their midpoint; the two unbounded bins map to the
    adjacent threshold shifted outward by one noise standard deviation.
    """
    th = np.array(q.thresholds)
    sigma = math.sqrt(noise_var) if noise_var > 0 else 1.0
    values = np.empty(q.levels)
    values[0] = th[0] + sigma
    values[-1] = th[-1] - sigma
    values[1:-1] = 0.5 * (th[:-1] + th[1:])
    return values[np.asarray(r, dtype=np.int64)]


def zf_batch(obs, h, q: QuantizerSpec, c: Constellation, noise_var: float = NOISE_VAR):
    h = np.asarray(h, dtype=np.float64)
    if np.linalg.matrix_rank(h) < h.shape[1]:
        raise np.linalg.LinAlgError("ZF requires a full-column-rank channel")
    k = h.shape[1] // 2
    obs = np.atleast_2d(obs)
    x = dequantize(obs, q, noise_var) @ np.linalg.pinv(h).T
    sym = x[:, :k] + 1j * x[:, k:]
    w = np.argmin(np.abs(sym[..., None] - c.points[None, None, :]), axis=-1)
    index = messages_to_indices(w, c.modulation_order)
    return index, np.zeros(len(index)), np.ones(len(index), dtype=np.int64)


def zf_detect(r, h, q: QuantizerSpec, c: Constellation, noise_var: float = NOISE_VAR) -> DetectionResult:
    idx, score, ties = zf_batch(r, h, q, c, noise_var)
    k = np.asarray(h).shape[1] // 2
    return _result(idx[0], score[0], ties[0], c.modulation_order, k, 0)


# ---------------------------------------------------------------------------
# SIC
# ---------------------------------------------------------------------------


def partition_score(h, group_a, k: int) -> float:
    """Smallest principal angle between the column spaces of the two user groups."""
    group_a = sorted(group_a)
    group_b = [u for u in range(k) if u not in group_a]
    ha = h[:, user_columns(group_a, k)]
    hb = h[:, user_columns(group_b, k)]
    return float(np.min(subspace_angles(ha, hb)))


_SCORE_TOL = 1e-12


def partition_users(h, k1: int, exhaustive_limit: int = 10):
    """Split users into a stage-1 group of size ``k1`` and the rest.

    Maximises :func:`partition_score`; exhaustive over all groups for
    ``K <= exhaustive_limit`` (lexicographically first among equal scores),
    greedy pairwise swaps otherwise.
    """
    h = np.asarray(h, dtype=np.float64)
    k = h.shape[1] // 2
    if not 1 <= k1 < k:
        raise ValueError(f"need 1 <= k1 < K, got k1={k1}, K={k}")
    if k <= exhaustive_limit:
        best, best_score = None, -np.inf
        for group in itertools.combinations(range(k), k1):
            s = partition_score(h, group, k)
            if s > best_score + _SCORE_TOL:
                best, best_score = group, s
        a = list(best)
    else:
        a = list(range(k1))
        best_score = partition_score(h, a, k)
        improved = True
        while improved:
            improved = False
            for i, j in itertools.product(range(k1), range(k)):
                if j in a:
                    continue
                trial = sorted(a[:i] + [j] + a[i + 1:])
                s = partition_score(h, trial, k)
                if s > best_score + _SCORE_TOL:
                    a, best_score, improved = trial, s, True
                    break
    a = sorted(a)
    b = [u for u in range(k) if u not in a]
    return tuple(a), tuple(b)


def sic_hypothesis_count(m: int, k1: int, k2: int) -> int:
    return m**k1 + m**k2


def _stage_decode(obs, sub_h, c, q, inner, noise_var, offset=None):
    cb = build_codebook(sub_h, c, q, offset=offset)
    if inner == "mdd":
        idx, _, _ = mdd_batch(obs, cb)
    elif inner in ("wmdd", "emld"):
        tensor = transition_tensor(sub_h, c, q, noise_var, offset=offset)
        if inner == "emld":
            idx, _, _ = emld_batch(obs, tensor)
        else:
            eps = exact_error_probs(tensor, cb).with_floor(np.finfo(float).tiny)
            idx, _, _ = wmdd_batch(obs, cb, eps)
    else:
        raise ValueError(f"unknown inner detector {inner!r}")
    return idx, cb.size


def sic_decode_batch(obs, h, c: Constellation, q: QuantizerSpec, partition, inner="wmdd",
                     noise_var: float = NOISE_VAR):
    """Two-stage successive decoding of ``(T, N)`` observations.

    Stage 1 decodes group A against the code of ``H_A`` alone, with the
    interference of group B folded into the per-subchannel noise variance of
    its reliabilities. Stage 2 decodes
    group B against the conditional code ``phi(H_A x_A_hat + H_B x_B)``.
    Returns ``(index, evaluations_per_observation)``.
    """
    h = np.asarray(h, dtype=np.float64)
    obs = np.atleast_2d(np.asarray(obs, dtype=np.uint8))
    k = h.shape[1] // 2
    m = c.modulation_order
    group_a, group_b = (list(g) for g in partition)
    if sorted(group_a + group_b) != list(range(k)) or not group_a or not group_b:
        raise ValueError(f"invalid partition {partition} for K={k}")
    ha = h[:, user_columns(group_a, k)]
    hb = h[:, user_columns(group_b, k)]
    # stage 1 sees group B as extra Gaussian noise in its reliabilities
    sym_var = c.mean_power() / 2.0
    stage1_var = noise_var + sym_var * np.sum(hb**2, axis=1)
    idx_a, size_a = _stage_decode(obs, ha, c, q, inner, stage1_var)
    w_a = indices_to_messages(idx_a, m, len(group_a))

    w = np.zeros((obs.shape[0], k), dtype=np.int64)
    w[:, group_a] = w_a
    size_b = m ** len(group_b)
    # observations sharing a stage-1 decision share a conditional code
    for a_index in np.unique(idx_a):
        rows = np.flatnonzero(idx_a == a_index)
        xa = c.points[w_a[rows[0]]]
        offset = ha @ np.concatenate([xa.real, xa.imag])
        idx_b, size_b = _stage_decode(obs[rows], hb, c, q, inner, noise_var, offset=offset)
        w[np.ix_(rows, group_b)] = indices_to_messages(idx_b, m, len(group_b))
    return messages_to_indices(w, m), size_a + size_b


def sic_decode(r, h, c: Constellation, q: QuantizerSpec, partition, inner="wmdd",
               noise_var: float = NOISE_VAR) -> DetectionResult:
    idx, evaluations = sic_decode_batch(r, h, c, q, partition, inner, noise_var)
    k = np.asarray(h).shape[1] // 2
    return _result(idx[0], np.nan, 1, c.modulation_order, k, evaluations)
