"""Transition probabilities of the effective parallel p-ary channels.

Every probability is carried in natural-log form so that weights
``log(1/eps)`` stay finite deep into the Gaussian tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtr

from .codebook import Codebook
from .model import NOISE_VAR, Constellation, QuantizerSpec, codeword_inputs, quantize


def q_function(t):
    """Standard normal upper-tail probability."""
    return 0.5 * math.erfc(t / math.sqrt(2.0)) if np.isscalar(t) else ndtr(-np.asarray(t))


def log_q_function(t):
    return log_ndtr(-np.asarray(t, dtype=np.float64))


def _log_interval_prob(a, b):
    """``log P(a <= Z < b)`` for standard normal Z, accurate in both tails."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # interval entirely above zero: upper tails
        lqa, lqb = log_ndtr(-a), log_ndtr(-b)
        upper = lqa + np.log1p(-np.exp(lqb - lqa))
        # entirely below zero: lower tails
        lpa, lpb = log_ndtr(a), log_ndtr(b)
        lower = lpb + np.log1p(-np.exp(lpa - lpb))
        middle = np.log1p(-(ndtr(-b) + ndtr(a)))
    out = np.where(a >= 0, upper, np.where(b <= 0, lower, middle))
    return np.where(np.isnan(out), -np.inf, out)


@dataclass(frozen=True, eq=False)
class TransitionTensor:
    """``log_probs[l, i, j] = log P(r_i = j | codeword l sent)``."""

    log_probs: np.ndarray
    m: int = 0
    k: int = 0

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def shape(self):
        return self.log_probs.shape

    def matrix(self, index: int) -> np.ndarray:
        return np.exp(self.log_probs[index])


def log_transition_from_means(mean, q: QuantizerSpec, noise_var=NOISE_VAR) -> np.ndarray:
    """Log transition probabilities for noiseless received means of any shape.

    ``noise_var`` is a scalar or one variance per subchannel.
    """
    mean = np.asarray(mean, dtype=np.float64)
    edges = q.edges()
    if np.ndim(noise_var):
        # per-subchannel noise variances, broadcast along the last axis of ``mean``
        sigma = np.sqrt(np.asarray(noise_var, dtype=np.float64))[..., None]
        if np.any(sigma == 0):
            raise ValueError("per-subchannel noise variances must be positive")
        lo = (edges[1:] - mean[..., None]) / sigma
        hi = (edges[:-1] - mean[..., None]) / sigma
        return _log_interval_prob(lo, hi)
    if noise_var == 0:
        lv = quantize(mean, q)
        out = np.full(mean.shape + (q.levels,), -np.inf)
        np.put_along_axis(out, np.asarray(lv, dtype=np.int64)[..., None], 0.0, axis=-1)
        return out
    sigma = math.sqrt(noise_var)
    lo = (edges[1:] - mean[..., None]) / sigma
    hi = (edges[:-1] - mean[..., None]) / sigma
    return _log_interval_prob(lo, hi)


def transition_tensor(h, c: Constellation, q: QuantizerSpec, noise_var=NOISE_VAR,
                      offset=None) -> TransitionTensor:
    h = np.asarray(h, dtype=np.float64)
    mean = codeword_inputs(c, h.shape[1] // 2) @ h.T
    if offset is not None:
        mean = mean + np.asarray(offset, dtype=np.float64)
    return TransitionTensor(log_transition_from_means(mean, q, noise_var), c.modulation_order,
                            h.shape[1] // 2)


def transition_matrix(h, c: Constellation, q: QuantizerSpec, index: int,
                      noise_var: float = NOISE_VAR) -> np.ndarray:
    """``N x p`` transition matrix of codeword ``index``."""
    h = np.asarray(h, dtype=np.float64)
    k = h.shape[1] // 2
    if not 0 <= index < c.modulation_order**k:
        raise ValueError(f"codeword index {index} out of range")
    x = codeword_inputs(c, k)[index]
    return np.exp(log_transition_from_means(h @ x, q, noise_var))


def one_bit_crossover(h, c: Constellation, index: int, noise_var: float = NOISE_VAR) -> np.ndarray:
    """Crossover probabilities ``Q(|h_i^T x| / sigma)`` of the one-bit subchannels."""
    h = np.asarray(h, dtype=np.float64)
    k = h.shape[1] // 2
    mu = h @ codeword_inputs(c, k)[index]
    return q_function(np.abs(mu) / math.sqrt(noise_var))


@dataclass(frozen=True, eq=False)
class ErrorProbs:
    """Per-hypothesis, per-subchannel symbol error probabilities (log form)."""

    log_eps: np.ndarray
    floor: float = 0.0

    @property
    def eps(self) -> np.ndarray:
        return np.exp(self.log_eps)

    @property
    def floored(self) -> bool:
        return self.floor > 0

    @classmethod
    def from_eps(cls, eps, floor: float = 0.0) -> "ErrorProbs":
        eps = np.asarray(eps, dtype=np.float64)
        if floor > 0:
            eps = np.maximum(eps, floor)
        with np.errstate(divide="ignore"):
            return cls(np.log(eps), floor)

    def with_floor(self, floor: float) -> "ErrorProbs":
        return ErrorProbs(np.maximum(self.log_eps, math.log(floor)), floor)


def exact_error_probs(tensor: TransitionTensor, cb: Codebook) -> ErrorProbs:
    """``eps[l, i] = sum_{j != c_{l,i}} P_l(i, j)``."""
    lp = tensor.log_probs
    if lp.shape[:2] != cb.codewords.shape:
        raise ValueError("tensor and codebook dimensions disagree")
    own = np.arange(lp.shape[2])[None, None, :] == cb.codewords[:, :, None].astype(np.int64)
    masked = np.where(own, -np.inf, lp)
    with np.errstate(divide="ignore"):
        log_eps = logsumexp(masked, axis=2)
    return ErrorProbs(log_eps, 0.0)
