"""Channel training: codebook and subchannel-reliability estimation.

Implicit training has the users send every codeword ``T`` times; explicit
training estimates the channel from pilots and lets the receiver generate
the same training observations artificially from the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codebook import Codebook
from .detectors import dequantize
from .effective_channel import ErrorProbs, TransitionTensor
from .model import NOISE_VAR, Constellation, QuantizerSpec, codeword_inputs, quantize

EPS_FLOOR = 1e-3
DEFAULT_ARTIFICIAL_T = 25


@dataclass(frozen=True, eq=False)
class TrainingOutput:
    codebook_hat: Codebook
    eps_hat: ErrorProbs
    overhead: int
    mode: str
    counts: np.ndarray  # (M, N, p) level histogram of the training observations

    @property
    def repetitions(self) -> int:
        return int(self.counts[0, 0].sum())

    def transition_estimate(self, floor: float = EPS_FLOOR) -> TransitionTensor:
        """Empirical transition matrices, floored and renormalised per row."""
        p_hat = np.maximum(self.counts / self.repetitions, floor)
        p_hat /= p_hat.sum(axis=-1, keepdims=True)
        cb = self.codebook_hat
        return TransitionTensor(np.log(p_hat), cb.m, cb.k)


def implicit_overhead(t: int, m: int, k: int, use_symmetry: bool) -> int:
    total = t * m**k
    return total // 2 if use_symmetry else total


def majority_estimate(obs, levels: int | None = None):
    """Most frequent level (lowest level wins ties).

    Works along the last axis, so ``(..., T)`` arrays give ``(...)`` results.
    """
    obs = np.asarray(obs, dtype=np.int64)
    if obs.shape[-1] == 0:
        raise ValueError("majority rule needs at least one observation")
    levels = levels or int(obs.max()) + 1
    counts = _level_counts(obs, levels)
    out = np.argmax(counts, axis=-1)
    return int(out) if out.ndim == 0 else out


def _level_counts(obs, levels):
    return np.stack([np.count_nonzero(obs == j, axis=-1) for j in range(levels)], axis=-1)


def estimate_error_probs(c_hat, obs, floor: float = EPS_FLOOR):
    """Fraction of training observations that disagree with ``c_hat``, floored."""
    obs = np.asarray(obs)
    if obs.shape[-1] == 0:
        raise ValueError("need at least one observation")
    raw = np.mean(obs != np.asarray(c_hat)[..., None], axis=-1)
    out = np.maximum(raw, floor)
    return float(out) if out.ndim == 0 else out


def mirror_levels(r, q: QuantizerSpec):
    """Level image of the negated analog input on a symmetric quantizer."""
    if not q.symmetric:
        raise ValueError("level mirroring requires a symmetric quantizer")
    return (q.levels - 1) - np.asarray(r)


def symmetry_extend(obs_half, q: QuantizerSpec) -> np.ndarray:
    """Complete training observations from the first half of the codeword indices.

    ``obs_half`` has shape ``(M/2, ...)``; row ``M-1-l`` of the result is the
    mirror image of row ``l``.
    """
    obs_half = np.asarray(obs_half)
    mirrored = mirror_levels(obs_half, q)[::-1]
    return np.concatenate([obs_half, mirrored.astype(obs_half.dtype)], axis=0)


def simulate_training(h, c: Constellation, q: QuantizerSpec, t: int, rng, indices,
                      noise_var: float = NOISE_VAR) -> np.ndarray:
    """Quantized observations ``(len(indices), N, t)`` of repeated codeword transmissions."""
    if t < 1:
        raise ValueError("training needs T >= 1")
    h = np.asarray(h, dtype=np.float64)
    mean = codeword_inputs(c, h.shape[1] // 2)[indices] @ h.T
    noisy = mean[:, :, None]
    if noise_var > 0:
        noisy = noisy + math.sqrt(noise_var) * rng.standard_normal(mean.shape + (t,))
    else:
        noisy = np.repeat(noisy, t, axis=2)
    return quantize(noisy, q)


def _estimate(obs, c, q, k, floor, overhead, mode):
    counts = _level_counts(obs, q.levels)
    c_hat = np.argmax(counts, axis=-1).astype(np.uint8)
    t = obs.shape[-1]
    raw = 1.0 - np.take_along_axis(counts, c_hat[..., None].astype(np.int64), -1)[..., 0] / t
    eps = ErrorProbs.from_eps(raw, floor)
    cb = Codebook(c_hat, q.levels, c.modulation_order, k)
    return TrainingOutput(cb, eps, overhead, mode, counts)


def implicit_train(h, c: Constellation, q: QuantizerSpec, t: int, use_symmetry: bool, rng,
                   floor: float = EPS_FLOOR, noise_var: float = NOISE_VAR) -> TrainingOutput:
    """Estimate the code from ``t`` over-the-air repetitions of every codeword.

    ``h`` is the true channel; it is used only to simulate the transmissions.
    With ``use_symmetry`` only the first half of the codewords is sent.
    """
    h = np.asarray(h, dtype=np.float64)
    k = h.shape[1] // 2
    m_k = c.modulation_order**k
    if use_symmetry:
        if not q.symmetric:
            raise ValueError("symmetry reduction requires a symmetric quantizer")
        if not c.negation_closed:
            raise ValueError("symmetry reduction requires points[m-1-w] == -points[w]")
        if m_k % 2:
            raise ValueError("symmetry reduction requires an even number of codewords")
        half = simulate_training(h, c, q, t, rng, np.arange(m_k // 2), noise_var)
        obs = symmetry_extend(half, q)
    else:
        obs = simulate_training(h, c, q, t, rng, np.arange(m_k), noise_var)
    overhead = implicit_overhead(t, c.modulation_order, k, use_symmetry)
    return _estimate(obs, c, q, k, floor, overhead, "implicit")


def explicit_train(h_hat, c: Constellation, q: QuantizerSpec, rng, t: int = DEFAULT_ARTIFICIAL_T,
                   pilot_slots: int = 0, floor: float = EPS_FLOOR,
                   noise_var: float = NOISE_VAR) -> TrainingOutput:
    """Artificial training from a channel estimate; costs only the pilot slots."""
    h_hat = np.asarray(h_hat, dtype=np.float64)
    k = h_hat.shape[1] // 2
    m_k = c.modulation_order**k
    obs = simulate_training(h_hat, c, q, t, rng, np.arange(m_k), noise_var)
    return _estimate(obs, c, q, k, floor, pilot_slots, "explicit")


# ---------------------------------------------------------------------------
# Channel estimation for explicit training
# ---------------------------------------------------------------------------


def genie_noise(h, sigma_e: float, rng) -> np.ndarray:
    """``H + sigma_e * E`` with IID standard Gaussian ``E``."""
    h = np.asarray(h, dtype=np.float64)
    if sigma_e == 0:
        return h.copy()
    return h + sigma_e * rng.standard_normal(h.shape)


def default_sigma_e(tt: int, snr: float) -> float:
    return math.sqrt(1.0 / (tt * snr))


def pilot_matrix(k: int, tt: int, snr: float) -> np.ndarray:
    """``(2K, tt)`` real pilots with orthogonal rows and per-user power ``snr``.

    Rows are orthonormal DCT-II basis vectors, rescaled.
    """
    if tt < 2 * k:
        raise ValueError(f"least squares needs at least 2K={2 * k} pilot slots, got {tt}")
    n = np.arange(tt)
    rows = np.cos(np.pi * (n[None, :] + 0.5) * np.arange(2 * k)[:, None] / tt)
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows * math.sqrt(tt * snr / 2.0)


def send_pilots(h, pilots, q: QuantizerSpec | None, rng, noise_var: float = NOISE_VAR):
    h = np.asarray(h, dtype=np.float64)
    y = h @ pilots
    if noise_var > 0:
        y = y + math.sqrt(noise_var) * rng.standard_normal(y.shape)
    return y if q is None else quantize(y, q)


def project_block_structure(h) -> np.ndarray:
    """Nearest matrix of the form ``[[A, -B], [B, A]]``."""
    h = np.asarray(h, dtype=np.float64)
    nr, k = h.shape[0] // 2, h.shape[1] // 2
    a = 0.5 * (h[:nr, :k] + h[nr:, k:])
    b = 0.5 * (h[nr:, :k] - h[:nr, k:])
    return np.block([[a, -b], [b, a]])


def ls_estimate(y, pilots, q: QuantizerSpec | None = None, noise_var: float = NOISE_VAR):
    """Least-squares channel estimate from (possibly quantized) pilot observations.

    Quantized observations are dequantized first and every column of the
    estimate is rescaled to the expected Rayleigh column norm ``sqrt(N/2)``,
    since low-resolution ADCs do not preserve amplitude.
    """
    pilots = np.asarray(pilots, dtype=np.float64)
    if pilots.shape[1] < pilots.shape[0]:
        raise ValueError("underdetermined: fewer pilot slots than real channel columns")
    v = dequantize(y, q, noise_var) if q is not None else np.asarray(y, dtype=np.float64)
    h_hat = v @ pilots.T @ np.linalg.inv(pilots @ pilots.T)
    h_hat = project_block_structure(h_hat)
    if q is not None:
        norms = np.linalg.norm(h_hat, axis=0)
        norms[norms == 0] = 1.0
        h_hat = h_hat * (math.sqrt(h_hat.shape[0] / 2.0) / norms)
    return h_hat


ESTIMATORS = ("genie_noise", "scaled_ls")


def estimate_channel(scheme: str, h, snr: float, tt: int, rng, q: QuantizerSpec | None = None,
                     sigma_e: float | None = None, noise_var: float = NOISE_VAR) -> np.ndarray:
    """Channel estimate from ``tt`` pilot slots under the given scheme.

    ``genie_noise`` perturbs the true channel with estimation noise of
    variance ``sigma_e**2`` (default ``1/(tt*snr)``); ``scaled_ls`` sends
    orthogonal pilots through the quantized channel and applies
    :func:`ls_estimate`.
    """
    if scheme == "genie_noise":
        if sigma_e is None:
            sigma_e = default_sigma_e(tt, snr)
        return genie_noise(h, sigma_e, rng)
    if scheme == "scaled_ls":
        k = np.asarray(h).shape[1] // 2
        pilots = pilot_matrix(k, tt, snr)
        y = send_pilots(h, pilots, q, rng, noise_var)
        return ls_estimate(y, pilots, q, noise_var)
    raise ValueError(f"unknown estimator {scheme!r}; choose from {ESTIMATORS}")
