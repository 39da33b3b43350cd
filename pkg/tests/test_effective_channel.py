import math

import mpmath
import numpy as np
import pytest
from scipy import stats

from lowres_mimo.codebook import build_codebook
from lowres_mimo.effective_channel import (
    ErrorProbs,
    _log_interval_prob,
    exact_error_probs,
    log_q_function,
    one_bit_crossover,
    q_function,
    transition_matrix,
    transition_tensor,
)
from lowres_mimo.model import (
    codeword_inputs,
    observe,
    one_bit_spec,
    qam16,
    qpsk,
    two_bit_spec,
)

from conftest import random_real_channel


def test_q_function_values():
    assert q_function(0.0) == 0.5
    assert abs(q_function(1.2816) - 0.1) < 5e-5
    for t in (0.5, 1.0, 2.0):
        assert q_function(-t) == pytest.approx(1 - q_function(t), abs=1e-15)
    arr = q_function(np.array([0.0, 1.0]))
    assert np.allclose(arr, [0.5, stats.norm.sf(1.0)])


def test_log_q_deep_tail():
    # far below double underflow of Q itself
    assert log_q_function(40.0) == pytest.approx(stats.norm.logsf(40.0), rel=1e-12)
    assert np.isfinite(log_q_function(37.0))


def test_log_interval_prob_against_scipy():
    a = np.array([-np.inf, -3.0, -1.0, 0.5, 2.0, 8.0, -12.0])
    b = np.array([0.0, -2.5, 1.0, 0.7, np.inf, 9.0, -11.0])
    mpmath.mp.dps = 50
    ref = [float(mpmath.log(mpmath.ncdf(hi) - mpmath.ncdf(lo))) for lo, hi in zip(a, b)]
    assert np.allclose(_log_interval_prob(a, b), ref, rtol=1e-10)
    # upper tail where the naive difference underflows
    deep = _log_interval_prob(np.array([30.0]), np.array([np.inf]))
    assert deep[0] == pytest.approx(stats.norm.logsf(30.0), rel=1e-12)


def test_zero_mean_row():
    h = np.zeros((2, 2))
    p = transition_matrix(h, qpsk(1.0), one_bit_spec(), 3)
    assert np.allclose(p, 0.5)


@pytest.mark.parametrize("seed", range(100))
def test_rows_stochastic(seed):
    rng = np.random.default_rng(seed)
    nr, k = int(rng.integers(2, 6)), int(rng.integers(1, 3))
    snr = float(10 ** rng.uniform(-1, 2.5))
    h = random_real_channel(max(nr, k + 1), k, seed)
    q = one_bit_spec() if seed % 2 else two_bit_spec(snr)
    t = transition_tensor(h, qpsk(snr), q)
    p = t.probs
    assert np.all(p >= 0) and np.all(p <= 1)
    assert np.max(np.abs(p.sum(axis=-1) - 1)) < 1e-12


@pytest.mark.parametrize("seed", range(100))
def test_one_bit_crossover_consistency(seed):
    rng = np.random.default_rng(seed)
    snr = float(10 ** rng.uniform(-1, 2))
    h = random_real_channel(5, 2, seed)
    c = qpsk(snr)
    index = int(rng.integers(16))
    eps = one_bit_crossover(h, c, index)
    p = transition_matrix(h, c, one_bit_spec(), index)
    assert np.allclose(eps, 1 - p.max(axis=1), atol=1e-12, rtol=0)
    cb = build_codebook(h, c, one_bit_spec())
    exact = exact_error_probs(transition_tensor(h, c, one_bit_spec()), cb).eps[index]
    assert np.allclose(exact, eps, atol=1e-12, rtol=0)


def test_crossover_monotone_in_mean():
    h = np.array([[0.0, 0.0], [0.1, 0.0], [0.5, 0.0], [1.0, 0.0], [3.0, 0.0]])
    eps = one_bit_crossover(h, qpsk(2.0), 0)
    assert eps[0] == 0.5
    assert np.all(np.diff(eps) < 0)


def test_effective_channel_is_asymmetric():
    h = random_real_channel(4, 2, 0)
    eps = one_bit_crossover(h, qpsk(10.0), 0)
    assert len(np.unique(np.round(eps, 12))) > 1


def test_noise_free_limit():
    h = random_real_channel(4, 2, 3)
    c, q = qpsk(10.0), two_bit_spec(10.0)
    cb = build_codebook(h, c, q)
    eps = exact_error_probs(transition_tensor(h, c, q, noise_var=0.0), cb)
    assert np.all(eps.eps == 0)
    small = exact_error_probs(transition_tensor(h, c, q, noise_var=1e-6), cb)
    assert np.all(small.eps < 1e-6)


def _mc_frequencies(h, c, q, index, n, rng):
    x = np.broadcast_to(codeword_inputs(c, h.shape[1] // 2)[index], (n, h.shape[1]))
    r = observe(h, x, q, rng)
    return np.stack([np.mean(r == j, axis=0) for j in range(q.levels)], axis=-1)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(4))
def test_transition_matches_simulation(seed):
    rng = np.random.default_rng(seed)
    h = random_real_channel(3, 2, seed)
    snr = 3.0
    c = qpsk(snr)
    q = two_bit_spec(snr) if seed % 2 else one_bit_spec()
    index = int(rng.integers(16))
    n = 10**6
    freq = _mc_frequencies(h, c, q, index, n, rng)
    p = transition_matrix(h, c, q, index)
    # half-count continuity correction for near-empty cells
    sigma = np.sqrt(p * (1 - p) / n)
    assert np.all(np.abs(freq - p) <= 3 * sigma + 0.5 / n)
    assert np.max(np.abs(freq - p)) < 4 * math.sqrt(q.levels / n)


@pytest.mark.slow
def test_error_probs_match_simulation_16qam():
    rng = np.random.default_rng(77)
    h = random_real_channel(3, 1, 5)
    snr = 10.0
    c, q = qam16(snr), two_bit_spec(snr)
    cb = build_codebook(h, c, q)
    eps = exact_error_probs(transition_tensor(h, c, q), cb).eps
    index = 5
    n = 10**6
    freq = _mc_frequencies(h, c, q, index, n, rng)
    emp = 1 - freq[np.arange(h.shape[0]), cb.codewords[index]]
    sigma = np.sqrt(eps[index] * (1 - eps[index]) / n)
    assert np.all(np.abs(emp - eps[index]) <= 3 * sigma + 0.5 / n)


def test_error_probs_floor():
    e = ErrorProbs.from_eps(np.array([0.0, 1e-5, 0.2]), floor=1e-3)
    assert e.floored and np.allclose(e.eps, [1e-3, 1e-3, 0.2])
    raw = ErrorProbs.from_eps(np.array([0.0, 0.5]))
    assert not raw.floored and raw.log_eps[0] == -np.inf
    assert np.allclose(raw.with_floor(1e-3).eps, [1e-3, 0.5])


def test_tensor_shape_mismatch():
    h = random_real_channel(3, 2, 0)
    t = transition_tensor(h, qpsk(1.0), one_bit_spec())
    cb = build_codebook(random_real_channel(4, 2, 0), qpsk(1.0), one_bit_spec())
    with pytest.raises(ValueError):
        exact_error_probs(t, cb)
