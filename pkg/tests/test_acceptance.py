"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py``; the summary section lists the
eleven criteria in order.
"""

import io
import itertools
import math
import time
import warnings

import numpy as np
import pytest
from scipy import stats

from lowres_mimo import harness
from lowres_mimo.codebook import WeightSet, build_codebook
from lowres_mimo.detectors import (
    emld_batch,
    mdd,
    mdd_batch,
    partition_users,
    sic_decode,
    sic_hypothesis_count,
    unified_weighted_decode,
    weighted_batch,
    wmdd,
    wmdd_batch,
    zf_batch,
)
from lowres_mimo.effective_channel import ErrorProbs, exact_error_probs, transition_tensor
from lowres_mimo.harness import ExperimentConfig
from lowres_mimo.model import (
    codeword_inputs,
    db_to_linear,
    observe,
    one_bit_spec,
    qpsk,
    sample_rayleigh,
    to_real_channel,
    two_bit_spec,
)

from conftest import record

def _csv(rows):
    buf = io.StringIO()
    harness.emit_results(rows, "csv", buf)
    return buf.getvalue()


def _sig2(value, printed):
    """Agreement to two significant figures of the printed value."""
    half_unit = 0.5 * 10 ** (math.floor(math.log10(abs(printed))) - 1)
    return abs(value - printed) <= half_unit


def test_c01_identity_channel_code():
    t0 = time.perf_counter()
    cb = build_codebook(np.eye(4), qpsk(1.0), one_bit_spec())
    words = {tuple(r) for r in cb.codewords.tolist()}
    dt = time.perf_counter() - t0
    ok = words == set(itertools.product((0, 1), repeat=4)) and cb.size == 16 and cb.d_min == 1 and dt < 1
    record("C1", ok, f"H=I4 QPSK one-bit: {len(words)} distinct codewords, d_min={cb.d_min}, {dt:.3f}s")
    assert ok


def test_c02_two_subchannel_weights():
    t0 = time.perf_counter()
    w = WeightSet.from_log_eps(np.log([[0.1, 0.01]]), emld=True)
    alpha, beta = w.alpha[0], w.beta[0]
    dt = time.perf_counter() - t0
    ok = (all(_sig2(a, p) for a, p in zip(alpha, (0.152, 0.0145)))
          and all(_sig2(b, p) for b, p in zip(beta, (3.32, 6.64))) and dt < 1)
    record("C2", ok, f"alpha={np.round(alpha, 4).tolist()} beta={np.round(beta, 3).tolist()} (base 2)")
    assert ok


def test_c03_decision_regions():
    t0 = time.perf_counter()
    from lowres_mimo.codebook import Codebook

    eps = np.array([1e-4, 1e-1, 1e-1])
    cb = Codebook(np.array([[0, 0, 0], [1, 1, 1]], dtype=np.uint8), 2, 2, 1)
    ep = ErrorProbs.from_eps(np.tile(eps, (2, 1)))
    patterns = [np.array(e, dtype=np.uint8) for e in itertools.product((0, 1), repeat=3)]
    r_md = {"".join(map(str, e)) for e in patterns if mdd(e, cb).index == 1}
    r_wmd = {"".join(map(str, e)) for e in patterns if wmdd(e, cb, ep).index == 1}

    def prob(region):
        return sum(float(np.prod(np.where(np.array(list(map(int, s))) == 1, eps, 1 - eps))) for s in region)

    p_md, p_wmd = prob(r_md), prob(r_wmd)
    dt = time.perf_counter() - t0
    ok = (r_md == {"110", "101", "011", "111"} and r_wmd == {"100", "110", "101", "111"}
          and 1e-2 / 1.3 <= p_md <= 1.3e-2 and 1e-4 / 1.3 <= p_wmd <= 1.3e-4 and dt < 1)
    record("C3", ok, f"R_MD={sorted(r_md)} R_wMD={sorted(r_wmd)} P_MD={p_md:.4g} P_wMD={p_wmd:.4g}")
    assert ok


def test_c04_weighted_not_worse_than_plain():
    rng = np.random.default_rng(2024)
    snr = db_to_linear(10.0)
    c, q = qpsk(snr), one_bit_spec()
    x_all = codeword_inputs(c, 2)
    err_m = err_w = only_w = only_m = 0
    trials = 10**4
    for draw in range(200):
        h = to_real_channel(sample_rayleigh(9, 2, rng))
        cb = build_codebook(h, c, q)
        eps = exact_error_probs(transition_tensor(h, c, q), cb).with_floor(np.finfo(float).tiny)
        index = rng.integers(0, 16, size=trials)
        obs = observe(h, x_all[index], q, rng)
        bad_m = mdd_batch(obs, cb)[0] != index
        bad_w = wmdd_batch(obs, cb, eps)[0] != index
        err_m += int(bad_m.sum())
        err_w += int(bad_w.sum())
        only_w += int(np.sum(bad_w & ~bad_m))
        only_m += int(np.sum(bad_m & ~bad_w))
    # paired sign test on discordant trials: H0 "wMDD errs at least as often"
    pvalue = stats.binomtest(only_w, only_w + only_m, 0.5, alternative="less").pvalue
    ok = err_w <= err_m and pvalue < 0.01
    record("C4", ok, f"codeword errors wMDD={err_w} MDD={err_m} of {200 * trials}; "
                     f"discordant {only_w}/{only_m}, one-sided p={pvalue:.2e}")
    assert ok


def test_c05_dmin_means():
    one = harness.run_dmin_stats(ExperimentConfig(k_users=2, n_rx=6, adc_levels=2), 10**4)
    two = harness.run_dmin_stats(ExperimentConfig(k_users=2, n_rx=6, adc_levels=4), 10**4)
    ok1 = abs(one.mean - 1.8) <= 0.2
    ok2 = abs(two.mean - 4.5) <= 0.3
    record("C5", ok1 and ok2, f"one-bit mean d_min={one.mean:.3f} (1.8+-0.2: {'ok' if ok1 else 'no'}), "
                              f"two-bit mean d_min={two.mean:.3f} (4.5+-0.3: {'ok' if ok2 else 'no'})")
    assert ok1 and ok2


def _z(a_err, b_err, n):
    """z statistic of ``rate_a - rate_b`` for independent binomial counts over ``n`` bits each."""
    pa, pb = a_err / n, b_err / n
    se = math.sqrt(pa * (1 - pa) / n + pb * (1 - pb) / n)
    return (pa - pb) / se if se > 0 else (0.0 if pa == pb else math.copysign(math.inf, pa - pb))


def test_c06_conditional_ber_trend():
    cfg = ExperimentConfig(k_users=2, n_rx=9, snr_db=(15.0,), detectors=("mdd", "emld"), dmin_bins=(1, 2, 3),
                           channel_draws=100, noise_trials=1000, draw_budget=10**5, master_seed=6)
    res = harness.run_conditional_ber(cfg)
    by = {(r.detector, int(r.dmin_bin)): r for r in res.rows}
    z95 = stats.norm.ppf(0.95)
    ok = all(by[("emld", d)].trials == 10**5 for d in (1, 2, 3))
    parts = []
    for d in (1, 2):
        a, b = by[("emld", d)], by[("emld", d + 1)]
        z = _z(a.bit_errors, b.bit_errors, a.trials * 4)
        ok &= z > z95
        parts.append(f"eMLD {d}->{d + 1}: {a.ber:.3g}->{b.ber:.3g} z={z:.1f}")
    for d in (1, 2, 3):
        e, m = by[("emld", d)], by[("mdd", d)]
        z = _z(e.bit_errors, m.bit_errors, e.trials * 4)
        ok &= z <= z95
        parts.append(f"d={d} eMLD {e.ber:.3g} <= MDD {m.ber:.3g}")
    record("C6", ok, "; ".join(parts) + f"; hit rates {', '.join(f'{k}:{v:.3f}' for k, v in res.hit_rates.items())}")
    assert ok


def test_c07_training_orderings():
    grid = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
    common = dict(k_users=2, n_rx=16, adc_levels=2, snr_db=grid, channel_draws=100, noise_trials=1000,
                  master_seed=7)
    perfect = harness.run_ber_sweep(ExperimentConfig(detectors=("wmdd", "emld"), **common))
    implicit = harness.run_ber_sweep(ExperimentConfig(detectors=("wmdd",), training="implicit", t_repeat=4,
                                                      symmetry=True, **common))
    # the ZF baseline estimates its channel from one-bit quantized pilots
    explicit = harness.run_ber_sweep(ExperimentConfig(detectors=("zf",), training="explicit", pilot_slots=32,
                                                      estimator="scaled_ls", **common))
    assert ExperimentConfig(training="implicit", t_repeat=4, symmetry=True, **common).training_overhead() == 32
    ber = {}
    for tag, rows in (("perfect", perfect), ("implicit", implicit), ("explicit", explicit)):
        for r in rows:
            ber[(tag, r.detector, r.snr_db)] = r.ber
    ok = True
    parts = []
    for s in grid:
        w, e = ber[("perfect", "wmdd", s)], ber[("perfect", "emld", s)]
        close = w <= 1.3 * e and e <= 1.3 * w
        ok &= close
        line = f"{s:g}dB wMDD/eMLD={w:.3g}/{e:.3g}{'' if close else ' (x)'}"
        if s >= 5:
            wi, zf = ber[("implicit", "wmdd", s)], ber[("explicit", "zf", s)]
            ok &= wi <= zf
            line += f" wMDD-imp={wi:.3g} vs ZF-exp={zf:.3g}{'' if wi <= zf else ' (x)'}"
        parts.append(line)
    record("C7", ok, "; ".join(parts))
    assert ok


def _brute_weighted(r, cw, alpha, beta):
    best, best_s = 0, None
    for index in range(len(cw)):
        s = 0.0
        for i in range(len(r)):
            s += alpha[index][i] if r[i] == cw[index][i] else beta[index][i]
        if best_s is None or s < best_s:
            best, best_s = index, s
    return best


def _brute_emld(r, lp):
    best, best_s = 0, -math.inf
    for index in range(len(lp)):
        s = 0.0
        for i in range(len(r)):
            s += lp[index][i][r[i]]
        if s > best_s:
            best, best_s = index, s
    return best


def _brute_zf(r, h, c):
    pinv = np.linalg.pinv(h)
    sigma = math.sqrt(0.5)
    x = pinv @ np.array([sigma if v == 0 else -sigma for v in r])
    k = h.shape[1] // 2
    index = 0
    for u in range(k):
        sym = complex(x[u], x[u + k])
        dists = [abs(sym - p) for p in c.points]
        index += dists.index(min(dists)) * 4**u
    return index


def test_c08_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    snr = db_to_linear(5.0)
    c, q = qpsk(snr), one_bit_spec()
    h = to_real_channel(sample_rayleigh(5, 2, rng))
    cb = build_codebook(h, c, q)
    tensor = transition_tensor(h, c, q)
    eps = exact_error_probs(tensor, cb).with_floor(np.finfo(float).tiny)
    w_wmdd = WeightSet.from_log_eps(eps.log_eps)
    w_emld = WeightSet.from_log_eps(eps.log_eps, emld=True)
    obs = np.array(list(itertools.product((0, 1), repeat=10)), dtype=np.uint8)
    got = {
        "mdd": mdd_batch(obs, cb)[0],
        "wmdd": wmdd_batch(obs, cb, eps)[0],
        "emld": emld_batch(obs, tensor)[0],
        "unified-emld": weighted_batch(obs, cb, w_emld)[0],
        "zf": zf_batch(obs, h, q, c)[0],
    }
    cw = cb.codewords.tolist()
    zeros, ones = np.zeros((16, 10)).tolist(), np.ones((16, 10)).tolist()
    lp = tensor.log_probs.tolist()
    wa, wb = w_wmdd.alpha.tolist(), w_wmdd.beta.tolist()
    ea, eb = w_emld.alpha.tolist(), w_emld.beta.tolist()
    mismatches = {k: 0 for k in got}
    for t, r in enumerate(obs.tolist()):
        mismatches["mdd"] += got["mdd"][t] != _brute_weighted(r, cw, zeros, ones)
        mismatches["wmdd"] += got["wmdd"][t] != _brute_weighted(r, cw, wa, wb)
        mismatches["emld"] += got["emld"][t] != _brute_emld(r, lp)
        mismatches["unified-emld"] += got["unified-emld"][t] != _brute_weighted(r, cw, ea, eb)
        mismatches["zf"] += got["zf"][t] != _brute_zf(r, h, c)
    dt = time.perf_counter() - t0
    ok = not any(mismatches.values()) and dt < 60
    record("C8", ok, f"K=2 Nr=5, all {len(obs)} inputs; mismatches { {k: int(v) for k, v in mismatches.items()} }; {dt:.1f}s")
    assert ok


def test_c09_transition_tensor_validity():
    rng = np.random.default_rng(9)
    worst_sum = 0.0
    cells = outside = 0
    worst_z = 0.0
    n = 10**6
    for inst in range(20):
        p_levels = 2 if inst % 2 == 0 else 4
        nr = int(rng.integers(2, 4))
        snr = db_to_linear(float(rng.uniform(0, 15)))
        c = qpsk(snr)
        q = one_bit_spec() if p_levels == 2 else two_bit_spec(snr)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            h = to_real_channel(sample_rayleigh(nr, 2, rng))
        tensor = transition_tensor(h, c, q)
        worst_sum = max(worst_sum, float(np.max(np.abs(tensor.probs.sum(axis=-1) - 1))))
        index = int(rng.integers(16))
        x = np.broadcast_to(codeword_inputs(c, 2)[index], (n, 4))
        r = observe(h, x, q, rng)
        freq = np.stack([np.mean(r == j, axis=0) for j in range(p_levels)], axis=-1)
        p = tensor.matrix(index)
        sigma = np.sqrt(p * (1 - p) / n)
        dev = np.abs(freq - p)
        bound = 3 * sigma + 0.5 / n
        cells += dev.size
        outside += int(np.sum(dev > bound))
        nz = sigma > 0
        worst_z = max(worst_z, float(np.max(np.abs(dev[nz]) / sigma[nz])))
    ok = worst_sum <= 1e-12 and outside == 0
    record("C9", ok, f"max |row sum - 1| = {worst_sum:.1e}; {outside}/{cells} cells outside 3 sigma "
                     f"(max z {worst_z:.2f}) over 20 instances at 1e6 observations")
    assert ok


def test_c10_sic_accounting():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    h = to_real_channel(sample_rayleigh(16, 12, rng))
    c, q = qpsk(10.0), one_bit_spec()
    part = partition_users(h, 6)
    r = rng.integers(0, 2, size=32).astype(np.uint8)
    res = sic_decode(r, h, c, q, part, "mdd")
    dt = time.perf_counter() - t0
    ok = res.evaluations == sic_hypothesis_count(4, 6, 6) == 8192 and dt < 1
    record("C10", ok, f"m=4 K=12 K1=K2=6: {res.evaluations} evaluations (vs {4**12} exhaustive), {dt:.2f}s")
    assert ok


def test_c11_reproducibility():
    t0 = time.perf_counter()
    base = dict(k_users=2, n_rx=8, snr_db=(0.0, 10.0, 20.0), channel_draws=12, noise_trials=500, master_seed=11)
    texts = []
    for cfg in (ExperimentConfig(**base, workers=1), ExperimentConfig(**base, workers=4),
                ExperimentConfig(**base, workers=1, training="implicit", symmetry=True,
                                 detectors=("mdd", "wmdd", "emld")),
                ExperimentConfig(**base, workers=3, training="implicit", symmetry=True,
                                 detectors=("mdd", "wmdd", "emld"))):
        texts.append(_csv(harness.run_ber_sweep(cfg)))
    dt = time.perf_counter() - t0
    ok = texts[0] == texts[1] and texts[2] == texts[3] and dt < 60
    record("C11", ok, f"1-thread vs N-thread CSV byte-identical: perfect={texts[0] == texts[1]}, "
                      f"implicit={texts[2] == texts[3]}; {dt:.1f}s")
    assert ok
