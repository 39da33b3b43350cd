"""Monte Carlo BER experiments and result emission.

Work is split into independent units, one per (SNR point, channel draw).
Each unit draws its randomness from generators seeded by
``(master_seed, experiment, stream, draw, snr index)``, so results do not
depend on the number of worker threads or on scheduling order.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .codebook import build_codebook, check_codebook_size
from .detectors import (
    emld_batch,
    mdd_batch,
    partition_users,
    sic_decode_batch,
    wmdd_batch,
    zf_batch,
)
from .effective_channel import exact_error_probs, transition_tensor
from .model import (
    db_to_linear,
    indices_to_messages,
    make_constellation,
    make_quantizer,
    observe,
    real_input_vector,
    sample_rayleigh,
    to_real_channel,
)
from .training import (
    DEFAULT_ARTIFICIAL_T,
    ESTIMATORS,
    EPS_FLOOR,
    estimate_channel,
    explicit_train,
    implicit_overhead,
    implicit_train,
)

log = logging.getLogger(__name__)

DETECTORS = ("mdd", "emld", "wmdd", "zf")
TRAINING_MODES = ("perfect", "implicit", "explicit")
DEFAULT_IMPLICIT_T = 4
OVERHEAD_BUDGET = 0.1
_DATA_CHUNK = 20000

CSV_FIELDS = (
    "snr_db", "detector", "k", "nr", "p", "m", "training", "dmin_bin",
    "trials", "bit_errors", "ber", "cw_errors", "cwer", "seed",
)
SER_FIELDS = ("sym_errors", "ser")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    k_users: int = 2
    n_rx: int = 16
    adc_levels: int = 2
    modulation: str = "qpsk"
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
    detectors: tuple = ("mdd", "emld", "wmdd", "zf")
    training: str = "perfect"
    t_repeat: int | None = None
    pilot_slots: int = 32
    symmetry: bool = False
    estimator: str = "genie_noise"
    coherence: int = 1000
    channel_draws: int = 100
    noise_trials: int = 1000
    master_seed: int = 0
    dmin_bins: tuple | None = None
    draw_budget: int = 10000
    sic_k1: int | None = None
    allow_overbudget: bool = False
    eps_floor: float = EPS_FLOOR
    noise_var: float = 0.5
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if self.dmin_bins is not None:
            object.__setattr__(self, "dmin_bins", tuple(int(d) for d in self.dmin_bins))

    @property
    def m(self) -> int:
        return make_constellation(self.modulation, 1.0).modulation_order

    @property
    def repetitions(self) -> int:
        if self.t_repeat is not None:
            return self.t_repeat
        return DEFAULT_ARTIFICIAL_T if self.training == "explicit" else DEFAULT_IMPLICIT_T

    def training_overhead(self) -> int:
        if self.training == "implicit":
            return implicit_overhead(self.repetitions, self.m, self.k_users, self.symmetry)
        if self.training == "explicit":
            return self.pilot_slots
        return 0

    def validate(self) -> "ExperimentConfig":
        if not self.detectors:
            raise ConfigError("no detectors configured")
        unknown = set(self.detectors) - set(DETECTORS)
        if unknown:
            raise ConfigError(f"unknown detectors {sorted(unknown)}; choose from {DETECTORS}")
        if len(set(self.detectors)) != len(self.detectors):
            raise ConfigError("duplicate detectors")
        if self.training not in TRAINING_MODES:
            raise ConfigError(f"training must be one of {TRAINING_MODES}")
        for name in ("k_users", "n_rx", "channel_draws", "noise_trials", "coherence",
                     "draw_budget", "workers", "pilot_slots"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.repetitions < 1:
            raise ConfigError("T must be positive")
        if not self.snr_db or not all(math.isfinite(s) for s in self.snr_db):
            raise ConfigError("SNR grid must be non-empty and finite")
        if self.adc_levels not in (2, 4):
            raise ConfigError("only p=2 and p=4 ADCs are supported")
        try:
            make_constellation(self.modulation, 1.0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if self.n_rx <= self.k_users:
            warnings.warn("n_rx <= k_users is outside the system assumption", stacklevel=2)
        if self.sic_k1 is not None:
            if not 1 <= self.sic_k1 < self.k_users:
                raise ConfigError("sic_k1 must satisfy 1 <= K1 < K")
            if self.training == "implicit":
                raise ConfigError("SIC needs a channel (estimate); not available with implicit training")
            check_size = [self.sic_k1, self.k_users - self.sic_k1]
        else:
            check_size = [self.k_users]
        try:
            for kk in check_size:
                check_codebook_size(self.m, kk)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.training == "implicit" and "zf" in self.detectors:
            raise ConfigError("ZF needs a channel estimate; use perfect or explicit training")
        overhead = self.training_overhead()
        if overhead > OVERHEAD_BUDGET * self.coherence and not self.allow_overbudget:
            raise ConfigError(
                f"training overhead {overhead} exceeds {OVERHEAD_BUDGET:.0%} of T_c={self.coherence}"
                " (pass allow_overbudget to override)"
            )
        if self.dmin_bins is not None and any(d < 0 for d in self.dmin_bins):
            raise ConfigError("d_min bins must be non-negative")
        return self


@dataclass(frozen=True)
class TrialRecord:
    snr_db: float
    detector: str
    draw_id: int
    d_min: int
    bit_errors: int
    bits_sent: int
    cw_errors: int
    sym_errors: int
    trials: int


@dataclass(frozen=True)
class ResultRow:
    snr_db: float
    detector: str
    k: int
    nr: int
    p: int
    m: int
    training: str
    dmin_bin: str
    trials: int
    bit_errors: int
    ber: float
    cw_errors: int
    cwer: float
    seed: int
    sym_errors: int = 0
    ser: float = 0.0

    def as_dict(self, with_ser: bool = False) -> dict:
        d = asdict(self)
        keys = CSV_FIELDS + (SER_FIELDS if with_ser else ())
        return {key: d[key] for key in keys}


@dataclass(frozen=True)
class DminStats:
    histogram: dict
    mean: float
    samples: int


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------

_STREAMS = {"channel": 0, "train": 1, "data": 2, "pilot": 3}


def _tag(name: str) -> int:
    return zlib.crc32(name.encode())


def derive_rng(master_seed: int, experiment: str, stream: str, *ids: int) -> np.random.Generator:
    key = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, _tag(experiment), _STREAMS[stream], *map(int, ids)]
    return np.random.default_rng(np.random.SeedSequence(key))


def draw_channel(cfg: ExperimentConfig, experiment: str, draw_id: int) -> np.ndarray:
    """Complex channel for a draw; identical across SNR points and training modes."""
    rng = derive_rng(cfg.master_seed, experiment, "channel", draw_id)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sample_rayleigh(cfg.n_rx, cfg.k_users, rng)


def true_dmin(cfg: ExperimentConfig, h_complex, snr_db: float = 0.0) -> int:
    snr = db_to_linear(snr_db)
    c = make_constellation(cfg.modulation, snr)
    q = make_quantizer(cfg.adc_levels, snr)
    return build_codebook(to_real_channel(h_complex), c, q).d_min


# ---------------------------------------------------------------------------
# One (SNR, draw) unit
# ---------------------------------------------------------------------------


_BIT_COUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def _popcount(x):
    x = np.asarray(x, dtype=np.int64)
    total = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        total += _BIT_COUNT[x & 0xFF]
        x = x >> 8
    return total


class _Receiver:
    """What the receiver knows after training for one channel draw."""

    def __init__(self, cfg, h, c, q, snr, experiment, snr_idx, draw_id):
        self.cfg, self.c, self.q = cfg, c, q
        nv = cfg.noise_var
        train_rng = derive_rng(cfg.master_seed, experiment, "train", draw_id, snr_idx)
        self.h_known = None
        self.cb = self.eps = self.tensor = None
        needs_code = any(d != "zf" for d in cfg.detectors)
        if cfg.training == "perfect":
            self.h_known = h
            if needs_code and cfg.sic_k1 is None:
                self.cb = build_codebook(h, c, q)
                self.tensor = transition_tensor(h, c, q, nv)
                # exact probabilities only vanish for noise_var == 0
                self.eps = exact_error_probs(self.tensor, self.cb).with_floor(np.finfo(float).tiny)
        elif cfg.training == "implicit":
            out = implicit_train(h, c, q, cfg.repetitions, cfg.symmetry, train_rng,
                                 floor=cfg.eps_floor, noise_var=nv)
            self.cb, self.eps = out.codebook_hat, out.eps_hat
            self.tensor = out.transition_estimate(cfg.eps_floor)
        else:
            pilot_rng = derive_rng(cfg.master_seed, experiment, "pilot", draw_id, snr_idx)
            self.h_known = estimate_channel(cfg.estimator, h, snr, cfg.pilot_slots, pilot_rng, q,
                                            noise_var=nv)
            if needs_code and cfg.sic_k1 is None:
                out = explicit_train(self.h_known, c, q, train_rng, cfg.repetitions,
                                     cfg.pilot_slots, cfg.eps_floor, nv)
                self.cb, self.eps = out.codebook_hat, out.eps_hat
                self.tensor = transition_tensor(self.h_known, c, q, nv)
        self.partition = None
        if cfg.sic_k1 is not None:
            self.partition = partition_users(self.h_known, cfg.sic_k1)

    def decode(self, detector, obs):
        if detector == "zf":
            try:
                return zf_batch(obs, self.h_known, self.q, self.c, self.cfg.noise_var)[0]
            except np.linalg.LinAlgError:
                # rank-deficient estimate: count every trial as an error
                return np.full(obs.shape[0], -1, dtype=np.int64)
        if self.partition is not None:
            return sic_decode_batch(obs, self.h_known, self.c, self.q, self.partition, detector,
                                    self.cfg.noise_var)[0]
        if detector == "mdd":
            return mdd_batch(obs, self.cb)[0]
        if detector == "wmdd":
            return wmdd_batch(obs, self.cb, self.eps)[0]
        return emld_batch(obs, self.tensor)[0]


def _detector_label(cfg, detector):
    if cfg.sic_k1 is not None and detector != "zf":
        return f"sic-{detector}"
    return detector


def evaluate_draw(cfg: ExperimentConfig, experiment: str, snr_idx: int, draw_id: int,
                  h_complex, d_min: int | None = None) -> list:
    """Train, transmit ``noise_trials`` random messages and decode with every detector."""
    snr_db = cfg.snr_db[snr_idx]
    snr = db_to_linear(snr_db)
    c = make_constellation(cfg.modulation, snr)
    q = make_quantizer(cfg.adc_levels, snr)
    h = to_real_channel(h_complex)
    if d_min is None:
        d_min = build_codebook(h, c, q).d_min if cfg.m**cfg.k_users <= 1 << 16 else -1
    rx = _Receiver(cfg, h, c, q, snr, experiment, snr_idx, draw_id)
    data_rng = derive_rng(cfg.master_seed, experiment, "data", draw_id, snr_idx)
    m, k = c.modulation_order, cfg.k_users
    counts = {d: [0, 0, 0] for d in cfg.detectors}  # bit, codeword, symbol errors
    remaining = cfg.noise_trials
    while remaining > 0:
        n = min(remaining, _DATA_CHUNK)
        remaining -= n
        w = data_rng.integers(0, m, size=(n, k))
        obs = observe(h, real_input_vector(c.points[w]), q, data_rng, cfg.noise_var)
        for det in cfg.detectors:
            idx = rx.decode(det, obs)
            bad = idx < 0
            w_hat = indices_to_messages(np.where(bad, 0, idx), m, k)
            wrong_sym = (w_hat != w) | bad[:, None]
            bit_err = _popcount(c.labels[w_hat] ^ c.labels[w])
            bit_err = np.where(bad[:, None], c.bits_per_symbol, bit_err)
            counts[det][0] += int(bit_err.sum())
            counts[det][1] += int(np.count_nonzero(wrong_sym.any(axis=1)))
            counts[det][2] += int(np.count_nonzero(wrong_sym))
    bits = cfg.noise_trials * k * c.bits_per_symbol
    return [
        TrialRecord(snr_db, _detector_label(cfg, det), draw_id, int(d_min), b, bits, cw, se,
                    cfg.noise_trials)
        for det, (b, cw, se) in counts.items()
    ]


def _run_units(cfg, fn, units):
    if cfg.workers <= 1:
        return [fn(*u) for u in units]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(lambda u: fn(*u), units))


def _aggregate(cfg, records, dmin_bin="all") -> list:
    rows = []
    order = []
    acc = {}
    for rec in records:
        key = (rec.snr_db, rec.detector)
        if key not in acc:
            acc[key] = [0, 0, 0, 0, 0]
            order.append(key)
        a = acc[key]
        a[0] += rec.trials
        a[1] += rec.bit_errors
        a[2] += rec.bits_sent
        a[3] += rec.cw_errors
        a[4] += rec.sym_errors
    for key in order:
        trials, bit_errors, bits, cw, sym = acc[key]
        rows.append(_row(cfg, key[0], key[1], dmin_bin, trials, bit_errors, bits, cw, sym))
    return rows


def _row(cfg, snr_db, detector, dmin_bin, trials, bit_errors, bits, cw, sym):
    nan = float("nan")
    return ResultRow(
        snr_db=snr_db, detector=detector, k=cfg.k_users, nr=cfg.n_rx, p=cfg.adc_levels,
        m=cfg.m, training=cfg.training, dmin_bin=str(dmin_bin), trials=trials,
        bit_errors=bit_errors, ber=bit_errors / bits if bits else nan, cw_errors=cw,
        cwer=cw / trials if trials else nan, seed=cfg.master_seed, sym_errors=sym,
        ser=sym / (trials * cfg.k_users) if trials else nan,
    )


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def collect_sweep_records(cfg: ExperimentConfig) -> list:
    cfg.validate()
    channels = [draw_channel(cfg, "sweep", d) for d in range(cfg.channel_draws)]
    units = [
        (cfg, "sweep", s, d, channels[d])
        for s in range(len(cfg.snr_db))
        for d in range(cfg.channel_draws)
    ]
    return [rec for recs in _run_units(cfg, evaluate_draw, units) for rec in recs]


def run_ber_sweep(cfg: ExperimentConfig) -> list:
    """BER and codeword error rate per (SNR, detector), averaged over channel draws."""
    return _aggregate(cfg, collect_sweep_records(cfg))


@dataclass
class ConditionalResult:
    rows: list
    hit_rates: dict
    draws_examined: int
    accepted: dict = field(default_factory=dict)


def select_conditional_draws(cfg: ExperimentConfig):
    """Rejection-sample channel draws into the requested d_min bins.

    Returns ``(accepted, hit_rates, examined)`` where ``accepted[d]`` lists
    ``(draw_id, channel)`` pairs, at most ``channel_draws`` per bin.
    """
    bins = cfg.dmin_bins
    accepted = {d: [] for d in bins}
    hits = {d: 0 for d in bins}
    examined = 0
    for draw_id in range(cfg.draw_budget):
        if all(len(v) >= cfg.channel_draws for v in accepted.values()):
            break
        h = draw_channel(cfg, "conditional", draw_id)
        examined += 1
        d = true_dmin(cfg, h)
        if d in accepted:
            hits[d] += 1
            if len(accepted[d]) < cfg.channel_draws:
                accepted[d].append((draw_id, h))
    rates = {d: hits[d] / examined if examined else 0.0 for d in bins}
    return accepted, rates, examined


def run_conditional_ber(cfg: ExperimentConfig) -> ConditionalResult:
    """Per-d_min-bin BER; unreachable bins yield rows with zero trials."""
    cfg.validate()
    if not cfg.dmin_bins:
        raise ConfigError("conditional BER needs d_min bins")
    accepted, rates, examined = select_conditional_draws(cfg)
    for d, got in accepted.items():
        if len(got) < cfg.channel_draws:
            log.warning("d_min bin %d: only %d of %d draws within budget", d, len(got),
                        cfg.channel_draws)
    units = [
        (cfg, "conditional", s, draw_id, h, d)
        for s in range(len(cfg.snr_db))
        for d in cfg.dmin_bins
        for draw_id, h in accepted[d]
    ]
    results = _run_units(cfg, evaluate_draw, units)
    by_bin = {d: [] for d in cfg.dmin_bins}
    for u, recs in zip(units, results):
        by_bin[u[5]].append(recs)
    rows = []
    for s, snr_db in enumerate(cfg.snr_db):
        for d in cfg.dmin_bins:
            recs = [r for recs in by_bin[d] for r in recs if r.snr_db == snr_db]
            agg = {row.detector: row for row in _aggregate(cfg, recs, d)}
            for det in cfg.detectors:
                label = _detector_label(cfg, det)
                rows.append(agg.get(label) or _row(cfg, snr_db, label, d, 0, 0, 0, 0, 0))
    counts = {d: len(v) for d, v in accepted.items()}
    return ConditionalResult(rows, rates, examined, counts)


def run_dmin_stats(cfg: ExperimentConfig, samples: int) -> DminStats:
    """Monte Carlo histogram and mean of d_min over channel draws."""
    if samples < 1:
        raise ConfigError("need at least one sample")
    check_codebook_size(cfg.m, cfg.k_users)
    snr_db = cfg.snr_db[0] if cfg.snr_db else 0.0
    units = [(d,) for d in range(samples)]

    def one(draw_id):
        return true_dmin(cfg, draw_channel(cfg, "dmin", draw_id), snr_db)

    values = _run_units(cfg, one, units)
    hist = {}
    for v in values:
        hist[v] = hist.get(v, 0) + 1
    return DminStats(dict(sorted(hist.items())), float(np.mean(values)), samples)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_table(fh, dicts, keys, fmt, meta):
    if fmt == "csv":
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(keys)
        for d in dicts:
            writer.writerow([_fmt(d[k]) for k in keys])
    elif fmt == "json":
        doc = {"meta": meta or {}, "fields": list(keys), "rows": dicts}
        json.dump(doc, fh, indent=1, allow_nan=True)
        fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def emit_results(rows, fmt: str, path, with_ser: bool = False, meta: dict | None = None) -> None:
    """Write result rows as CSV or JSON to a path or open text file.

    Floats are written with ``repr`` so they parse back exactly.
    """
    if not rows:
        raise ValueError("refusing to write an empty result table")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    keys = CSV_FIELDS + (SER_FIELDS if with_ser else ())
    dicts = [r.as_dict(with_ser) if isinstance(r, ResultRow) else {k: r[k] for k in keys}
             for r in rows]
    if hasattr(path, "write"):
        _write_table(path, dicts, keys, fmt, meta)
        return
    try:
        with open(path, "w", newline="") as fh:
            _write_table(fh, dicts, keys, fmt, meta)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc


_INT_FIELDS = {"k", "nr", "p", "m", "trials", "bit_errors", "cw_errors", "seed", "sym_errors"}
_FLOAT_FIELDS = {"snr_db", "ber", "cwer", "ser"}


def read_results_csv(path) -> list:
    with open(path, newline="") as fh:
        out = []
        for raw in csv.DictReader(fh):
            row = {}
            for key, val in raw.items():
                if key in _INT_FIELDS:
                    row[key] = int(val)
                elif key in _FLOAT_FIELDS:
                    row[key] = float(val)
                else:
                    row[key] = val
            out.append(row)
    return out


def config_from_dict(values: dict) -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return replace(ExperimentConfig(), **values)
