"""System model: constellations, message indexing, channels and ADC quantizers.

Real-valued conventions used throughout the package:

* a complex symbol vector ``x~`` of length K maps to ``[Re x~, Im x~]``;
* a complex ``Nr x K`` channel maps to the ``N x 2K`` block matrix
  ``[[Re H, -Im H], [Im H, Re H]]`` with ``N = 2 Nr``;
* complex noise is CN(0, 1), i.e. each real component has variance 1/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

NOISE_VAR = 0.5
"""Variance of each real noise component (CN(0, 1) complex noise)."""


# ---------------------------------------------------------------------------
# Constellations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constellation:
    """An m-ary symbol set with average power equal to ``snr``.

    ``points[w]`` is the symbol sent for message ``w``. ``labels[w]`` is the
    Gray bit label of that symbol, used only for bit-error counting. Built-in
    constellations are ordered so that ``points[m - 1 - w] == -points[w]``.
    """

    name: str
    points: np.ndarray
    labels: np.ndarray
    snr: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        pts.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def modulation_order(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.modulation_order)))

    @property
    def negation_closed(self) -> bool:
        pts = self.points
        return bool(np.allclose(pts[::-1], -pts, atol=1e-12 * max(1.0, math.sqrt(self.snr))))

    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


def bpsk(snr: float = 1.0) -> Constellation:
    a = math.sqrt(snr)
    return Constellation("bpsk", np.array([a, -a]), np.array([0, 1]), snr)


def qpsk(snr: float = 1.0) -> Constellation:
    # label bit 0 <-> sign of I, bit 1 <-> sign of Q
    a = math.sqrt(snr / 2.0)
    pts = a * np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j])
    return Constellation("qpsk", pts, np.arange(4), snr)


_GRAY_2BIT = {3: 0b00, 1: 0b01, -1: 0b11, -3: 0b10}


def qam16(snr: float = 1.0) -> Constellation:
    """Gray-labelled square 16-QAM.

    Message indices are not the Gray labels: the first eight messages are
    the points with positive real part and message ``15 - w`` is ``-s_w``.
    """
    half = [(i, q) for i in (3, 1) for q in (3, 1, -1, -3)]
    grid = half + [(-i, -q) for (i, q) in reversed(half)]
    scale = math.sqrt(snr / 10.0)
    pts = np.array([scale * complex(i, q) for i, q in grid])
    labels = np.array([_GRAY_2BIT[i] | (_GRAY_2BIT[q] << 2) for i, q in grid])
    return Constellation("16qam", pts, labels, snr)


CONSTELLATIONS = {"bpsk": bpsk, "qpsk": qpsk, "16qam": qam16}


def make_constellation(name: str, snr: float) -> Constellation:
    try:
        factory = CONSTELLATIONS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; choose from {sorted(CONSTELLATIONS)}")
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    return factory(snr)


def db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


# ---------------------------------------------------------------------------
# Message <-> codeword index
# ---------------------------------------------------------------------------


def messages_to_index(w, m: int) -> int:
    """m-ary expansion with the first user as the least significant digit."""
    w = np.asarray(w, dtype=np.int64)
    if w.ndim != 1:
        raise ValueError("message vector must be one-dimensional")
    if np.any(w < 0) or np.any(w >= m):
        raise ValueError(f"message entries must lie in 0..{m - 1}, got {w.tolist()}")
    return int(np.sum(w * m ** np.arange(len(w), dtype=np.int64)))


def index_to_messages(index: int, m: int, k: int) -> np.ndarray:
    if not 0 <= index < m**k:
        raise ValueError(f"codeword index must lie in 0..{m**k - 1}, got {index}")
    return (int(index) // m ** np.arange(k, dtype=np.int64)) % m


def all_messages(m: int, k: int) -> np.ndarray:
    """``(m**k, k)`` array whose row ``l`` is ``index_to_messages(l)``."""
    idx = np.arange(m**k, dtype=np.int64)[:, None]
    return (idx // m ** np.arange(k, dtype=np.int64)[None, :]) % m


def indices_to_messages(indices, m: int, k: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    return (indices[..., None] // m ** np.arange(k, dtype=np.int64)) % m


def messages_to_indices(w, m: int) -> np.ndarray:
    w = np.asarray(w, dtype=np.int64)
    return np.sum(w * m ** np.arange(w.shape[-1], dtype=np.int64), axis=-1)


def modulate(w, c: Constellation) -> np.ndarray:
    w = np.asarray(w, dtype=np.int64)
    if np.any(w < 0) or np.any(w >= c.modulation_order):
        raise ValueError("message outside the constellation alphabet")
    return c.points[w]


def real_input_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    return np.concatenate([x.real, x.imag], axis=-1)


def codeword_inputs(c: Constellation, k: int) -> np.ndarray:
    """Real input vectors for every codeword index, shape ``(m**k, 2k)``."""
    return real_input_vector(modulate(all_messages(c.modulation_order, k), c))


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


def to_real_channel(h) -> np.ndarray:
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2:
        raise ValueError("channel must be a 2-D matrix")
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def sample_rayleigh(nr: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """IID CN(0, 1) complex channel of shape ``(nr, k)``."""
    if nr < 1 or k < 1:
        raise ValueError("nr and k must be at least 1")
    if nr <= k:
        warnings.warn(f"nr={nr} <= k={k}: outside the nr > k system assumption", stacklevel=2)
    scale = math.sqrt(0.5)
    return scale * (rng.standard_normal((nr, k)) + 1j * rng.standard_normal((nr, k)))


def user_columns(users, k: int) -> np.ndarray:
    """Columns of the real channel that carry the given users."""
    users = np.asarray(users, dtype=np.int64)
    return np.concatenate([users, users + k])


# ---------------------------------------------------------------------------
# Quantizers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantizerSpec:
    """Stair-type quantizer with strictly decreasing interior thresholds.

    Level ``l`` is output for inputs in ``[thresholds[l], thresholds[l-1])``,
    with ``thresholds[-1] = +inf`` and ``thresholds[p-1] = -inf`` implied.
    """

    thresholds: tuple
    _ascending: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        if any(not math.isfinite(t) for t in th):
            raise ValueError("thresholds must be finite")
        if any(a <= b for a, b in zip(th, th[1:])):
            raise ValueError(f"thresholds must be strictly decreasing, got {th}")
        object.__setattr__(self, "thresholds", th)
        asc = np.array(th[::-1], dtype=np.float64)
        asc.setflags(write=False)
        object.__setattr__(self, "_ascending", asc)

    @property
    def levels(self) -> int:
        return len(self.thresholds) + 1

    @property
    def symmetric(self) -> bool:
        th = np.array(self.thresholds)
        return bool(np.allclose(np.sort(th), np.sort(-th), rtol=0.0, atol=1e-12))

    def edges(self) -> np.ndarray:
        """``[+inf, t_0, ..., t_{p-2}, -inf]``; level ``j`` is ``[edges[j+1], edges[j])``."""
        return np.array([np.inf, *self.thresholds, -np.inf])


def one_bit_spec() -> QuantizerSpec:
    return QuantizerSpec((0.0,))


def two_bit_spec(snr: float) -> QuantizerSpec:
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    a = math.sqrt(snr)
    return QuantizerSpec((a, 0.0, -a))


def make_quantizer(levels: int, snr: float) -> QuantizerSpec:
    if levels == 2:
        return one_bit_spec()
    if levels == 4:
        return two_bit_spec(snr)
    raise ValueError(f"only 2- and 4-level ADCs are built in, got p={levels}")


def quantize(u, q: QuantizerSpec):
    """Quantizer output level(s); a scalar in gives an int out."""
    arr = np.asarray(u, dtype=np.float64)
    if np.isnan(arr).any():
        raise ValueError("cannot quantize NaN")
    # level = number of thresholds strictly above u
    lv = len(q._ascending) - np.searchsorted(q._ascending, arr, side="right")
    if arr.ndim == 0:
        return int(lv)
    return lv.astype(np.uint8)


def observe(h, x, q: QuantizerSpec, rng: np.random.Generator, noise_var: float = NOISE_VAR):
    """Quantized noisy observation ``phi(H x + z)``.

    ``x`` may be a single real input vector ``(2K,)`` or a batch ``(T, 2K)``.
    """
    h = np.asarray(h, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    mean = x @ h.T
    if noise_var > 0:
        mean = mean + math.sqrt(noise_var) * rng.standard_normal(mean.shape)
    return quantize(mean, q)
