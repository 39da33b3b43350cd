"""Channel-dependent codes and (weighted) Hamming distances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .model import Constellation, QuantizerSpec, codeword_inputs, quantize

MAX_CODEWORDS = 1 << 24


@dataclass(frozen=True, eq=False)
class Codebook:
    """The ``m**k`` noiseless quantized observations, one row per codeword index."""

    codewords: np.ndarray
    p: int
    m: int
    k: int

    def __post_init__(self):
        cw = np.ascontiguousarray(self.codewords, dtype=np.uint8)
        if cw.ndim != 2 or cw.shape[0] != self.m**self.k:
            raise ValueError(f"expected {self.m**self.k} codewords, got shape {cw.shape}")
        if cw.size and int(cw.max()) >= self.p:
            raise ValueError(f"codeword symbols must be < p={self.p}")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    @property
    def n(self) -> int:
        return self.codewords.shape[1]

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    @cached_property
    def d_min(self) -> int:
        return kernels.min_pairwise_distance(self.codewords)

    @property
    def ambiguous(self) -> bool:
        """True when two messages share a codeword (``d_min == 0``)."""
        return self.d_min == 0

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return (self.p, self.m, self.k) == (other.p, other.m, other.k) and np.array_equal(
            self.codewords, other.codewords
        )

    __hash__ = None


def check_codebook_size(m: int, k: int) -> None:
    if m**k > MAX_CODEWORDS:
        raise ValueError(
            f"m**K = {m}**{k} exceeds the {MAX_CODEWORDS} codeword limit; enable SIC partitioning"
        )


def build_codebook(h, c: Constellation, q: QuantizerSpec, offset=None) -> Codebook:
    """Quantize ``H x(g(l))`` for every codeword index ``l``.

    ``offset`` (length N) is added to every noiseless received vector; SIC
    uses it to fold already-decided users into the code.
    """
    h = np.asarray(h, dtype=np.float64)
    k, rem = divmod(h.shape[1], 2)
    if rem:
        raise ValueError("real channel must have an even number of columns")
    m = c.modulation_order
    check_codebook_size(m, k)
    mean = codeword_inputs(c, k) @ h.T
    if offset is not None:
        mean = mean + np.asarray(offset, dtype=np.float64)
    return Codebook(quantize(mean, q), q.levels, m, k)


def min_distance(cb: Codebook) -> int:
    return cb.d_min


def hamming_distance(x, y) -> int:
    x, y = np.asarray(x), np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return int(np.count_nonzero(x != y))


def weighted_hamming_distance(x, y, alpha, beta) -> float:
    x, y = np.asarray(x), np.asarray(y)
    alpha, beta = np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float)
    if not (x.shape == y.shape == alpha.shape == beta.shape):
        raise ValueError("x, y, alpha and beta must have equal lengths")
    same = x == y
    return float(np.sum(alpha[same]) + np.sum(beta[~same]))


def error_correction_capability(d_min: int) -> int:
    if d_min < 0:
        raise ValueError("d_min must be non-negative")
    return max(0, (d_min - 1) // 2)


# ---------------------------------------------------------------------------
# Weight sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightSet:
    """Per-hypothesis, per-subchannel match (``alpha``) and mismatch (``beta``) weights."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.alpha, dtype=np.float64)
        b = np.ascontiguousarray(self.beta, dtype=np.float64)
        if a.shape != b.shape or a.ndim != 2:
            raise ValueError("alpha and beta must be matching (M, N) arrays")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("weights must be finite")
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def shape(self):
        return self.alpha.shape

    @classmethod
    def hamming(cls, m_k: int, n: int) -> "WeightSet":
        return cls(np.zeros((m_k, n)), np.ones((m_k, n)))

    @classmethod
    def from_log_eps(cls, log_eps, emld: bool = False) -> "WeightSet":
        """Base-2 weights from natural-log error probabilities.

        ``beta = log2(1/eps)``; ``alpha`` is zero (wMDD) or ``log2(1/(1-eps))``
        (the one-bit eMLD weights).
        """
        log_eps = np.asarray(log_eps, dtype=np.float64)
        beta = -log_eps / math.log(2.0)
        if emld:
            alpha = -np.log1p(-np.exp(log_eps)) / math.log(2.0)
        else:
            alpha = np.zeros_like(beta)
        return cls(alpha, beta)

    def scaled(self, factor: float) -> "WeightSet":
        return WeightSet(self.alpha * factor, self.beta * factor)


# ---------------------------------------------------------------------------
# Text dump
# ---------------------------------------------------------------------------


def dump_codebook(cb: Codebook, fh) -> None:
    """One codeword per line as a digit string, preceded by a header line."""
    if cb.p > 10:
        raise ValueError("digit-string dump supports p <= 10")
    fh.write(f"# p={cb.p} m={cb.m} k={cb.k} n={cb.n} d_min={cb.d_min}\n")
    for row in cb.codewords:
        fh.write("".join(str(int(v)) for v in row) + "\n")


def load_codebook(fh) -> Codebook:
    header = None
    rows = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            header = dict(tok.split("=") for tok in line[1:].split())
            continue
        rows.append([int(ch) for ch in line])
    if header is None:
        raise ValueError("codebook dump is missing its header line")
    return Codebook(np.array(rows, dtype=np.uint8), int(header["p"]), int(header["m"]), int(header["k"]))


def parse_digits(text: str) -> np.ndarray:
    text = text.strip()
    if not text.isdigit():
        raise ValueError(f"observation must be a digit string, got {text!r}")
    return np.array([int(ch) for ch in text], dtype=np.uint8)
