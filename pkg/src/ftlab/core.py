"""Bit strings, mutation-strength distributions and harmonic numbers."""

import math
from bisect import bisect_right
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

__all__ = [
    "BitString",
    "MutationModel",
    "InitModel",
    "HeavyTailConstants",
    "ParameterError",
    "heavy_tail_constants",
    "flip_count_pmf",
    "flip_count_cdf",
    "sample_flip_count",
    "mutate",
    "one_bit_q",
    "two_bit_q",
    "harmonic",
    "harmonic_diff",
    "harmonic_numbers",
    "harmonic_real",
]

MODEL_KINDS = ("rls", "sbm", "shift", "resample", "fast")


class ParameterError(ValueError):
    """Raised for invalid mutation or problem parameters."""


class BitString:
    """Immutable fixed-length binary string.

    Wraps a read-only ``uint8`` array; ``str(x)`` gives the usual ``"0110"`` form
    with bit 1 first.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits):
        if isinstance(bits, str):
            bits = [int(c) for c in bits]
        arr = np.array(bits, dtype=np.int64).ravel()
        if arr.size == 0:
            raise ParameterError("bit string length must be positive")
        if np.any((arr != 0) & (arr != 1)):
            raise ParameterError("bit string entries must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        self._bits = arr

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def ones(cls, n):
        return cls(np.ones(n, dtype=np.uint8))

    @classmethod
    def random(cls, n, rng):
        return cls([rng.bit() for _ in range(n)])

    @property
    def bits(self):
        return self._bits

    def __len__(self):
        return int(self._bits.size)

    def __getitem__(self, i):
        return int(self._bits[i])

    def __iter__(self):
        return (int(b) for b in self._bits)

    def __eq__(self, other):
        if not isinstance(other, BitString):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self):
        return hash(self._bits.tobytes())

    def __str__(self):
        return "".join("1" if b else "0" for b in self._bits)

    def __repr__(self):
        return f"BitString('{self}')"

    def hamming(self, other):
        return int(np.count_nonzero(self._bits != other.bits))


@dataclass(frozen=True)
class MutationModel:
    """Distribution of the number of bits flipped per mutation.

    ``p=None`` means the standard rate ``1/n`` for whatever ``n`` the model is
    used with.  ``flips`` is the fixed flip count of RLS (2 gives the 2-opt
    operator); ``shift_to`` is the flip count that replaces a zero draw under
    the shift strategy.
    """

    kind: str
    p: float = None
    beta: float = None
    flips: int = 1
    shift_to: int = 1

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ParameterError(f"unknown mutation model {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind in ("sbm", "shift", "resample") and self.p is not None:
            if not 0.0 < self.p < 1.0:
                raise ParameterError(f"mutation rate p must lie in (0, 1), got {self.p}")
        if self.kind == "fast":
            if self.beta is None or not self.beta > 1.0:
                raise ParameterError(f"heavy-tail exponent beta must exceed 1, got {self.beta}")
        if self.kind == "rls" and self.flips < 1:
            raise ParameterError("RLS must flip at least one bit")
        if self.kind == "shift" and self.shift_to < 1:
            raise ParameterError("shift target must be at least 1")

    @classmethod
    def rls(cls, flips=1):
        return cls("rls", flips=flips)

    @classmethod
    def sbm(cls, p=None):
        return cls("sbm", p=p)

    @classmethod
    def shift(cls, p=None, shift_to=1):
        return cls("shift", p=p, shift_to=shift_to)

    @classmethod
    def resample(cls, p=None):
        return cls("resample", p=p)

    @classmethod
    def fast(cls, beta=1.5):
        return cls("fast", beta=beta)

    def rate(self, n):
        """Per-bit mutation rate for length ``n``."""
        if self.kind in ("rls", "fast"):
            raise ParameterError(f"model {self.kind!r} has no per-bit rate")
        return 1.0 / n if self.p is None else self.p

    def check(self, n):
        if n < 1:
            raise ParameterError(f"length must be positive, got {n}")
        if self.kind == "rls" and self.flips > n:
            raise ParameterError(f"RLS cannot flip {self.flips} of {n} bits")
        if self.kind == "fast" and n < 2:
            raise ParameterError("fast mutation needs n >= 2")
        if self.kind == "shift" and self.shift_to > n:
            raise ParameterError(f"shift target {self.shift_to} exceeds length {n}")
        if self.kind in ("sbm", "shift", "resample") and not 0.0 < self.rate(n) < 1.0:
            raise ParameterError(f"mutation rate must lie in (0, 1) for n={n}")

    def label(self):
        if self.kind == "rls":
            return "rls" if self.flips == 1 else f"rls{self.flips}"
        if self.kind == "fast":
            return f"fast(beta={self.beta:g})"
        p = "1/n" if self.p is None else f"{self.p:g}"
        extra = f",to={self.shift_to}" if self.kind == "shift" and self.shift_to != 1 else ""
        return f"{self.kind}(p={p}{extra})"


@dataclass(frozen=True)
class InitModel:
    """Initial search point distribution: ``uniform``, ``worst`` or ``given``.

    ``worst`` is the all-zero string (for MST: the empty edge set); ``given``
    starts every individual at the stored bit pattern.
    """

    kind: str = "uniform"
    bits: tuple = None

    def __post_init__(self):
        if self.kind not in ("uniform", "worst", "given"):
            raise ParameterError(f"unknown initialization {self.kind!r}")
        if self.kind == "given" and self.bits is None:
            raise ParameterError("given initialization needs a bit pattern")

    @classmethod
    def uniform(cls):
        return cls("uniform")

    @classmethod
    def worst(cls):
        return cls("worst")

    @classmethod
    def given(cls, bits):
        return cls("given", tuple(int(b) for b in bits))


@dataclass(frozen=True)
class HeavyTailConstants:
    normalization: float
    gamma_factor: float


def heavy_tail_constants(n, beta):
    """Normalisation ``sum_{i<=n/2} i^-beta`` and ``sum_{i<=n/2} i^(1-beta) (1-i/n)^(n-1)``."""
    if n < 2:
        raise ParameterError("heavy-tailed constants need n >= 2")
    i = np.arange(1, n // 2 + 1, dtype=float)
    c = math.fsum(i ** -beta)
    g = math.fsum(i ** (1.0 - beta) * np.exp((n - 1) * np.log1p(-i / n)))
    return HeavyTailConstants(c, g)


def _binom_pmf(n, p):
    ell = np.arange(n + 1)
    logc = gammaln(n + 1) - gammaln(ell + 1) - gammaln(n - ell + 1)
    return np.exp(logc + ell * math.log(p) + (n - ell) * math.log1p(-p))


@lru_cache(maxsize=256)
def _fast_pmf(n, beta):
    a = np.arange(1, n // 2 + 1)
    weights = a.astype(float) ** -beta
    weights /= weights.sum()
    ell = np.arange(n + 1)
    logc = gammaln(n + 1) - gammaln(ell + 1) - gammaln(n - ell + 1)
    pmf = np.zeros(n + 1)
    for w, ai in zip(weights, a):
        p = ai / n
        pmf += w * np.exp(logc + ell * math.log(p) + (n - ell) * math.log1p(-p))
    pmf.setflags(write=False)
    return pmf


@lru_cache(maxsize=1024)
def _pmf_cached(model, n):
    kind = model.kind
    if kind == "rls":
        pmf = np.zeros(n + 1)
        pmf[model.flips] = 1.0
    elif kind == "fast":
        pmf = np.array(_fast_pmf(n, float(model.beta)))
    else:
        p = model.rate(n)
        pmf = _binom_pmf(n, p)
        zero = math.exp(n * math.log1p(-p))
        if kind == "shift":
            pmf[model.shift_to] += pmf[0]
            pmf[0] = 0.0
        elif kind == "resample":
            pmf[0] = 0.0
            pmf /= -math.expm1(n * math.log1p(-p))
        else:
            pmf[0] = zero
    pmf.setflags(write=False)
    return pmf


def flip_count_pmf(model, n):
    """``Pr[ell = i]`` for ``i`` in ``0..n`` (read-only array)."""
    model.check(n)
    return _pmf_cached(model, n)


@lru_cache(maxsize=1024)
def _cdf_cached(model, n):
    cdf = np.cumsum(_pmf_cached(model, n))
    cdf[-1] = 1.0
    cdf = np.minimum(cdf, 1.0)
    cdf.setflags(write=False)
    return cdf


def flip_count_cdf(model, n):
    """Cumulative flip-count distribution used for inverse-transform sampling.

    The last entry is pinned to exactly 1 so a uniform draw in [0, 1) always
    lands on a valid count.
    """
    model.check(n)
    return _cdf_cached(model, n)


def sample_flip_count(model, n, rng):
    """Draw ``ell``: the smallest ``i`` with ``u < cdf[i]`` for ``u = rng.random()``."""
    cdf = flip_count_cdf(model, n)
    return bisect_right(cdf, rng.random())


def flip_positions(perm, ell, rng):
    """Partial Fisher-Yates: the first ``ell`` entries of ``perm`` become a uniform sample.

    ``perm`` is a mutable permutation of ``range(n)``; it is reused across calls,
    exactly like the compiled kernel does.
    """
    n = len(perm)
    for t in range(ell):
        r = t + rng.bounded(n - t)
        perm[t], perm[r] = perm[r], perm[t]
    return perm[:ell]


def mutate(x, model, rng, perm=None):
    """Flip ``ell ~ model`` pairwise different, uniformly chosen bits of ``x``."""
    n = len(x)
    ell = sample_flip_count(model, n, rng)
    if perm is None:
        perm = list(range(n))
    bits = np.array(x.bits)
    for pos in flip_positions(perm, ell, rng):
        bits[pos] ^= 1
    return BitString(bits)


def one_bit_q(model, n):
    """Probability that a mutation flips one given bit and no other bit."""
    model.check(n)
    if model.kind == "rls":
        return 1.0 / n if model.flips == 1 else 0.0
    if model.kind == "fast":
        ht = heavy_tail_constants(n, model.beta)
        return ht.gamma_factor / (n * ht.normalization)
    p = model.rate(n)
    base = p * math.exp((n - 1) * math.log1p(-p))
    if model.kind == "sbm":
        return base
    if model.kind == "shift":
        if model.shift_to != 1:
            return base
        return base + math.exp(n * math.log1p(-p)) / n
    return base / -math.expm1(n * math.log1p(-p))


def two_bit_q(model, m):
    """Probability that a mutation flips exactly one given pair of bits."""
    if m < 2:
        raise ParameterError("two-bit probability needs m >= 2")
    model.check(m)
    pairs = m * (m - 1) / 2.0
    if model.kind == "rls":
        return 1.0 / pairs if model.flips == 2 else 0.0
    if model.kind == "fast":
        a = np.arange(1, m // 2 + 1, dtype=float)
        w = a ** -model.beta
        terms = w * (a / m) ** 2 * np.exp((m - 2) * np.log1p(-a / m))
        return math.fsum(terms) / math.fsum(w)
    p = model.rate(m)
    base = p * p * math.exp((m - 2) * math.log1p(-p))
    if model.kind == "sbm":
        return base
    if model.kind == "shift":
        if model.shift_to == 2:
            return base + math.exp(m * math.log1p(-p)) / pairs
        return base
    return base / -math.expm1(m * math.log1p(-p))


@lru_cache(maxsize=64)
def _harmonic_table(n):
    out = np.empty(n + 1)
    out[0] = 0.0
    total = 0.0
    comp = 0.0
    for i in range(1, n + 1):
        term = 1.0 / i
        t = total + term
        # Neumaier compensation
        if abs(total) >= term:
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
        out[i] = total + comp
    out.setflags(write=False)
    return out


def harmonic_numbers(n):
    """Array ``[H_0, H_1, ..., H_n]`` with ``H_0 = 0``."""
    if n < 0:
        raise ParameterError("harmonic numbers need n >= 0")
    return _harmonic_table(int(n))


def harmonic(n):
    if n < 0:
        raise ParameterError("harmonic numbers need n >= 0")
    n = int(n)
    if n == 0:
        return 0.0
    return math.fsum(1.0 / i for i in range(1, n + 1))


def harmonic_diff(a, b):
    """``H_a - H_b`` summed directly over ``1/i`` for ``i`` in ``(b, a]``."""
    if a < b:
        return -harmonic_diff(b, a)
    return math.fsum(1.0 / i for i in range(int(b) + 1, int(a) + 1))


def harmonic_real(x):
    """Harmonic number at a real argument, ``psi(x + 1) + euler_gamma``."""
    from scipy.special import digamma

    if float(x).is_integer():
        return harmonic(int(x))
    return float(digamma(x + 1.0) + np.euler_gamma)
