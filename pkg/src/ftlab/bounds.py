"""Closed-form fixed-target runtime bounds with applicability status.

Every evaluator returns a :class:`BoundResult`.  Factors of the form ``1 +- o(1)``
are evaluated as 1 and flagged ``asymptotic_disregarded``; evaluations outside a
formula's preconditions are flagged ``precondition_violated`` (with ``nan`` where
the expression is undefined).  Unless noted, bounds count iterations of the
algorithm, i.e. evaluations after initialisation.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ftlab.core import (ParameterError, harmonic, harmonic_diff, harmonic_numbers, harmonic_real,
                        heavy_tail_constants)
from ftlab.io_utils import atomic_writer

APPLICABLE = "applicable"
VIOLATED = "precondition_violated"
ASYMPTOTIC = "asymptotic_disregarded"

__all__ = [
    "BoundResult",
    "APPLICABLE",
    "VIOLATED",
    "ASYMPTOTIC",
    "lo_exact",
    "lo_mu1_upper",
    "lo_standard_exact",
    "om_upper_worst",
    "om_upper_worst_values",
    "om_upper_random",
    "om_upper_random_values",
    "om_upper_random_min_k",
    "om_upper_random_resample",
    "om_lower_resample_near",
    "om_lower_resample_far",
    "om_lower_levels",
    "om_lower_lengler",
    "om_lower_drift",
    "om_drift_h",
    "om_mu1_upper",
    "binval_bounds",
    "binval_optimal_alpha",
    "mst_components_upper",
    "mst_weight_upper",
    "harmonic_binomial_mean",
    "harmonic_binomial_closed",
    "write_bounds_csv",
]


@dataclass(frozen=True)
class BoundResult:
    name: str
    value: float
    kind: str
    status: str = APPLICABLE
    note: str = ""
    n: int = None
    k: object = None

    @property
    def applicable(self):
        return self.status == APPLICABLE

    @property
    def usable(self):
        """Holds, possibly up to disregarded lower-order factors."""
        return self.status != VIOLATED


def _rate(p, n):
    return 1.0 / n if p is None else float(p)


def _pow1m(p, e):
    """``(1 - p)^e`` without cancellation."""
    return math.exp(e * math.log1p(-p))


def _check_k(k, n, low=1):
    if not low <= k <= n:
        raise ParameterError(f"target k={k} outside [{low}, {n}]")


# LeadingOnes

def lo_exact(model, n, k):
    """Expected iterations to reach ``k`` leading ones from a uniform start."""
    _check_k(k, n)
    model.check(n)
    kind = model.kind
    name = "lo_exact"
    if kind == "rls":
        if model.flips != 1:
            return BoundResult(name, math.nan, "exact", VIOLATED, "closed form needs single-bit RLS", n, k)
        return BoundResult(name, k * n / 2.0, "exact", n=n, k=k)
    if kind == "fast":
        ht = heavy_tail_constants(n, model.beta)
        j = np.arange(1, n // 2 + 1, dtype=float)
        w = j ** -model.beta * (j / n)
        log1m = np.log1p(-j / n)
        total = math.fsum(1.0 / math.fsum(w * np.exp(i * log1m)) for i in range(k))
        return BoundResult(name, 0.5 * ht.normalization * total, "exact", n=n, k=k)
    p = model.rate(n)
    sbm = (1.0 - p) * math.expm1(-k * math.log1p(-p)) / (2.0 * p * p)
    if kind == "sbm":
        return BoundResult(name, sbm, "exact", n=n, k=k)
    if kind == "resample":
        return BoundResult(name, sbm * -math.expm1(n * math.log1p(-p)), "exact", n=n, k=k)
    if model.shift_to != 1:
        return BoundResult(name, math.nan, "exact", VIOLATED, "closed form covers the shift to one flip", n, k)
    extra = _pow1m(p, n) / n
    total = math.fsum(1.0 / (p * _pow1m(p, i) + extra) for i in range(k))
    return BoundResult(name, 0.5 * total, "exact", n=n, k=k)


def lo_standard_exact(n, k):
    """``(n^2 - n)/2 * ((1 + 1/(n-1))^k - 1)``, the ``p = 1/n`` special case."""
    _check_k(k, n)
    if n < 2:
        raise ParameterError("needs n >= 2")
    value = (n * n - n) / 2.0 * math.expm1(k * math.log1p(1.0 / (n - 1)))
    return BoundResult("lo_standard_exact", value, "exact", n=n, k=k)


def lo_mu1_upper(mu, n, k):
    """``mu + 3 e k max{mu ln(e n), n}`` for the (mu+1) EA with ``p = 1/n``."""
    if mu < 1 or k < 0:
        raise ParameterError("needs mu >= 1 and k >= 0")
    value = mu + 3.0 * math.e * k * max(mu * math.log(math.e * n), n)
    return BoundResult("lo_mu1_upper", value, "upper", APPLICABLE, "mu = poly(n) not checked", n, k)


# OneMax

def om_upper_worst_values(q, n):
    """``(H_n - H_{n-k}) / q`` for ``k = 0..n`` as an array."""
    H = harmonic_numbers(n)
    return (H[n] - H[::-1]) / q


def om_upper_worst(q, n, k):
    """Worst-start upper bound ``(H_n - H_{n-k}) / q``."""
    _check_k(k, n, 0)
    if not 0.0 < q <= 1.0:
        raise ParameterError(f"one-bit probability must lie in (0, 1], got {q}")
    return BoundResult("om_upper_worst", harmonic_diff(n, n - k) / q, "upper", n=n, k=k)


def om_upper_random_values(q, n):
    """Values of :func:`om_upper_random` for ``k = 0..n`` (preconditions not checked)."""
    H = harmonic_numbers(n)
    return (harmonic_real(n / 2.0) - H[::-1] - 1.0 / (2.0 * n)) / q


def om_upper_random_min_k(n):
    """Smallest target for which the random-start bound applies."""
    return int(math.ceil(n / 2.0 + 2.0 * math.sqrt(n * math.log(n))))


def om_upper_random(q, n, k):
    """Random-start upper bound ``(H_{n/2} - H_{n-k} - 1/(2n)) / q``, ``k >= n/2 + 2 sqrt(n ln n)``."""
    _check_k(k, n)
    value = (harmonic_real(n / 2.0) - harmonic(n - k) - 1.0 / (2.0 * n)) / q
    if n < 2 or k < n / 2.0 + 2.0 * math.sqrt(n * math.log(n)):
        return BoundResult("om_upper_random", value, "upper", VIOLATED, "k below n/2 + 2 sqrt(n ln n)", n, k)
    return BoundResult("om_upper_random", value, "upper", ASYMPTOTIC, "o(1) term set to 0", n, k)


def _resample_factor(p, n):
    return -math.expm1(n * math.log1p(-p)) / (p * _pow1m(p, n - 1))


def om_upper_random_resample(p, n, k):
    """Resampling-strategy random-start bound with ``H_{n/2} - H_{n-k}``; ``k > n/2 + sqrt(n) ln n``."""
    _check_k(k, n)
    p = _rate(p, n)
    value = _resample_factor(p, n) * (harmonic_real(n / 2.0) - harmonic(n - k))
    ok = n >= 2 and k > n / 2.0 + math.sqrt(n) * math.log(n)
    return BoundResult("om_upper_random_resample", value, "upper", ASYMPTOTIC if ok else VIOLATED,
                       "1 - o(1) factor set to 1" if ok else "k too small", n, k)


def om_lower_resample_near(p, n, k):
    """Resampling-strategy lower bound for targets ``k >= n - n p~ ln^2 n`` (constant in ``k``)."""
    _check_k(k, n)
    p = _rate(p, n)
    pt = max(1.0 / n, p)
    ln = math.log(n)
    value = _resample_factor(p, n) * math.log(1.0 / (4.0 * pt ** 3 * n * n * ln ** 3))
    ok = k >= n - n * pt * ln * ln
    return BoundResult("om_lower_resample_near", value, "lower", ASYMPTOTIC if ok else VIOLATED,
                       "p = O(n^(-2/3-eps)) not checked" if ok else "k below n - n p~ ln^2 n", n, k)


def om_lower_resample_far(p, n, k):
    """Resampling-strategy lower bound for ``k <= n - n p~ ln^2 n``."""
    _check_k(k, n)
    p = _rate(p, n)
    pt = max(1.0 / n, p)
    ln = math.log(n)
    ok = k <= n - n * pt * ln * ln and k < n
    value = _resample_factor(p, n) * math.log(1.0 / (4.0 * pt * pt * n * (n - k) * ln)) if k < n else math.nan
    return BoundResult("om_lower_resample_far", value, "lower", ASYMPTOTIC if ok else VIOLATED,
                       "n - k = o(1/(p~^2 n ln n)) not checked" if ok else "k above n - n p~ ln^2 n", n, k)


def om_lower_levels_start(p, n):
    """First target covered by the fitness-level lower bound."""
    ln = math.log(n)
    return math.ceil(n - min(n / ln, 1.0 / (p * p * n * ln)))


def om_lower_levels(p, n, k):
    """Fitness-level lower bound ``(1 - 3.6/((1-p)^2 ln n)) (H_{n-l} - H_{n-k}) / (p (1-p)^(n-1))``."""
    _check_k(k, n)
    p = _rate(p, n)
    name = "om_lower_levels"
    if n < 2:
        return BoundResult(name, math.nan, "lower", VIOLATED, "needs n >= 2", n, k)
    ln = math.log(n)
    ell = om_lower_levels_start(p, n)
    factor = 1.0 - 3.6 / ((1.0 - p) ** 2 * ln)
    value = factor * harmonic_diff(n - ell, n - k) / (p * _pow1m(p, n - 1))
    if p > 1.0 / (math.sqrt(n) * ln):
        return BoundResult(name, value, "lower", VIOLATED, "p above 1/(sqrt(n) ln n)", n, k)
    if k < ell:
        return BoundResult(name, value, "lower", VIOLATED, f"k below first covered target {ell}", n, k)
    return BoundResult(name, value, "lower", n=n, k=k)


def om_lower_lengler(n, k):
    """``max(0, e n ln(n/(n-k)) - 2 n ln ln n - 16 n)`` for ``p = 1/n``; needs ``k < n``."""
    name = "om_lower_lengler"
    _check_k(k, n)
    if k >= n:
        return BoundResult(name, math.nan, "lower", VIOLATED, "undefined at k = n", n, k)
    if n < 3:
        return BoundResult(name, math.nan, "lower", VIOLATED, "ln ln n needs n >= 3", n, k)
    raw = math.e * n * math.log(n / (n - k)) - 2.0 * n * math.log(math.log(n)) - 16.0 * n
    if raw <= 0.0:
        return BoundResult(name, 0.0, "lower", APPLICABLE, f"clamped from {raw:.6g}", n, k)
    return BoundResult(name, raw, "lower", n=n, k=k)


def om_drift_h(x, n):
    """Drift bound integrated by the variable-drift lower bound for OneMax.

    ``h(x) = (x + 2 sqrt(x)) (1 + (16 x + 32 sqrt(x)) / n) / (e n)``; its reciprocal
    has the antiderivative used by :func:`om_lower_drift`.
    """
    r = math.sqrt(x)
    return (x + 2.0 * r) * (1.0 + (16.0 * x + 32.0 * r) / n) / (math.e * n)


def _drift_antiderivative(x, n, with_arctan):
    r = math.sqrt(x)
    val = 2.0 * math.log(r + 2.0) - math.log(n + 16.0 * x + 32.0 * r)
    if with_arctan:
        s = math.sqrt(n - 16.0)
        val += 8.0 * math.atan((4.0 * r + 4.0) / s) / s
    return val


def om_lower_drift(n, k, with_arctan=False):
    """Variable-drift lower bound for ``2n/3 < k < n`` with ``p = 1/n`` and start distance ``n/3``.

    ``e n [G(n/3) - G(n-k)]`` with ``G(x) = 2 ln(sqrt(x) + 2) - ln(n + 16x + 32 sqrt(x))``.
    ``with_arctan`` keeps the increasing arctangent addend of the exact
    antiderivative, which the default drops (giving a smaller value).
    """
    name = "om_lower_drift"
    _check_k(k, n)
    if not (2.0 * n / 3.0 < k < n) or (with_arctan and n <= 16):
        return BoundResult(name, math.nan, "lower", VIOLATED, "needs 2n/3 < k < n", n, k)
    x0 = n / 3.0
    value = math.e * n * (_drift_antiderivative(x0, n, with_arctan) - _drift_antiderivative(n - k, n, with_arctan))
    return BoundResult(name, value, "lower", ASYMPTOTIC, "1 - O(log n / n^2) factor set to 1", n, k)


def om_mu1_upper(mu, p, n, k):
    """(mu+1) EA upper bound with ``b = floor(n (1 - 1/mu))``."""
    _check_k(k, n)
    if mu < 1:
        raise ParameterError("mu must be at least 1")
    p = _rate(p, n)
    b = math.floor(n * (1.0 - 1.0 / mu))
    replicas = (mu / _pow1m(p, n)) * (2 * k - 1 - (n - k) * math.log(n / (n - k + 1)))
    if k <= b + 1:
        tail = k / n
    else:
        tail = (b + 1) / n + harmonic_diff(n - b - 1, n - k) / mu
    value = mu + replicas + mu / (p * _pow1m(p, n - 1)) * tail
    return BoundResult("om_mu1_upper", value, "upper", APPLICABLE, "mu = poly(n) not checked", n, k)


# BinVal

def _binval_terms(p, n_plus):
    A = p * n_plus * _pow1m(p, 1 - n_plus)
    B = math.log(1.0 / p) + (n_plus - 1) * math.log1p(-p) + 1.0
    return A, B


def binval_optimal_alpha(p, n, s):
    """Minimiser ``1 + sqrt(1 + B/A)`` of the upper bound over ``alpha > 1``."""
    p = _rate(p, n)
    n_plus = n - s
    A, B = _binval_terms(p, n_plus)
    return 1.0 + math.sqrt(1.0 + B / A)


def binval_bounds(p, n, s, direction="lower", alpha=None):
    """BinVal bounds for targets with ``2^s <= 2^n - k < 2^(s+1)`` (resampling strategy).

    ``n_minus = n - (s + 1)`` and ``n_plus = n - s``.  The upper bound has a free
    parameter ``alpha > 1``, defaulting to ``max(2, ln ln n_plus)``.
    """
    from ftlab.problems import binval_gap_levels

    p = _rate(p, n)
    n_minus, n_plus = binval_gap_levels(n, s)
    resample = -math.expm1(n * math.log1p(-p))
    if direction == "lower":
        name = "binval_lower"
        if n_minus <= 1:
            return BoundResult(name, math.nan, "lower", VIOLATED, f"n_minus = {n_minus} <= 1", n, s)
        value = resample / (p * _pow1m(p, n_minus)) * min(math.log(n_minus), math.log(1.0 / (p ** 3 * n_minus ** 2)))
        return BoundResult(name, value, "lower", ASYMPTOTIC, "p = O(n^(-2/3-eps)) not checked", n, s)
    if direction != "upper":
        raise ParameterError("direction must be 'lower' or 'upper'")
    name = "binval_upper"
    if alpha is None:
        alpha = max(2.0, math.log(math.log(n_plus))) if n_plus > 1 else 2.0
    if alpha <= 1.0 or n_plus < 1:
        return BoundResult(name, math.nan, "upper", VIOLATED, "needs alpha > 1 and n_plus >= 1", n, s)
    A, B = _binval_terms(p, n_plus)
    value = (A * alpha * alpha + B * alpha) * resample / (_pow1m(p, n_plus - 1) * p * (alpha - 1.0))
    return BoundResult(name, value, "upper", ASYMPTOTIC, f"alpha = {alpha:g}", n, s)


# MST

def mst_components_upper(q, m, k):
    """``(1 + ln((m - 1)/k)) / q`` iterations to reach at most ``k`` components."""
    if k < 1:
        raise ParameterError("component target must be at least 1")
    name = "mst_components_upper"
    if m < 2:
        return BoundResult(name, math.nan, "upper", VIOLATED, "needs m >= 2", m, k)
    value = (1.0 + math.log((m - 1) / k)) / q
    if k > m - 1:
        return BoundResult(name, value, "upper", VIOLATED, "k exceeds m - 1", m, k)
    return BoundResult(name, value, "upper", n=m, k=k)


def mst_weight_upper(q2, n_v, w_max, t):
    """``(1 + ln((n_v - 1) w_max / (t + 1))) / q2`` iterations from a spanning tree to excess ``<= t``."""
    name = "mst_weight_upper"
    if t < 0:
        return BoundResult(name, math.nan, "upper", VIOLATED, "weight excess must be non-negative", n_v, t)
    scale = (n_v - 1) * w_max
    value = (1.0 + math.log(scale / (t + 1.0))) / q2 if scale > 0 else math.nan
    if scale < t + 1:
        return BoundResult(name, value, "upper", VIOLATED, "t + 1 exceeds (n_v - 1) w_max", n_v, t)
    return BoundResult(name, value, "upper", n=n_v, k=t)


# weighted harmonic sums

def harmonic_binomial_mean(n):
    """``sum_i C(n, i) H_i / 2^n``: mean of ``H_X`` for ``X ~ B(n, 1/2)``."""
    H = harmonic_numbers(n)
    return math.fsum(math.comb(n, i) * H[i] for i in range(n + 1)) / 2.0 ** n


def harmonic_binomial_closed(n):
    """``H_n - sum_{j=1}^n 1/(j 2^j)``."""
    return harmonic(n) - math.fsum(1.0 / (j * 2.0 ** j) for j in range(1, n + 1))


def write_bounds_csv(path, results):
    """Bound table: ``bound_name,n,k,value,kind,status``."""
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bound_name", "n", "k", "value", "kind", "status"])
        for r in results:
            w.writerow([r.name, r.n, r.k, repr(float(r.value)), r.kind, r.status])
