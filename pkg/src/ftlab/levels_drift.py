"""Fitness-level and drift-theorem calculators, plus a soundness check on exact chains."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ftlab.core import ParameterError
from ftlab.exact_markov import (DenseChain, dense_hitting_time, expected_final_potential, leadingones_q,
                                leadingones_uniform_init)
from ftlab.io_utils import atomic_writer

__all__ = [
    "LevelSpec",
    "LevelConditionError",
    "DriftSpec",
    "QuadratureError",
    "TabulatedDrift",
    "fl_upper",
    "fl_lower",
    "fl_upper_refined",
    "merge_levels",
    "leadingones_level_spec",
    "integrate",
    "additive_upper",
    "additive_lower",
    "multiplicative_upper",
    "variable_upper",
    "variable_lower",
    "overshoot_variable_upper",
    "overshoot_multiplicative_upper",
    "kernel_to_dense",
    "verify_drift_on_chain",
    "write_report_json",
    "THEOREMS",
]

COND_TOL = 1e-12


class LevelConditionError(ParameterError):
    """A fitness-level theorem's landing-distribution condition fails."""


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LevelSpec:
    """Levels ``0..m-1``; the last one is the target.

    ``rates[i]`` (for ``i < m - 1``) is the level-leaving probability bound
    (``p_i``, ``u_i`` or ``s_i`` depending on the theorem), ``gamma[i, j]`` the
    conditional landing distribution over ``j > i`` and ``chi`` the viscosity.
    """

    rates: np.ndarray
    start: np.ndarray
    gamma: np.ndarray = None
    chi: float = 0.0

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        start = np.asarray(self.start, dtype=float)
        m = start.size
        if m < 2 or rates.shape != (m - 1,):
            raise ParameterError("need m >= 2 levels and m - 1 rates")
        if np.any(rates <= 0.0) or np.any(rates > 1.0 + COND_TOL):
            bad = int(np.flatnonzero((rates <= 0) | (rates > 1.0 + COND_TOL))[0])
            raise ParameterError(f"rate of level {bad} must lie in (0, 1], got {rates[bad]}")
        if abs(start.sum() - 1.0) > 1e-9 or np.any(start < 0):
            raise ParameterError("start distribution must sum to one")
        if not 0.0 <= self.chi <= 1.0:
            raise ParameterError("chi must lie in [0, 1]")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "start", start)
        if self.gamma is not None:
            gamma = np.asarray(self.gamma, dtype=float)
            if gamma.shape != (m, m):
                raise ParameterError("gamma must be m x m")
            for i in range(m - 1):
                if np.any(gamma[i, : i + 1] != 0.0) or abs(gamma[i, i + 1:].sum() - 1.0) > COND_TOL:
                    raise ParameterError(f"gamma row {i} must be a distribution over higher levels")
            object.__setattr__(self, "gamma", gamma)

    @property
    def m(self):
        return self.start.size


def _tails(gamma):
    """``tails[i, j] = sum_{k >= j} gamma[i, k]``."""
    return np.cumsum(gamma[:, ::-1], axis=1)[:, ::-1]


def _need_gamma(spec):
    if spec.gamma is None:
        raise ParameterError("theorem needs landing probabilities gamma")


def check_lower_conditions(spec):
    """``gamma[i, j] >= chi * sum_{k>=j} gamma[i, k]`` for all ``i < j``."""
    _need_gamma(spec)
    tails = _tails(spec.gamma)
    m = spec.m
    for i in range(m - 1):
        for j in range(i + 1, m):
            if spec.gamma[i, j] < spec.chi * tails[i, j] - COND_TOL:
                raise LevelConditionError(
                    f"lower-bound condition fails at (i, j) = ({i}, {j}): "
                    f"{spec.gamma[i, j]:.6g} < chi * {tails[i, j]:.6g}")


def check_refined_conditions(spec):
    """``gamma[i, j] <= chi * tail`` for ``j < m - 1`` and ``(1 - chi) s_i <= s_{i+1}``."""
    _need_gamma(spec)
    tails = _tails(spec.gamma)
    m = spec.m
    for i in range(m - 1):
        for j in range(i + 1, m - 1):
            if spec.gamma[i, j] > spec.chi * tails[i, j] + COND_TOL:
                raise LevelConditionError(
                    f"refined upper-bound condition fails at (i, j) = ({i}, {j}): "
                    f"{spec.gamma[i, j]:.6g} > chi * {tails[i, j]:.6g}")
    s = spec.rates
    for i in range(m - 2):
        if (1.0 - spec.chi) * s[i] > s[i + 1] * (1.0 + COND_TOL):
            raise LevelConditionError(f"rate condition (1 - chi) s_i <= s_(i+1) fails at (i, j) = ({i}, {i + 1})")


def fl_upper(spec):
    """Plain fitness-level upper bound ``sum_i start_i sum_{j>=i} 1/p_j``."""
    inv = 1.0 / spec.rates
    suffix = np.concatenate([np.cumsum(inv[::-1])[::-1], [0.0]])
    return float(np.dot(spec.start, suffix))


def _viscous_sum(spec):
    inv = 1.0 / spec.rates
    m = spec.m
    suffix = np.concatenate([np.cumsum(inv[::-1])[::-1], [0.0, 0.0]])
    per = np.zeros(m)
    per[: m - 1] = inv + spec.chi * suffix[1:m]
    return float(np.dot(spec.start, per))


def fl_lower(spec, validate=True):
    """Fitness-level lower bound ``sum_i start_i (1/u_i + chi sum_{j>i} 1/u_j)``."""
    if validate:
        check_lower_conditions(spec)
    return _viscous_sum(spec)


def fl_upper_refined(spec, validate=True):
    """Refined fitness-level upper bound, same shape as :func:`fl_lower` with rates ``s_i``."""
    if validate:
        check_refined_conditions(spec)
    return _viscous_sum(spec)


def merge_levels(spec, m_new):
    """Merge levels ``m_new - 1 .. m - 1`` into a single target level (keeps ``m_new`` levels)."""
    m = spec.m
    if not 1 < m_new <= m:
        raise ParameterError(f"new level count must lie in (1, {m}]")
    if m_new == m:
        return spec
    t = m_new - 1
    start = np.concatenate([spec.start[:t], [spec.start[t:].sum()]])
    gamma = None
    if spec.gamma is not None:
        gamma = np.zeros((m_new, m_new))
        gamma[:t, :t] = spec.gamma[:t, :t]
        gamma[:t, t] = spec.gamma[:t, t:].sum(axis=1)
    return LevelSpec(spec.rates[:t].copy(), start, gamma, spec.chi)


def leadingones_level_spec(n, model, k=None):
    """Levels = LeadingOnes values ``0..n`` with ``gamma_{i,j} = 2^(i-j)``, chi = 1/2 and uniform start.

    With a target ``k`` the levels ``k..n`` are merged.
    """
    q = leadingones_q(n, model)
    m = n + 1
    gamma = np.zeros((m, m))
    for i in range(n):
        d = np.arange(1, n - i + 1)
        row = np.ldexp(1.0, -d)
        row[-1] *= 2.0
        gamma[i, i + 1:] = row
    spec = LevelSpec(q, leadingones_uniform_init(n), gamma, 0.5)
    return spec if k is None else merge_levels(spec, k + 1)


# quadrature

def _simpson(f, a, fa, b, fb):
    c = 0.5 * (a + b)
    fc = f(c)
    return c, fc, (b - a) / 6.0 * (fa + 4.0 * fc + fb)


def _adaptive(f, a, b, tol, max_depth):
    fa, fb = f(a), f(b)
    c, fc, whole = _simpson(f, a, fa, b, fb)
    total = 0.0
    stack = [(a, fa, b, fb, c, fc, whole, tol, 0)]
    while stack:
        a, fa, b, fb, c, fc, whole, eps, depth = stack.pop()
        lc, flc, left = _simpson(f, a, fa, c, fc)
        rc, frc, right = _simpson(f, c, fc, b, fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
            continue
        if depth >= max_depth:
            raise QuadratureError(f"no convergence on [{a}, {b}] within depth {max_depth}")
        stack.append((a, fa, c, fc, lc, flc, left, eps / 2.0, depth + 1))
        stack.append((c, fc, b, fb, rc, frc, right, eps / 2.0, depth + 1))
    return total


def integrate(f, a, b, rel_tol=1e-10, max_depth=60, breakpoints=()):
    """Adaptive Simpson integration of ``f`` over ``[a, b]``.

    The absolute tolerance is ``rel_tol`` times a first coarse estimate of the
    integral's magnitude.  ``breakpoints`` split the interval where ``f`` has kinks.
    """
    if a == b:
        return 0.0
    if a > b:
        return -integrate(f, b, a, rel_tol, max_depth, breakpoints)
    pts = [a] + sorted(x for x in breakpoints if a < x < b) + [b]
    coarse = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        coarse += abs(_simpson(f, lo, f(lo), hi, f(hi))[2])
    scale = max(coarse, 1e-300)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        share = scale * rel_tol * (hi - lo) / (b - a)
        total += _adaptive(f, lo, hi, share, max_depth)
    return total


class TabulatedDrift:
    """Monotone piecewise-linear drift function through ``(x_j, h_j)``, constant outside."""

    def __init__(self, xs, hs):
        xs = np.asarray(xs, dtype=float)
        hs = np.asarray(hs, dtype=float)
        order = np.argsort(xs)
        self.xs, self.hs = xs[order], hs[order]
        if np.any(np.diff(self.xs) <= 0):
            raise ParameterError("table abscissae must be distinct")
        if np.any(np.diff(self.hs) < 0):
            raise ParameterError("tabulated drift must be non-decreasing")

    def __call__(self, x):
        return float(np.interp(x, self.xs, self.hs))

    @property
    def breakpoints(self):
        return tuple(self.xs)


def _breaks(h):
    return getattr(h, "breakpoints", ())


def check_drift_function(h, a, b, samples=1000):
    """Positivity and monotonicity of ``h`` on ``[a, b]`` at evenly spaced samples."""
    xs = np.linspace(a, b, samples) if b > a else np.array([a])
    vals = np.array([h(x) for x in xs])
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        bad = xs[np.flatnonzero(~(vals > 0))[0]]
        raise ParameterError(f"drift function must be positive on [{a}, {b}]; h({bad:g}) = {h(bad)}")
    if np.any(np.diff(vals) < -1e-12 * np.abs(vals[1:])):
        raise ParameterError(f"drift function must be non-decreasing on [{a}, {b}]")


@dataclass(frozen=True)
class DriftSpec:
    """Inputs of a drift bound; ``h`` is a callable or :class:`TabulatedDrift`."""

    x0: float
    target: float
    delta: float = None
    h: object = None
    c: object = None
    e_xt: float = None
    extra: dict = field(default_factory=dict)


# drift theorems

def additive_upper(x0, e_xt, delta):
    """``(X_0 - E[X_T | X_0]) / delta``."""
    if delta <= 0:
        raise ParameterError("delta must be positive")
    return (x0 - e_xt) / delta


def additive_lower(x0, delta, e_xt=None, k=None):
    """``(X_0 - E[X_T | X_0]) / delta``, or the weaker ``(X_0 - k) / delta``."""
    if delta <= 0:
        raise ParameterError("delta must be positive")
    if (e_xt is None) == (k is None):
        raise ParameterError("give exactly one of e_xt and k")
    return (x0 - (e_xt if e_xt is not None else k)) / delta


def multiplicative_upper(x0, k_thr, delta):
    """``(1 + ln(X_0 / k')) / delta``."""
    if delta <= 0 or not x0 >= k_thr > 0:
        raise ParameterError("needs delta > 0 and X_0 >= k' > 0")
    return (1.0 + math.log(x0 / k_thr)) / delta


def _inv_integral(h, lo, hi, rel_tol):
    if hi < lo:
        raise ParameterError("start value below the integration limit")
    check_drift_function(h, lo, hi)
    return integrate(lambda z: 1.0 / h(z), lo, hi, rel_tol, breakpoints=_breaks(h))


def variable_upper(h, k_thr, x0, rel_tol=1e-10):
    """``k'/h(k') + int_{k'}^{X_0} dz / h(z)``."""
    return k_thr / h(k_thr) + _inv_integral(h, k_thr, x0, rel_tol)


def variable_lower(h, k, x0, rel_tol=1e-10):
    """``int_k^{X_0} dz / h(z)``."""
    if k <= 0:
        raise ParameterError("target must be positive")
    return _inv_integral(h, k, x0, rel_tol)


def overshoot_variable_upper(h, k_thr, x0, e_xt, rel_tol=1e-10):
    """``(k' - E[X_T | X_0]) / h(k') + int_{k'}^{X_0} dz / h(z)``."""
    if e_xt > k_thr:
        raise ParameterError("expected final value must not exceed the threshold")
    return (k_thr - e_xt) / h(k_thr) + _inv_integral(h, k_thr, x0, rel_tol)


def overshoot_multiplicative_upper(delta, k_thr, x0, e_xt):
    """``(1 - E[X_T | X_0]/k' + ln(X_0/k')) / delta``."""
    if delta <= 0 or not x0 >= k_thr > 0:
        raise ParameterError("needs delta > 0 and X_0 >= k' > 0")
    if e_xt > k_thr:
        raise ParameterError("expected final value must not exceed the threshold")
    return (1.0 - e_xt / k_thr + math.log(x0 / k_thr)) / delta


# verification on exact chains

THEOREMS = (
    "additive_upper",
    "additive_upper_naive",
    "additive_lower",
    "multiplicative_upper",
    "variable_upper",
    "variable_lower",
    "overshoot_variable_upper",
    "overshoot_multiplicative_upper",
)

_KIND = {
    "additive_upper": "upper",
    "additive_upper_naive": "info",
    "additive_lower": "lower",
    "multiplicative_upper": "upper",
    "variable_upper": "upper",
    "variable_lower": "lower",
    "overshoot_variable_upper": "upper",
    "overshoot_multiplicative_upper": "upper",
}


def kernel_to_dense(kernel, target):
    """Dense chain of an elitist kernel with potential ``(S - 1) - state`` and target state ``>= target``."""
    S = kernel.n_states
    P = np.zeros((S, S))
    for d in range(1, kernel.width + 1):
        idx = np.arange(S - d)
        P[idx, idx + d] = kernel.up[d - 1, : S - d]
    P[np.arange(S), np.arange(S)] = 1.0 - P.sum(axis=1)
    values = (S - 1) - np.arange(S, dtype=float)
    return DenseChain.from_potential(P, values, (S - 1) - target)


class _ChainData:
    def __init__(self, chain, values, target, init):
        self.chain = chain
        self.v = np.asarray(values, dtype=float)
        self.target = float(target)
        self.init = init
        self.trans = np.flatnonzero(~chain.absorbing)
        P = chain.P
        self.drift = self.v - P @ self.v
        self.abs_step = np.array([float(np.dot(P[s], np.abs(self.v - self.v[s]))) for s in range(len(self.v))])
        self.min_next = np.array([self.v[np.flatnonzero(P[s] > 0)].min() for s in range(len(self.v))])
        self.decreasing = all(np.all(self.v[np.flatnonzero(P[s] > 0)] <= self.v[s] + 1e-12) for s in self.trans)
        self.x0 = float(self.v[init])
        # threshold: smallest potential of a non-target state
        self.k_thr = float(self.v[self.trans].min()) if self.trans.size else math.nan
        self.nonneg = bool(np.all(self.v >= 0))

    def upper_envelope(self):
        """Largest non-decreasing ``h`` with ``h(v_s) <= drift(s)`` on non-target states."""
        vs = self.v[self.trans]
        ds = self.drift[self.trans]
        xs = np.unique(vs)
        hs = np.array([ds[vs >= x].min() for x in xs])
        return xs, hs

    def lower_envelopes(self):
        """Tabulated ``c`` (below every successor) and ``h`` with ``h(c(v_s)) >= drift(s)``, both non-decreasing."""
        vs = self.v[self.trans]
        xs = np.unique(vs)
        cs = np.array([self.min_next[self.trans][vs >= x].min() for x in xs])
        c_of = {x: c for x, c in zip(xs, cs)}
        c_states = np.array([c_of[x] for x in vs])
        ys = np.unique(cs)
        hs = np.array([self.drift[self.trans][c_states <= y].max() for y in ys])
        return xs, cs, ys, hs


def _entry(kind, bound, exact, status, note=""):
    out = {"kind": kind, "bound": None if bound is None else float(bound), "exact": float(exact),
           "status": status, "margin": None, "note": note}
    if bound is not None and status != "skipped":
        out["margin"] = float(bound - exact) if kind == "upper" else float(exact - bound)
    return out


def _judge(kind, bound, exact, rel_tol):
    slack = rel_tol * max(1.0, abs(exact))
    if kind == "upper":
        return "pass" if bound >= exact - slack else "fail"
    if kind == "lower":
        return "pass" if bound <= exact + slack else "fail"
    return "info"


def verify_drift_on_chain(chain, values, target, init, theorems=THEOREMS, rel_tol=1e-9):
    """Evaluate drift bounds from exact chain data and compare them with the exact hitting time.

    The hitting time is the first step at which the potential is ``<= target``.
    Drift functions are the tightest monotone envelopes of the exact per-state
    drift.  Theorems whose preconditions the chain cannot satisfy are reported as
    ``skipped``.
    """
    values = np.asarray(values, dtype=float)
    absorbing = values <= target
    if chain.values is None or not np.array_equal(chain.absorbing, absorbing):
        chain = DenseChain(chain.P, absorbing, values)
    exact = dense_hitting_time(chain, init)
    data = _ChainData(chain, values, target, init)
    e_xt = expected_final_potential(chain, init, values)
    report = {"exact": exact, "x0": data.x0, "target": float(target), "e_xt": e_xt,
              "threshold": data.k_thr, "theorems": {}}
    out = report["theorems"]
    tr = data.trans
    if absorbing[init]:
        for name in theorems:
            out[name] = _entry(_KIND[name], None, exact, "skipped", "start already on target")
        return report
    dmin = float(data.drift[tr].min())
    dmax = float(data.drift[tr].max())
    for name in theorems:
        kind = _KIND[name]
        try:
            bound, note = _evaluate(name, data, e_xt, dmin, dmax)
        except (ParameterError, QuadratureError) as exc:
            out[name] = _entry(kind, None, exact, "skipped", str(exc))
            continue
        if bound is None:
            out[name] = _entry(kind, None, exact, "skipped", note)
            continue
        out[name] = _entry(kind, bound, exact, _judge(kind, bound, exact, rel_tol), note)
    statuses = [e["status"] for e in out.values()]
    report["ok"] = "fail" not in statuses
    return report


def _evaluate(name, data, e_xt, dmin, dmax):
    tr = data.trans
    v = data.v
    if name == "additive_upper":
        if dmin <= 0:
            return None, "drift not bounded away from zero"
        return additive_upper(data.x0, e_xt, dmin), f"delta = {dmin:.6g}"
    if name == "additive_upper_naive":
        if dmin <= 0:
            return None, "drift not bounded away from zero"
        return (data.x0 - data.target) / dmin, "ignores the overshoot; not a valid bound in general"
    if name == "additive_lower":
        if dmax <= 0:
            return None, "non-positive drift"
        c = float(data.abs_step[tr].max())
        return additive_lower(data.x0, dmax, e_xt=e_xt), f"delta = {dmax:.6g}, step bound c = {c:.6g}"
    if name in ("multiplicative_upper", "overshoot_multiplicative_upper"):
        if not data.nonneg or np.any(v[tr] <= 0):
            return None, "potential must be non-negative and positive off target"
        delta = float((data.drift[tr] / v[tr]).min())
        if delta <= 0:
            return None, "multiplicative drift not positive"
        if name == "multiplicative_upper":
            return multiplicative_upper(data.x0, data.k_thr, delta), f"delta = {delta:.6g}"
        return overshoot_multiplicative_upper(delta, data.k_thr, data.x0, e_xt), f"delta = {delta:.6g}"
    if name in ("variable_upper", "overshoot_variable_upper"):
        if name == "variable_upper" and not data.nonneg:
            return None, "potential must stay non-negative"
        xs, hs = data.upper_envelope()
        if hs.min() <= 0:
            return None, "drift envelope not positive"
        h = TabulatedDrift(xs, hs) if xs.size > 1 else (lambda z, c=float(hs[0]): c)
        if name == "variable_upper":
            return variable_upper(h, data.k_thr, data.x0), "monotone envelope of exact drift"
        return overshoot_variable_upper(h, data.k_thr, data.x0, e_xt), "monotone envelope of exact drift"
    if name == "variable_lower":
        if not data.nonneg or not data.decreasing:
            return None, "needs a non-increasing, non-negative potential"
        if data.target <= 0:
            return None, "target must be positive"
        xs, cs, ys, hs = data.lower_envelopes()
        if hs.min() <= 0:
            return None, "drift envelope not positive"
        h = TabulatedDrift(ys, hs) if ys.size > 1 else (lambda z, c=float(hs[0]): c)
        return variable_lower(h, data.target, data.x0), "envelopes c, h from exact successors and drift"
    raise ParameterError(f"unknown theorem {name!r}")


def write_report_json(path, report):
    with atomic_writer(path) as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
