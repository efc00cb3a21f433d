"""Exact expected hitting times of elitist fitness chains and small dense chains.

An elitist (1+1)-type process on OneMax or LeadingOnes only ever moves to a
better fitness value, so its fitness sequence is a Markov chain with an
upper-triangular transition matrix.  :class:`MarkovKernel` stores that matrix by
jump width; expected fixed-target times follow from one forward pass over the
states (visit probabilities times expected sojourn) or from the usual backward
recursion.
"""

import csv
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ftlab.core import ParameterError, flip_count_pmf, one_bit_q
from ftlab.io_utils import atomic_writer

__all__ = [
    "MarkovKernel",
    "DenseChain",
    "AbsorbingTrapError",
    "onemax_kernel",
    "leadingones_kernel",
    "leadingones_q",
    "onemax_uniform_init",
    "leadingones_uniform_init",
    "point_init",
    "fixed_target_expectation",
    "fixed_target_profile",
    "dense_hitting_time",
    "absorption_distribution",
    "expected_final_potential",
    "overshoot_example_chain",
    "RatioTableRow",
    "ratio_table",
    "write_profile_csv",
]

TAIL_TOL = 1e-15


class AbsorbingTrapError(ValueError):
    """A reachable non-target state can never be left."""


@dataclass(frozen=True)
class MarkovKernel:
    """Elitist chain on states ``0..S-1``.

    ``up[d - 1, i]`` is the probability of moving from ``i`` to ``i + d``; the
    remaining mass of row ``i`` is the stay probability.  ``dropped[i]`` records
    jump mass removed by tail truncation (already folded into staying).
    """

    up: np.ndarray
    dropped: np.ndarray = None
    label: str = ""

    def __post_init__(self):
        up = np.asarray(self.up, dtype=float)
        if up.ndim != 2:
            raise ParameterError("jump table must be two-dimensional")
        S = up.shape[1]
        d = np.arange(1, up.shape[0] + 1)[:, None]
        if np.any(up[(np.arange(S)[None, :] + d) >= S] != 0.0):
            raise ParameterError("jump table moves beyond the last state")
        if np.any(up < 0):
            raise ParameterError("negative transition probability")
        up.setflags(write=False)
        object.__setattr__(self, "up", up)
        if self.dropped is None:
            object.__setattr__(self, "dropped", np.zeros(S))

    @property
    def n_states(self):
        return self.up.shape[1]

    @property
    def width(self):
        return self.up.shape[0]

    def improvement(self):
        """Probability of leaving each state, summed directly over jumps."""
        return self.up.sum(axis=0)

    def stay(self):
        return 1.0 - self.improvement()

    def transition(self, i, j):
        if j < i:
            return 0.0
        if j == i:
            return float(self.stay()[i])
        d = j - i
        return float(self.up[d - 1, i]) if d <= self.width else 0.0

    def check(self, tol=1e-10):
        s = self.improvement()
        if np.any(s > 1.0 + tol):
            raise ParameterError("row sums exceed one")
        return True


def _tail_cut(pmf, tol=TAIL_TOL):
    """Largest flip count kept: the smallest ``L`` with ``sum(pmf[L+1:]) < tol``."""
    tail = np.cumsum(pmf[::-1])[::-1]
    for L in range(len(pmf)):
        if L + 1 >= len(pmf) or tail[L + 1] < tol:
            return L
    return len(pmf) - 1


def _log_falling(x, r):
    """``log((x)_t)`` for ``t = 0..r`` as a ``(r + 1, len(x))`` array; ``-inf`` where zero."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((r + 1, x.size))
    with np.errstate(divide="ignore"):
        for t in range(r):
            fac = x - t
            out[t + 1] = out[t] + np.where(fac > 0, np.log(np.maximum(fac, 1e-300)), -np.inf)
    return out


def onemax_kernel(n, model, tol=TAIL_TOL):
    """Fitness chain of the (1+1) scheme on OneMax under ``model``.

    From ``i`` ones, flipping ``a`` of the ``n - i`` zeros and ``l - a`` ones gives
    ``i + 2a - l``; the flip positions are a uniform ``l``-subset, so ``a`` is
    hypergeometric.  Flip counts beyond the point where the residual pmf tail is
    below ``tol`` are dropped and their mass is counted as staying.
    """
    if n < 1:
        raise ParameterError("n must be positive")
    pmf = np.asarray(flip_count_pmf(model, n))
    L = _tail_cut(pmf, tol)
    i = np.arange(n + 1, dtype=float)
    lf_zero = _log_falling(n - i, L)
    lf_one = _log_falling(i, L)
    lf_n = _log_falling(np.array([float(n)]), L)[:, 0]
    up = np.zeros((max(L, 1), n + 1))
    for ell in range(1, L + 1):
        if pmf[ell] == 0.0:
            continue
        a = np.arange(ell // 2 + 1, ell + 1)  # improving only: 2a - ell >= 1
        logc = gammaln(ell + 1) - gammaln(a + 1) - gammaln(ell - a + 1)
        logh = logc[:, None] + lf_zero[a] + lf_one[ell - a] - lf_n[ell]
        prob = pmf[ell] * np.exp(logh)
        for row, aa in zip(prob, a):
            up[2 * aa - ell - 1] += row
    dropped = np.full(n + 1, math.fsum(pmf[L + 1:]))
    S = n + 1
    d = np.arange(1, up.shape[0] + 1)[:, None]
    up[(np.arange(S)[None, :] + d) >= S] = 0.0
    model_label = model.label()
    return MarkovKernel(up, dropped, f"onemax(n={n},{model_label})")


def leadingones_q(n, model):
    """Improvement probabilities ``q_i``: bit ``i+1`` flips while bits ``1..i`` stay.

    ``q_i = sum_l Pr[l] * C(n-i-1, l-1) / C(n, l)``.
    """
    pmf = np.asarray(flip_count_pmf(model, n))
    i = np.arange(n, dtype=float)
    q = np.zeros(n)
    ratio = np.ones(n)  # (n-i-1)_(l-1) / (n-1)_(l-1)
    for ell in range(1, n + 1):
        if ell > 1:
            t = ell - 2
            ratio = ratio * np.maximum(n - i - 1 - t, 0.0) / (n - 1 - t)
        if pmf[ell] != 0.0:
            q += pmf[ell] * (ell / n) * ratio
    return q


def leadingones_kernel(n, model):
    """LeadingOnes fitness chain: leave ``i`` w.p. ``q_i``, land at ``j`` w.p. ``2^(i-j)``.

    The last state absorbs the leftover mass: ``gamma_{i,n} = 2^(i-n+1)``.
    """
    if n < 1:
        raise ParameterError("n must be positive")
    q = leadingones_q(n, model)
    up = np.zeros((n, n + 1))
    for i in range(n):
        d = np.arange(1, n - i + 1)
        gamma = np.ldexp(1.0, -d)
        gamma[-1] *= 2.0
        up[d - 1, i] = q[i] * gamma
    return MarkovKernel(up, None, f"leadingones(n={n},{model.label()})")


def onemax_uniform_init(n):
    i = np.arange(n + 1)
    return np.exp(gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1) - n * math.log(2.0))


def leadingones_uniform_init(n):
    out = np.ldexp(1.0, -(np.arange(n + 1) + 1))
    out[n] = math.ldexp(1.0, -n)
    return out


def point_init(n_states, state=0):
    out = np.zeros(n_states)
    out[state] = 1.0
    return out


def _as_init(kernel, init):
    if init is None or (isinstance(init, str) and init == "worst"):
        return point_init(kernel.n_states, 0)
    init = np.asarray(init, dtype=float)
    if init.shape != (kernel.n_states,):
        raise ParameterError(f"initial distribution must have {kernel.n_states} entries")
    if abs(init.sum() - 1.0) > 1e-9 or np.any(init < 0):
        raise ParameterError("initial distribution must be a probability vector")
    return init


def fixed_target_expectation(kernel, k, init=None, offset=0.0):
    """Expected number of steps until a state ``>= k`` is entered, plus ``offset``.

    Backward recursion ``E_i = (1 + sum_{i<j<k} P(i, j) E_j) / s_i``.  Use
    ``offset=1`` to count the initial evaluation as well.
    """
    S = kernel.n_states
    if not 0 <= k < S:
        raise ParameterError(f"target must lie in [0, {S - 1}]")
    init = _as_init(kernel, init)
    s = kernel.improvement()
    up = kernel.up
    E = np.zeros(S)
    trapped = np.zeros(S, dtype=bool)  # a state that cannot be left is reachable
    for i in range(k - 1, -1, -1):
        dmax = min(kernel.width, k - 1 - i)
        if s[i] <= 0.0 or (dmax > 0 and np.any((up[:dmax, i] > 0) & trapped[i + 1:i + 1 + dmax])):
            trapped[i] = True
            continue
        acc = 1.0
        if dmax > 0:
            acc += float(np.dot(up[:dmax, i], E[i + 1:i + 1 + dmax]))
        E[i] = acc / s[i]
    bad = np.flatnonzero((init[:k] > 0) & trapped[:k])
    if bad.size:
        raise AbsorbingTrapError(f"from state {bad[0]} a state below target {k} that cannot be left is reachable")
    return float(np.dot(init[:k], E[:k])) + offset


def fixed_target_profile(kernel, init=None, offset=0.0):
    """Expected steps to reach every target ``k = 0..S-1`` in one forward pass.

    ``v_i`` is the probability that state ``i`` is ever visited; the time to
    reach ``>= k`` is ``sum_{i<k} v_i / s_i``.
    """
    S = kernel.n_states
    init = _as_init(kernel, init)
    s = kernel.improvement()
    up = kernel.up
    W = kernel.width
    v = init.astype(float).copy()
    sojourn = np.zeros(S)
    trap = None
    for i in range(S - 1):
        if v[i] == 0.0:
            continue
        if s[i] <= 0.0:
            trap = i
            break
        sojourn[i] = v[i] / s[i]
        dmax = min(W, S - 1 - i)
        v[i + 1:i + 1 + dmax] += sojourn[i] * up[:dmax, i]
    profile = np.concatenate([[0.0], np.cumsum(sojourn[:-1])]) + offset
    if trap is not None:
        profile[trap + 1:] = np.inf
    return profile


@dataclass(frozen=True)
class DenseChain:
    """Finite chain with transition matrix ``P`` and an absorbing-state mask."""

    P: np.ndarray
    absorbing: np.ndarray
    values: np.ndarray = None

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ParameterError("transition matrix must be square")
        if np.any(P < -1e-15) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-10):
            raise ParameterError("rows must be probability vectors")
        absorbing = np.asarray(self.absorbing, dtype=bool)
        if absorbing.shape != (P.shape[0],):
            raise ParameterError("absorbing mask has the wrong length")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "absorbing", absorbing)
        if self.values is not None:
            object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def n_states(self):
        return self.P.shape[0]

    @classmethod
    def from_potential(cls, P, values, target):
        """Chain whose absorbing states are those with potential ``<= target``."""
        values = np.asarray(values, dtype=float)
        return cls(P, values <= target, values)


def _reach(P, start):
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(P[u] > 0):
            if v not in seen:
                seen.add(int(v))
                queue.append(int(v))
    return seen


def _transient_system(chain, init):
    if chain.absorbing[init]:
        return None
    P = chain.P
    reach = _reach(np.where(chain.absorbing[:, None], 0.0, P), init)
    states = sorted(s for s in reach if not chain.absorbing[s])
    # every transient state reachable from init must be able to reach absorption
    rev = P.T > 0
    good = set(np.flatnonzero(chain.absorbing).tolist())
    queue = deque(good)
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(rev[u]):
            v = int(v)
            if v not in good and not chain.absorbing[v]:
                good.add(v)
                queue.append(v)
    bad = [s for s in states if s not in good]
    if bad:
        raise AbsorbingTrapError(f"absorption unreachable from state {bad[0]}")
    return states


def dense_hitting_time(chain, init):
    """Expected steps to absorption from state ``init`` (LAPACK solve of ``(I - Q) t = 1``)."""
    states = _transient_system(chain, init)
    if states is None:
        return 0.0
    Q = chain.P[np.ix_(states, states)]
    A = np.eye(len(states)) - Q
    try:
        t = np.linalg.solve(A, np.ones(len(states)))
    except np.linalg.LinAlgError as exc:
        raise AbsorbingTrapError("singular hitting-time system") from exc
    return float(t[states.index(init)])


def absorption_distribution(chain, init):
    """Probability of being absorbed in each state, starting at ``init``."""
    S = chain.n_states
    out = np.zeros(S)
    states = _transient_system(chain, init)
    if states is None:
        out[init] = 1.0
        return out
    absorbing = np.flatnonzero(chain.absorbing)
    Q = chain.P[np.ix_(states, states)]
    R = chain.P[np.ix_(states, absorbing)]
    B = np.linalg.solve(np.eye(len(states)) - Q, R)
    out[absorbing] = B[states.index(init)]
    return out


def expected_final_potential(chain, init, values=None):
    """``E[X_T | X_0]``: potential at the absorption step."""
    values = chain.values if values is None else np.asarray(values, dtype=float)
    if values is None:
        raise ParameterError("chain has no potential values")
    return float(np.dot(absorption_distribution(chain, init), values))


def overshoot_example_chain(n):
    """Two-state process: from potential 1 jump to ``-n + 1`` w.p. ``1/n``, else stay.

    The target is potential ``<= 0``; state 0 is the start.  The expected drift at
    the start is exactly 1 while the expected hitting time is ``n``.
    """
    if n < 1:
        raise ParameterError("n must be positive")
    P = np.array([[1.0 - 1.0 / n, 1.0 / n], [0.0, 1.0]])
    return DenseChain.from_potential(P, [1.0, -n + 1.0], 0.0)


@dataclass(frozen=True)
class RatioTableRow:
    n: int
    max_ratio: float
    argmax: int
    range_high: tuple
    range_low: tuple
    ratios: np.ndarray

    def as_dict(self):
        return {
            "n": self.n,
            "max_ratio": self.max_ratio,
            "argmax_target": self.argmax,
            "high_min_target": self.range_high[0],
            "high_max_target": self.range_high[1],
            "low_min_target": self.range_low[0],
            "low_max_target": self.range_low[1],
        }


def _q_for_ratio(model, n, convention):
    if convention == "exact":
        return one_bit_q(model, n)
    if convention != "asymptotic":
        raise ParameterError("q convention must be 'exact' or 'asymptotic'")
    if model.kind == "sbm":
        p = model.rate(n)
        return p * math.exp(-p * n)
    return one_bit_q(model, n)


def ratio_table(n, model, init="worst", q_convention="asymptotic", count="evaluations",
                high=2.5, low=1.5):
    """Ratio of the worst-start OneMax upper bound to the exact profile over ``k = 1..n``.

    ``q_convention="asymptotic"`` replaces ``(1-p)^(n-1)`` by ``exp(-pn)`` in the
    bound's one-bit probability (for standard bit mutation; other models use the
    exact value).  ``count="evaluations"`` divides by expected evaluations (steps
    plus the initial one), ``"steps"`` by expected steps.
    """
    from ftlab.bounds import om_upper_worst_values

    kern = onemax_kernel(n, model)
    init_vec = onemax_uniform_init(n) if init in ("random", "uniform") else _as_init(kern, init)
    if count not in ("evaluations", "steps"):
        raise ParameterError("count must be 'evaluations' or 'steps'")
    exact = fixed_target_profile(kern, init_vec, offset=1.0 if count == "evaluations" else 0.0)
    q = _q_for_ratio(model, n, q_convention)
    ks = np.arange(1, n + 1)
    bound = om_upper_worst_values(q, n)[1:]
    ratios = bound / exact[1:]
    jmax = int(np.argmax(ratios))

    def span(th):
        hit = ks[ratios >= th]
        return (int(hit[0]), int(hit[-1])) if hit.size else (None, None)

    return RatioTableRow(n, float(ratios[jmax]), int(ks[jmax]), span(high), span(low), ratios)


def write_profile_csv(path, profile, n, evaluation_offset=1.0):
    """Profile CSV: ``target,k_relative,exact_expectation,exact_evaluations`` (steps, then evaluations)."""
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target", "k_relative", "exact_expectation", "exact_evaluations"])
        for k, value in enumerate(profile):
            w.writerow([k, repr(k / n), repr(float(value)), repr(float(value) + evaluation_offset)])
