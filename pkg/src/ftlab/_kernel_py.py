"""Pure-Python simulation engine; the fallback backend for :mod:`ftlab.kernel`.

The random-draw protocol below is shared with ``_kernel.pyx`` so both backends
produce identical traces for identical seeds:

* initialization: individual by individual, ``next_u64() >> 63`` per bit for
  uniform initialization, no draws for worst/given starts;
* per offspring: parent index ``bounded(mu)`` (skipped when ``mu == 1``), flip
  count by inverse transform of one ``random()`` draw, then ``ell`` partial
  Fisher-Yates steps ``bounded(n - t)`` on a permutation reused for the whole run;
* survival: when ``mu + lambda > 2`` one ``next_u64()`` tie-break key per
  individual, parents first; ranking by fitness, then offspring before parents,
  then larger key.  For ``mu = lambda = 1`` the offspring replaces the parent iff
  it is at least as good.

Fitness values are integers oriented for maximisation.  For MST the engine
maximises ``-((c - 1) * penalty + w)``.
"""

from bisect import bisect_right

import numpy as np

from ftlab.rng import Xoshiro256

ONEMAX = 0
LEADINGONES = 1
MST = 2

INIT_WORST = 0
INIT_UNIFORM = 1
INIT_GIVEN = 2

BACKEND = "python"


class CodedEvaluator:
    """Fitness for the problem codes understood by both backends."""

    def __init__(self, code, n, eu=None, ev=None, ew=None, n_vertices=0, penalty=0):
        self.code = code
        self.n = n
        if code == MST:
            self.edges = list(zip((int(a) for a in eu), (int(b) for b in ev), (int(c) for c in ew)))
            self.n_vertices = int(n_vertices)
            self.penalty = int(penalty)

    def full(self, bits):
        code = self.code
        if code == ONEMAX:
            return sum(bits)
        if code == LEADINGONES:
            i = 0
            n = self.n
            while i < n and bits[i]:
                i += 1
            return i
        parent = list(range(self.n_vertices))
        comps = self.n_vertices
        weight = 0
        for (u, v, w), b in zip(self.edges, bits):
            if b:
                weight += w
                while parent[u] != u:
                    parent[u] = parent[parent[u]]
                    u = parent[u]
                while parent[v] != v:
                    parent[v] = parent[parent[v]]
                    v = parent[v]
                if u != v:
                    parent[u] = v
                    comps -= 1
        return -((comps - 1) * self.penalty + weight)

    def child(self, bits, parent_value, flipped):
        code = self.code
        if code == ONEMAX:
            value = parent_value
            for pos in flipped:
                value += 1 if bits[pos] else -1
            return value
        if code == LEADINGONES:
            if not flipped:
                return parent_value
            lo = parent_value
            lowest = min(flipped)
            if lowest < lo:
                return lowest
            n = self.n
            if lo < n and bits[lo]:
                while lo < n and bits[lo]:
                    lo += 1
            return lo
        if not flipped:
            return parent_value
        return self.full(bits)


def simulate(evaluator, n, mu, lam, cdf, init_mode, init_bits, max_evals, seed, record, track_ids=False):
    """One run of the (mu+lambda) EA.

    ``record(value, evals)`` is called whenever the best-so-far value strictly
    improves (and for the first evaluation); returning True stops the run.
    Returns ``(evaluations_used, stopped_by_record, ids)`` where ``ids`` holds the
    birth evaluation index of each survivor when ``track_ids`` is set.
    """
    rng = Xoshiro256(seed)
    cdf = list(cdf)
    perm = list(range(n))
    pop, fit, ids = [], [], []
    best = None
    evals = 0
    for _ in range(mu):
        if evals >= max_evals:
            return evals, False, ids
        if init_mode == INIT_UNIFORM:
            bits = [rng.next_u64() >> 63 for _ in range(n)]
        elif init_mode == INIT_WORST:
            bits = [0] * n
        else:
            bits = [int(b) for b in init_bits]
        value = evaluator.full(bits)
        evals += 1
        pop.append(bits)
        fit.append(value)
        ids.append(evals)
        if best is None or value > best:
            best = value
            if record(value, evals):
                return evals, True, ids
    pair = mu == 1 and lam == 1
    while evals < max_evals:
        off, offfit, offids = [], [], []
        for _ in range(lam):
            if evals >= max_evals:
                break
            j = rng.bounded(mu) if mu > 1 else 0
            ell = bisect_right(cdf, rng.random())
            child = pop[j][:]
            flipped = []
            for t in range(ell):
                r = t + rng.bounded(n - t)
                perm[t], perm[r] = perm[r], perm[t]
                pos = perm[t]
                child[pos] ^= 1
                flipped.append(pos)
            value = evaluator.child(child, fit[j], flipped)
            evals += 1
            off.append(child)
            offfit.append(value)
            offids.append(evals)
            if value > best:
                best = value
                if record(value, evals):
                    return evals, True, ids
        if len(off) < lam:
            break
        if pair:
            if offfit[0] >= fit[0]:
                pop[0], fit[0], ids[0] = off[0], offfit[0], offids[0]
            continue
        allpop = pop + off
        allfit = fit + offfit
        allids = ids + offids
        keys = [rng.next_u64() for _ in range(len(allpop))]
        order = sorted(range(len(allpop)), key=lambda i: (-allfit[i], -(i >= mu), -keys[i], i))[:mu]
        pop = [allpop[i] for i in order]
        fit = [allfit[i] for i in order]
        ids = [allids[i] for i in order]
    return evals, False, ids


def _evaluator(code, n, eu, ev, ew, n_vertices, penalty):
    return CodedEvaluator(code, n, eu, ev, ew, n_vertices, penalty)


def run_single(code, n, mu, lam, cdf, init_mode, init_bits, max_evals, stop_value, seed,
               eu=None, ev=None, ew=None, n_vertices=0, penalty=0):
    """Trace of best-so-far improvements as ``(values, evals, used, reached)``."""
    values, counts = [], []

    def record(value, evals):
        values.append(value)
        counts.append(evals)
        return value >= stop_value

    ev_ = _evaluator(code, n, eu, ev, ew, n_vertices, penalty)
    used, reached, _ = simulate(ev_, n, mu, lam, cdf, init_mode, init_bits, max_evals, seed, record)
    return np.array(values, dtype=np.int64), np.array(counts, dtype=np.int64), used, reached


def run_batch(code, n, mu, lam, cdf, init_mode, init_bits, max_evals, seeds, targets,
              eu=None, ev=None, ew=None, n_vertices=0, penalty=0):
    """First-hitting evaluation counts, shape ``(len(seeds), len(targets))``; ``-1`` if censored.

    ``targets`` must be ascending; a run stops once the last target is hit.
    """
    targets = [int(t) for t in targets]
    n_t = len(targets)
    hits = np.full((len(seeds), n_t), -1, dtype=np.int64)
    ev_ = _evaluator(code, n, eu, ev, ew, n_vertices, penalty)
    for r, seed in enumerate(seeds):
        row = hits[r]
        state = [0]

        def record(value, evals, row=row, state=state):
            idx = state[0]
            while idx < n_t and value >= targets[idx]:
                row[idx] = evals
                idx += 1
            state[0] = idx
            return idx == n_t

        simulate(ev_, n, mu, lam, cdf, init_mode, init_bits, max_evals, int(seed), record)
    return hits
