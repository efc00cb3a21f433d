"""Monte Carlo runtime profiles: seeded replications, censoring and aggregation."""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ftlab import kernel
from ftlab.algorithms import EaConfig, engine_setup, run, to_engine_value
from ftlab.bounds import ASYMPTOTIC
from ftlab.core import ParameterError
from ftlab.io_utils import atomic_writer
from ftlab.problems import make_problem
from ftlab.rng import run_seeds

__all__ = ["ExperimentConfig", "Moments", "RuntimeProfile", "ComparisonReport", "run_experiment",
           "compare_profiles", "worker_count", "CHUNK"]

CHUNK = 1000
PROFILE_COLUMNS = ["target", "hits", "runs", "mean_evals", "stderr", "min", "max", "hit_fraction"]
COMPARISON_COLUMNS = ["target", "reference", "bound_name", "bound_value", "ratio", "status", "k_relative"]


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``targets`` is ``"all"`` (every value ``1..n`` for OneMax and LeadingOnes) or a
    list of problem-oriented fitness thresholds.  ``budget`` overrides the
    algorithm's evaluation limit.
    """

    problem: str
    n: int = None
    algorithm: EaConfig = field(default_factory=EaConfig)
    runs: int = 1000
    seed: int = 0
    targets: object = "all"
    budget: int = None
    graph: object = None
    penalty: int = None

    def __post_init__(self):
        if self.runs < 1:
            raise ParameterError("runs must be at least 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ParameterError("seed must fit in 64 bits")
        if self.budget is not None and self.budget < 1:
            raise ParameterError("budget must be positive")

    def build_problem(self):
        return make_problem(self.problem, self.n, self.graph, self.penalty)

    def effective_algorithm(self):
        if self.budget is None:
            return self.algorithm
        return replace(self.algorithm, max_evaluations=int(self.budget))

    def target_values(self, problem):
        """Targets in problem orientation, easiest first."""
        if isinstance(self.targets, str):
            if self.targets != "all":
                raise ParameterError(f"targets must be 'all' or a list, got {self.targets!r}")
            if problem.__class__.__name__ not in ("OneMax", "LeadingOnes"):
                raise ParameterError(f"'all' targets are only defined for onemax and leadingones, not {self.problem}")
            return list(range(1, problem.n + 1))
        vals = sorted({int(t) for t in self.targets}, reverse=not problem.maximize)
        if not vals:
            raise ParameterError("target list is empty")
        return vals


@dataclass
class Moments:
    """Count, mean, centred second moment and range; merged with the pairwise update."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    lo: float = math.inf
    hi: float = -math.inf

    @classmethod
    def of(cls, xs):
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            return cls()
        mean = float(xs.mean())
        return cls(int(xs.size), mean, float(((xs - mean) ** 2).sum()), float(xs.min()), float(xs.max()))

    def merge(self, other):
        if other.count == 0:
            return Moments(self.count, self.mean, self.m2, self.lo, self.hi)
        if self.count == 0:
            return Moments(other.count, other.mean, other.m2, other.lo, other.hi)
        n = self.count + other.count
        d = other.mean - self.mean
        mean = self.mean + d * other.count / n
        m2 = self.m2 + other.m2 + d * d * self.count * other.count / n
        return Moments(n, mean, m2, min(self.lo, other.lo), max(self.hi, other.hi))

    @property
    def variance(self):
        return self.m2 / (self.count - 1) if self.count >= 2 else math.nan

    @property
    def stderr(self):
        return math.sqrt(self.variance / self.count) if self.count >= 2 else math.nan


@dataclass(frozen=True)
class RuntimeProfile:
    """Per-target first-hitting statistics in evaluations.

    ``mean`` and ``stderr`` are None for targets hit by fewer than two runs.  When
    ``hit_fraction < 1`` the mean is conditional on hitting (``conditional``).
    """

    targets: tuple
    runs: int
    hits: tuple
    mean: tuple
    stderr: tuple
    min: tuple
    max: tuple
    n: int = None

    @property
    def hit_fraction(self):
        return tuple(h / self.runs for h in self.hits)

    @property
    def conditional(self):
        return tuple(h < self.runs for h in self.hits)

    def index(self, target):
        return self.targets.index(target)

    def rows(self):
        for i, t in enumerate(self.targets):
            yield {"target": t, "hits": self.hits[i], "runs": self.runs, "mean_evals": self.mean[i],
                   "stderr": self.stderr[i], "min": self.min[i], "max": self.max[i],
                   "hit_fraction": self.hits[i] / self.runs}

    def write_csv(self, path):
        with atomic_writer(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PROFILE_COLUMNS)
            for row in self.rows():
                w.writerow(["" if row[c] is None else _fmt(row[c]) for c in PROFILE_COLUMNS])


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def worker_count(requested=None):
    """Thread count: ``requested``, capped by ``FT_LAB_THREADS`` when set."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("FT_LAB_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ParameterError(f"FT_LAB_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def _chunk_hits(problem, algo, setup, engine_targets, seeds):
    if setup.code >= 0:
        return kernel.run_batch(*setup.args(), np.asarray(seeds, dtype=np.uint64),
                                np.asarray(engine_targets, dtype=np.int64), **setup.extra)
    top = engine_targets[-1] * (1 if problem.maximize else -1)
    out = np.full((len(seeds), len(engine_targets)), -1, dtype=np.int64)
    for r, seed in enumerate(seeds):
        trace = run(problem, algo, seed, stop_at=top)
        for j, t in enumerate(engine_targets):
            h = trace.hitting_time(t if problem.maximize else -t)
            if h is not None:
                out[r, j] = h
    return out


def _chunk_moments(hits):
    return [Moments.of(col[col >= 0]) for col in hits.T]


def run_experiment(config, threads=None):
    """Run ``config.runs`` replications with seeds ``mix(seed, i)`` and aggregate per target.

    Replications are processed in fixed chunks; chunk statistics are merged in
    chunk order, so the profile does not depend on the thread count.
    """
    problem = config.build_problem()
    algo = config.effective_algorithm()
    setup = engine_setup(problem, algo)
    targets = config.target_values(problem)
    engine_targets = [to_engine_value(problem, t) for t in targets]
    starts = list(range(0, config.runs, CHUNK))

    def job(start):
        seeds = run_seeds(config.seed, min(CHUNK, config.runs - start), start)
        return _chunk_moments(_chunk_hits(problem, algo, setup, engine_targets, seeds))

    workers = min(worker_count(threads), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, starts))
    else:
        parts = [job(s) for s in starts]
    total = [Moments() for _ in targets]
    for part in parts:
        total = [a.merge(b) for a, b in zip(total, part)]
    enough = [m.count >= 2 for m in total]
    return RuntimeProfile(
        targets=tuple(targets),
        runs=config.runs,
        hits=tuple(m.count for m in total),
        mean=tuple(m.mean if ok else None for m, ok in zip(total, enough)),
        stderr=tuple(m.stderr if ok else None for m, ok in zip(total, enough)),
        min=tuple(int(m.lo) if m.count else None for m in total),
        max=tuple(int(m.hi) if m.count else None for m in total),
        n=getattr(problem, "n", None),
    )


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple

    @property
    def violations(self):
        return [r for r in self.rows if r["status"] == "violated"]

    def series(self, bound_name):
        return [(r["target"], r["bound_value"]) for r in self.rows if r["bound_name"] == bound_name]

    def write_csv(self, path):
        with atomic_writer(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COMPARISON_COLUMNS)
            for r in self.rows:
                w.writerow(["" if r[c] is None else _fmt(r[c]) for c in COMPARISON_COLUMNS])


def _reference_map(reference):
    if isinstance(reference, RuntimeProfile):
        return {t: (m, s) for t, m, s in zip(reference.targets, reference.mean, reference.stderr)}, reference.n
    if isinstance(reference, dict):
        return {int(k): (float(v), None) for k, v in reference.items()}, None
    raise ParameterError("reference must be a RuntimeProfile or a target -> value mapping")


def compare_profiles(reference, bounds, n=None, slack=0.05, offset=0.0, se_factor=3.0):
    """Tabulate each bound against the reference value at its target.

    ``reference`` is a :class:`RuntimeProfile` or a mapping ``target -> exact
    value``; ``offset`` is added to every bound before comparison (for example 1
    to turn step counts into evaluations).  Bounds with asymptotic status get the
    relative ``slack``; simulated references additionally get ``se_factor``
    standard errors.  Bounds outside their preconditions are reported, not judged.
    """
    ref, ref_n = _reference_map(reference)
    n = n if n is not None else ref_n
    missing = sorted({b.k for b in bounds if b.k not in ref})
    if missing:
        raise ParameterError(f"bound targets {missing[:5]} are not on the reference grid")
    rows = []
    for b in bounds:
        value, se = ref[b.k]
        bound_value = None if not math.isfinite(b.value) else float(b.value) + offset
        row = {"target": b.k, "reference": value, "bound_name": b.name, "bound_value": bound_value,
               "ratio": None, "status": b.status if not b.usable else "ok",
               "k_relative": None if not n else b.k / n}
        if value is None or bound_value is None:
            row["status"] = "skipped" if b.usable else b.status
            rows.append(row)
            continue
        row["ratio"] = bound_value / value if value else None
        if not b.usable:
            rows.append(row)
            continue
        tol = (slack if b.status == ASYMPTOTIC else 0.0) * abs(value) + (se_factor * se if se else 0.0)
        tol += 1e-9 * abs(value)
        if b.kind == "upper" and bound_value < value - tol:
            row["status"] = "violated"
        elif b.kind == "lower" and bound_value > value + tol:
            row["status"] = "violated"
        elif b.kind == "exact" and abs(bound_value - value) > tol:
            row["status"] = "violated"
        rows.append(row)
    return ComparisonReport(tuple(rows))
