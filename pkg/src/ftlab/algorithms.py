"""The elitist (mu+lambda) EA with fixed-target instrumentation."""

import math
from dataclasses import dataclass, field

import numpy as np

from ftlab import kernel
from ftlab.core import InitModel, MutationModel, ParameterError, flip_count_cdf
from ftlab.problems import MST, LeadingOnes, OneMax

__all__ = ["EaConfig", "FixedTargetTrace", "MstTrace", "EngineSetup", "engine_setup", "run", "run_mst_trace",
           "default_budget"]


def default_budget(n):
    """``ceil(100 e n ln(n + 1))`` evaluations."""
    return int(math.ceil(100.0 * math.e * n * math.log(n + 1)))


@dataclass(frozen=True)
class EaConfig:
    mu: int = 1
    lam: int = 1
    mutation: MutationModel = field(default_factory=MutationModel.sbm)
    init: InitModel = field(default_factory=InitModel.uniform)
    max_evaluations: int = None

    def __post_init__(self):
        if self.mu < 1 or self.lam < 1:
            raise ParameterError("mu and lambda must be at least 1")
        if self.max_evaluations is not None and self.max_evaluations < self.mu:
            raise ParameterError("budget must cover the initial population")

    def budget(self, n):
        return default_budget(n) if self.max_evaluations is None else int(self.max_evaluations)


@dataclass(frozen=True)
class FixedTargetTrace:
    """Strict best-so-far improvements of one run.

    ``values[i]`` was first attained after ``evaluations[i]`` fitness calls.  Values
    are in the problem's own orientation: increasing for maximisation problems,
    decreasing for MST.  ``status`` is ``"optimum"``, ``"target"`` (stopped at a
    requested value) or ``"budget"`` (censored).
    """

    values: tuple
    evaluations: tuple
    status: str
    evaluations_used: int
    maximize: bool = True
    survivor_ids: tuple = None

    @property
    def best(self):
        return self.values[-1]

    def reached(self, k):
        return self.hitting_time(k) is not None

    def hitting_time(self, k):
        """Evaluations until a point at least as good as ``k`` appeared; None if censored."""
        for v, e in zip(self.values, self.evaluations):
            if (v >= k) if self.maximize else (v <= k):
                return e
        return None

    def as_dict(self):
        return dict(zip(self.values, self.evaluations))


@dataclass(frozen=True)
class EngineSetup:
    """Arguments shared by ``run_single``/``run_batch`` for one problem/config pair."""

    code: int
    n: int
    mu: int
    lam: int
    cdf: np.ndarray
    init_mode: int
    init_bits: np.ndarray
    max_evals: int
    extra: dict

    def args(self):
        return (self.code, self.n, self.mu, self.lam, self.cdf, self.init_mode, self.init_bits, self.max_evals)


_INIT_MODES = {"worst": kernel.INIT_WORST, "uniform": kernel.INIT_UNIFORM, "given": kernel.INIT_GIVEN}


def problem_code(problem):
    """Kernel problem code, or None when only the generic engine applies."""
    if isinstance(problem, OneMax):
        return kernel.ONEMAX
    if isinstance(problem, LeadingOnes):
        return kernel.LEADINGONES
    if isinstance(problem, MST):
        return kernel.MST
    return None


def engine_setup(problem, config):
    code = problem_code(problem)
    n = problem.n
    cdf = np.asarray(flip_count_cdf(config.mutation, n))
    bits = None
    if config.init.kind == "given":
        bits = np.asarray(config.init.bits, dtype=np.uint8)
        if bits.size != n:
            raise ParameterError(f"initial bit pattern has length {bits.size}, problem expects {n}")
    extra = {}
    if code == kernel.MST:
        eu, ev, ew = problem.graph.arrays()
        extra = dict(eu=eu, ev=ev, ew=ew, n_vertices=problem.graph.n_vertices, penalty=problem.penalty)
    return EngineSetup(-1 if code is None else code, n, config.mu, config.lam, cdf,
                       _INIT_MODES[config.init.kind], bits, config.budget(n), extra)


def to_engine_value(problem, value):
    """Map a problem-oriented value to the maximised engine scale."""
    return value if problem.maximize else -value


class ProblemEvaluator:
    """Adapter letting the generic engine evaluate an arbitrary problem object."""

    def __init__(self, problem):
        self.problem = problem
        self.sign = 1 if problem.maximize else -1

    def full(self, bits):
        return self.sign * self.problem.evaluate(np.asarray(bits, dtype=np.uint8))

    def child(self, bits, parent_value, flipped):
        if not flipped:
            return parent_value
        return self.full(bits)


def _status(reached, stop_value, optimum_engine):
    if not reached:
        return "budget"
    return "optimum" if stop_value >= optimum_engine else "target"


def run(problem, config, seed, stop_at=None, track_ids=False):
    """One run of the (mu+lambda) EA on ``problem``.

    The run stops at the optimum, at ``stop_at`` (a problem-oriented value) if
    given, or when the evaluation budget is spent.  With ``track_ids`` the generic
    engine is used and the birth evaluation index of each final survivor is kept.
    """
    setup = engine_setup(problem, config)
    optimum = to_engine_value(problem, problem.optimum)
    stop = optimum if stop_at is None else min(optimum, to_engine_value(problem, stop_at))
    ids = None
    if setup.code >= 0 and not track_ids:
        values, counts, used, reached = kernel.run_single(*setup.args(), stop, seed, **setup.extra)
        values = [int(v) for v in values]
        counts = [int(c) for c in counts]
    else:
        values, counts = [], []

        def record(value, evals):
            values.append(value)
            counts.append(evals)
            return value >= stop

        ev = ProblemEvaluator(problem)
        used, reached, ids = kernel.simulate(ev, setup.n, setup.mu, setup.lam, setup.cdf, setup.init_mode,
                                             setup.init_bits, setup.max_evals, seed, record, track_ids=track_ids)
        ids = tuple(ids)
    sign = 1 if problem.maximize else -1
    return FixedTargetTrace(tuple(sign * v for v in values), tuple(counts), _status(reached, stop, optimum),
                            int(used), problem.maximize, ids)


@dataclass(frozen=True)
class MstTrace:
    """First evaluation counts for component targets ``c <= j`` and weight-excess targets ``w - w_opt <= t``."""

    component_hits: dict
    weight_hits: dict
    trace: FixedTargetTrace

    def components_time(self, j):
        return self.component_hits.get(j)

    def weight_time(self, t):
        return self.weight_hits.get(t)


def mst_thresholds(problem, component_targets=(), weight_targets=()):
    """Scalar fitness thresholds (minimisation) for component and weight-excess targets."""
    P = problem.penalty
    comp = {j: j * P - 1 for j in component_targets}
    weight = {t: problem.w_opt + t for t in weight_targets}
    for t in weight_targets:
        if t < 0 or problem.w_opt + t >= P:
            raise ParameterError(f"weight-excess target {t} outside [0, penalty - w_opt)")
    for j in component_targets:
        if not 1 <= j <= problem.graph.n_vertices:
            raise ParameterError(f"component target {j} outside [1, {problem.graph.n_vertices}]")
    return comp, weight


def run_mst_trace(graph, config, seed, component_targets=None, weight_targets=(0,), penalty=None):
    """Run on the MST formulation of ``graph`` and report hits for both target families.

    ``component_targets`` defaults to every ``j`` in ``1..n_vertices``.  The run
    stops once the hardest weight target (or, without weight targets, a single
    component) is reached.
    """
    problem = MST(graph, penalty=penalty)
    if component_targets is None:
        component_targets = range(1, graph.n_vertices + 1)
    comp, weight = mst_thresholds(problem, tuple(component_targets), tuple(weight_targets))
    stop = min(weight.values()) if weight else problem.penalty - 1
    trace = run(problem, config, seed, stop_at=stop)
    return MstTrace({j: trace.hitting_time(v) for j, v in comp.items()},
                    {t: trace.hitting_time(v) for t, v in weight.items()}, trace)
