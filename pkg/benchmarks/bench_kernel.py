"""Time the compiled and pure-Python simulation engines on identical workloads.

    python benchmarks/bench_kernel.py [--runs 200] [--repeat 3]

Both backends receive the same seeds; the script also checks that they return
identical hitting times.
"""

import argparse
import time

import numpy as np

from ftlab import kernel
from ftlab.algorithms import EaConfig, engine_setup, to_engine_value
from ftlab.core import InitModel, MutationModel
from ftlab.problems import LeadingOnes, OneMax
from ftlab.rng import run_seeds

WORKLOADS = [
    ("onemax n=100 (1+1) sbm", OneMax(100), EaConfig(init=InitModel.worst())),
    ("onemax n=100 (1+1) fast", OneMax(100), EaConfig(mutation=MutationModel.fast(1.5), init=InitModel.worst())),
    ("onemax n=100 (4+2) sbm", OneMax(100), EaConfig(4, 2, init=InitModel.worst())),
    ("leadingones n=50 (1+1) rls", LeadingOnes(50), EaConfig(mutation=MutationModel.rls())),
]


def time_backend(module, setup, seeds, targets, repeat):
    best, hits = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        hits = module.run_batch(*setup.args(), seeds, targets, **setup.extra)
        best = min(best, time.perf_counter() - t0)
    return best, hits


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = kernel.backends()
    if "cython" not in backends:
        print("compiled backend not available; timing the Python engine only")
    seeds = np.asarray(run_seeds(1, args.runs), dtype=np.uint64)
    print(f"{'workload':32s} {'backend':8s} {'seconds':>9s} {'runs/s':>10s} {'speedup':>8s}")
    for label, problem, algo in WORKLOADS:
        setup = engine_setup(problem, algo)
        targets = np.asarray([to_engine_value(problem, problem.n)], dtype=np.int64)
        results = {name: time_backend(mod, setup, seeds, targets, args.repeat) for name, mod in backends.items()}
        base = results["python"][0]
        for name, (secs, _) in results.items():
            print(f"{label:32s} {name:8s} {secs:9.4f} {args.runs / secs:10.1f} {base / secs:7.1f}x")
        if len(results) > 1 and not np.array_equal(results["python"][1], results["cython"][1]):
            raise SystemExit(f"backends disagree on {label}")


if __name__ == "__main__":
    main()
