"""Command-line entry point: ``ftlab <subcommand> [flags]``.

Subcommands: simulate, exact, bounds, compare, verify-drift, table2.  Settings
come from defaults, then an optional ``--config`` file, then flags.
"""

import argparse
import csv
import dataclasses
import difflib
import io
import json
import os
import sys
import traceback
from dataclasses import dataclass

from ftlab import bounds as B
from ftlab.algorithms import EaConfig
from ftlab.core import InitModel, MutationModel, ParameterError, one_bit_q
from ftlab.exact_markov import (fixed_target_profile, leadingones_kernel, leadingones_uniform_init, onemax_kernel,
                                onemax_uniform_init, overshoot_example_chain, point_init, ratio_table,
                                write_profile_csv)
from ftlab.harness import ExperimentConfig, compare_profiles, run_experiment
from ftlab.io_utils import atomic_writer
from ftlab.levels_drift import kernel_to_dense, verify_drift_on_chain, write_report_json
from ftlab.problems import InputError, read_edge_list

__all__ = ["Settings", "ConfigError", "parse_settings", "load_settings", "load_config", "serialize", "main"]

MODELS = ("rls", "sbm", "shift", "resample", "fast")
INITS = ("worst", "random", "uniform")
PROBLEMS = ("onemax", "leadingones", "binval", "mst")


class ConfigError(ParameterError):
    """Configuration problem, optionally tied to a line and column."""

    def __init__(self, message, line=None, col=None, source=None):
        self.line, self.col, self.source = line, col, source
        where = ""
        if line is not None:
            where = f"{source or '<config>'}:{line}:{col}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class Settings:
    """Flat, serializable experiment settings; every field has a default.

    ``problem`` and ``n`` are required (``n`` may be omitted for ``mst`` with a
    graph).  ``p`` overrides ``p_over_n``; both empty means ``1/n``.
    """

    problem: str = None
    n: int = None
    k: int = None
    targets: str = "all"
    model: str = "sbm"
    p: float = None
    p_over_n: float = None
    beta: float = 1.5
    flips: int = 1
    shift_to: int = 1
    mu: int = 1
    lam: int = 1
    init: str = "worst"
    runs: int = 1000
    seed: int = 0
    budget: int = None
    graph: str = None
    penalty: int = None

    def missing(self):
        out = []
        if self.problem is None:
            out.append("problem")
        if self.n is None and not (self.problem == "mst" and self.graph):
            out.append("n")
        return out

    def validate(self):
        miss = self.missing()
        if miss:
            raise ConfigError(f"missing required fields: {', '.join(miss)}")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; expected one of {', '.join(PROBLEMS)}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {', '.join(MODELS)}")
        if self.init not in INITS:
            raise ConfigError(f"unknown init {self.init!r}; expected worst or random")
        if self.problem == "mst" and not self.graph:
            raise ConfigError("problem 'mst' needs a graph file")
        if self.n is not None and self.n < 1:
            raise ConfigError("n must be positive")
        return self

    def rate(self):
        if self.p is not None:
            return self.p
        if self.p_over_n is not None:
            return self.p_over_n / self.n
        return None

    def mutation(self):
        if self.model == "rls":
            return MutationModel.rls(self.flips)
        if self.model == "fast":
            return MutationModel.fast(self.beta)
        if self.model == "shift":
            return MutationModel.shift(self.rate(), self.shift_to)
        return MutationModel(self.model, p=self.rate())

    def init_model(self):
        return InitModel.worst() if self.init == "worst" else InitModel.uniform()

    def ea_config(self):
        return EaConfig(self.mu, self.lam, self.mutation(), self.init_model(), self.budget)

    def target_list(self):
        if self.k is not None:
            return [self.k]
        if self.targets == "all":
            return "all"
        return [int(t) for t in str(self.targets).split(",") if t.strip()]

    def to_experiment(self):
        self.validate()
        graph = read_edge_list(self.graph) if self.graph else None
        return ExperimentConfig(self.problem, self.n if self.problem != "mst" else graph.m, self.ea_config(),
                                self.runs, self.seed, self.target_list(), self.budget, graph, self.penalty)


FIELDS = {f.name: f for f in dataclasses.fields(Settings)}
ALIASES = {"lambda": "lam", "p-over-n": "p_over_n", "shift-to": "shift_to"}
_INT = {"n", "k", "flips", "shift_to", "mu", "lam", "runs", "seed", "budget", "penalty"}
_FLOAT = {"p", "p_over_n", "beta"}


def _convert(key, raw, line=None, col=None, source=None):
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none", "null")):
        return None
    try:
        if key in _INT:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            return int(raw)
        if key in _FLOAT:
            return float(raw)
        if key == "targets" and isinstance(raw, list):
            return ",".join(str(int(t)) for t in raw)
        return str(raw).strip().lower() if key in ("problem", "model", "init", "targets") else str(raw).strip()
    except (TypeError, ValueError):
        kind = "an integer" if key in _INT else "a number"
        raise ConfigError(f"value {raw!r} for {key!r} is not {kind}", line, col, source) from None


def _canonical(key, line, col, source):
    key = ALIASES.get(key, key)
    if key in FIELDS:
        return key
    names = sorted(set(FIELDS) | set(ALIASES))
    close = difflib.get_close_matches(key, names, n=1, cutoff=0.4)
    hint = f"; did you mean {ALIASES.get(close[0], close[0])!r}?" if close else ""
    raise ConfigError(f"unknown key {key!r}{hint}", line, col, source)


def _locate(text, needle):
    pos = text.find(needle)
    if pos < 0:
        return None, None
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _parse_json(text, source):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno, exc.colno, source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", 1, 1, source)
    values = {}
    for key, raw in data.items():
        line, col = _locate(text, json.dumps(key))
        name = _canonical(key, line, col, source)
        values[name] = _convert(name, raw, line, col, source)
    return values


def _parse_kv(text, source):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            col = len(body) - len(body.lstrip()) + 1
            raise ConfigError("expected 'key = value'", lineno, col, source)
        key, raw = body.split("=", 1)
        kcol = len(key) - len(key.lstrip()) + 1
        name = _canonical(key.strip(), lineno, kcol, source)
        vcol = len(body) - len(raw) + (len(raw) - len(raw.lstrip())) + 1
        if name in values:
            raise ConfigError(f"duplicate key {name!r}", lineno, kcol, source)
        values[name] = _convert(name, raw, lineno, vcol, source)
    return values


def parse_settings(text, source=None, base=None):
    """Parse key=value lines (``#`` comments) or a JSON object into :class:`Settings`."""
    values = _parse_json(text, source) if text.lstrip().startswith("{") else _parse_kv(text, source)
    return dataclasses.replace(base or Settings(), **values)


def load_settings(path):
    with open(path) as fh:
        return parse_settings(fh.read(), source=str(path))


def load_config(path):
    """Read a config file into an :class:`~ftlab.harness.ExperimentConfig`."""
    return load_settings(path).to_experiment()


def serialize(settings):
    """key=value text that :func:`parse_settings` maps back to ``settings``."""
    lines = []
    for name in FIELDS:
        value = getattr(settings, name)
        lines.append(f"{name} = {'none' if value is None else (repr(value) if isinstance(value, float) else value)}")
    return "\n".join(lines) + "\n"


# argument handling

def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value or JSON settings file")
    common.add_argument("--problem", choices=PROBLEMS)
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int, help="single target fitness")
    common.add_argument("--targets", help="comma-separated targets or 'all'")
    common.add_argument("--model", choices=MODELS)
    common.add_argument("--p", type=float, help="per-bit mutation rate")
    common.add_argument("--p-over-n", dest="p_over_n", type=float, help="mutation rate as c with p = c/n")
    common.add_argument("--beta", type=float, help="heavy-tail exponent of fast mutation")
    common.add_argument("--flips", type=int)
    common.add_argument("--shift-to", dest="shift_to", type=int)
    common.add_argument("--mu", type=int)
    common.add_argument("--lambda", dest="lam", type=int)
    common.add_argument("--init", choices=INITS)
    common.add_argument("--runs", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--graph", help="edge-list file for mst")
    common.add_argument("--penalty", type=int)
    common.add_argument("--out", help="output directory")
    parser = argparse.ArgumentParser(prog="ftlab", description="Fixed-target runtime laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo runtime profile")
    sub.add_parser("exact", parents=[common], help="exact expected fixed-target times")
    sub.add_parser("bounds", parents=[common], help="theorem bounds")
    cmp_ = sub.add_parser("compare", parents=[common], help="exact or simulated profile against bounds")
    cmp_.add_argument("--reference", choices=("exact", "simulated"), default="exact")
    vd = sub.add_parser("verify-drift", parents=[common], help="drift bounds against exact chains")
    vd.add_argument("--chain", choices=("overshoot", "onemax", "leadingones"), default=None)
    sub.add_parser("table2", parents=[common], help="upper-bound to exact ratio statistics")
    return parser


def _settings(args):
    base = load_settings(args.config) if args.config else Settings()
    overrides = {name: getattr(args, name) for name in FIELDS if getattr(args, name, None) is not None}
    return dataclasses.replace(base, **overrides)


class _Out:
    """Writes named artifacts to ``--out`` (atomically) and echoes a text report."""

    def __init__(self, directory, stream):
        self.dir = directory
        self.stream = stream
        if directory:
            os.makedirs(directory, exist_ok=True)

    def path(self, name):
        return os.path.join(self.dir, name) if self.dir else None

    def csv_rows(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        if self.dir:
            with atomic_writer(self.path(name)) as fh:
                fh.write(buf.getvalue())
        return buf.getvalue()

    def say(self, text=""):
        print(text, file=self.stream)

    def report(self, lines):
        text = "\n".join(lines) + "\n"
        self.stream.write(text)
        if self.dir:
            with atomic_writer(self.path("report.txt")) as fh:
                fh.write(text)


def _num(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _need_bits(s, what):
    s.validate()
    if s.problem not in ("onemax", "leadingones"):
        raise ConfigError(f"{what} supports onemax and leadingones, not {s.problem}")


def _exact_profile(s, init=None):
    model = s.mutation()
    model.check(s.n)
    init = init or s.init
    if s.lam != 1 or s.mu != 1:
        raise ConfigError("exact profiles are available for mu = lambda = 1 only")
    if s.problem == "onemax":
        kern = onemax_kernel(s.n, model)
        start = point_init(s.n + 1, 0) if init == "worst" else onemax_uniform_init(s.n)
    else:
        kern = leadingones_kernel(s.n, model)
        start = point_init(s.n + 1, 0) if init == "worst" else leadingones_uniform_init(s.n)
    return fixed_target_profile(kern, start)


def _targets(s):
    if s.k is not None:
        if not 1 <= s.k <= s.n:
            raise ConfigError(f"target k={s.k} outside [1, {s.n}]")
        return [s.k]
    t = s.target_list()
    return list(range(1, s.n + 1)) if t == "all" else t


def cmd_exact(s, out):
    _need_bits(s, "exact")
    prof = _exact_profile(s)
    if out.dir:
        write_profile_csv(out.path("exact.csv"), prof, s.n)
    lines = [f"exact {s.problem} n={s.n} model={s.mutation().label()} init={s.init}",
             "target,exact_expectation,exact_evaluations"]
    lines += [f"{k},{_num(float(prof[k]))},{_num(float(prof[k]) + 1.0)}" for k in _targets(s)]
    out.report(lines)
    return 0


def _bound_list(s, ks):
    n = s.n
    model = s.mutation()
    model.check(n)
    res = []
    if s.problem == "leadingones":
        for k in ks:
            res.append(B.lo_exact(model, n, k))
            if s.mu > 1:
                res.append(B.lo_mu1_upper(s.mu, n, k))
        return res
    q = one_bit_q(model, n)
    standard = model.kind == "sbm" and (model.p is None or abs(model.p * n - 1.0) < 1e-12)
    rate = model.rate(n) if model.kind in ("sbm", "shift", "resample") else None
    for k in ks:
        res.append(B.om_upper_worst(q, n, k))
        res.append(B.om_upper_random(q, n, k))
        if rate is not None:
            res.append(B.om_lower_levels(rate, n, k))
        if standard:
            res.append(B.om_lower_lengler(n, k))
            res.append(B.om_lower_drift(n, k))
        if model.kind == "resample":
            res.append(B.om_upper_random_resample(rate, n, k))
            res.append(B.om_lower_resample_near(rate, n, k))
            res.append(B.om_lower_resample_far(rate, n, k))
        if s.mu > 1 and rate is not None:
            res.append(B.om_mu1_upper(s.mu, rate, n, k))
    return res


_RANDOM_START = {"om_upper_random", "om_lower_drift", "om_upper_random_resample", "om_lower_resample_near",
                 "om_lower_resample_far", "lo_exact", "lo_mu1_upper"}


def cmd_bounds(s, out):
    _need_bits(s, "bounds")
    res = _bound_list(s, _targets(s))
    header = ["bound_name", "n", "k", "value", "kind", "status"]
    rows = [[r.name, r.n, r.k, _num(float(r.value)), r.kind, r.status] for r in res]
    if out.dir:
        B.write_bounds_csv(out.path("bounds.csv"), res)
    out.report([",".join(header)] + [",".join(str(c) for c in row) for row in rows])
    return 0


def cmd_simulate(s, out):
    cfg = s.to_experiment()
    if cfg.targets == "all" and s.problem not in ("onemax", "leadingones"):
        raise ConfigError("give --k or --targets for this problem")
    prof = run_experiment(cfg)
    if out.dir:
        prof.write_csv(out.path("profile.csv"))
    lines = [f"simulate {s.problem} runs={cfg.runs} seed={cfg.seed} model={s.mutation().label()} init={s.init}",
             "target,hits,runs,mean_evals,stderr,min,max,hit_fraction"]
    for row in prof.rows():
        lines.append(",".join(_num(row[c]) for c in ("target", "hits", "runs", "mean_evals", "stderr", "min", "max",
                                                      "hit_fraction")))
    if any(prof.conditional):
        lines.append("note: some targets were censored; their means are conditional on hitting")
    out.report(lines)
    return 0


def cmd_compare(s, out, reference):
    """Bounds against the exact (steps) or simulated (evaluations) profile.

    Reference curves are emitted as series ``ea_zero`` and ``ea_rand``.
    """
    _need_bits(s, "compare")
    ks = _targets(s)
    res = _bound_list(s, ks)
    worst = _exact_profile(s, "worst")
    rand = _exact_profile(s, "random")
    offset = 0.0
    if reference == "simulated":
        prof = {}
        for init in ("worst", "random"):
            p = run_experiment(dataclasses.replace(s, init=init, k=None, targets=",".join(map(str, ks)))
                               .to_experiment())
            prof[init] = p
        refs = {"worst": prof["worst"], "random": prof["random"]}
        series = {"ea_zero": prof["worst"].mean, "ea_rand": prof["random"].mean}
        offset = 1.0
    else:
        refs = {"worst": {k: float(worst[k]) for k in ks}, "random": {k: float(rand[k]) for k in ks}}
        series = {"ea_zero": [float(worst[k]) for k in ks], "ea_rand": [float(rand[k]) for k in ks]}
    rows = []
    for init in ("worst", "random"):
        pick = [b for b in res if (b.name in _RANDOM_START) == (init == "random")]
        if pick:
            rows.extend(compare_profiles(refs[init], pick, n=s.n, offset=offset).rows)
    for name, vals in series.items():
        for k, v in zip(ks, vals):
            rows.append({"target": k, "reference": v, "bound_name": name, "bound_value": v, "ratio": 1.0,
                         "status": "reference", "k_relative": k / s.n})
    header = ["target", "reference", "bound_name", "bound_value", "ratio", "status", "k_relative"]
    text = out.csv_rows("comparison.csv", header, [[_num(r[c]) for c in header] for r in rows])
    bad = [r for r in rows if r["status"] == "violated"]
    lines = [f"compare {s.problem} n={s.n} model={s.mutation().label()} reference={reference}",
             f"rows={len(rows)} violations={len(bad)}"]
    for r in bad[:10]:
        lines.append(f"  violated: {r['bound_name']} at k={r['target']}: {r['bound_value']} vs {r['reference']}")
    if not out.dir:
        lines.append(text.rstrip("\n"))
    out.report(lines)
    return 0


def cmd_verify_drift(s, out, chain):
    chain = chain or s.problem or "overshoot"
    if chain == "overshoot":
        if s.n is None:
            raise ConfigError("missing required fields: n")
        ch = overshoot_example_chain(s.n)
        report = verify_drift_on_chain(ch, ch.values, 0.0, 0)
        desc = f"overshoot chain n={s.n}"
    elif chain in ("onemax", "leadingones"):
        if s.n is None:
            raise ConfigError("missing required fields: n")
        model = s.mutation()
        model.check(s.n)
        k = s.n if s.k is None else s.k
        kern = onemax_kernel(s.n, model) if chain == "onemax" else leadingones_kernel(s.n, model)
        ch = kernel_to_dense(kern, k)
        report = verify_drift_on_chain(ch, ch.values, s.n - k, 0)
        desc = f"{chain} chain n={s.n} k={k} model={model.label()}"
    else:
        raise ConfigError(f"no drift chain for {chain!r}")
    if out.dir:
        write_report_json(out.path("drift_report.json"), report)
    lines = [f"verify-drift {desc}", f"exact={report['exact']!r} x0={report['x0']!r} e_xt={report['e_xt']!r}"]
    for name, e in report["theorems"].items():
        b = "" if e["bound"] is None else repr(e["bound"])
        lines.append(f"{name}: {e['status']} bound={b} {e['note']}".rstrip())
    out.report(lines)
    failed = [n for n, e in report["theorems"].items() if e["status"] == "fail"]
    if failed:
        print(f"error: drift bounds failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_table2(s, out):
    if s.n is None:
        raise ConfigError("missing required fields: n")
    model = s.mutation()
    model.check(s.n)
    init = "worst" if s.init == "worst" else "random"
    row = ratio_table(s.n, model, init=init)
    d = row.as_dict()
    header = list(d)
    text = out.csv_rows("table2.csv", header, [[_num(d[h]) for h in header]])
    out.report([text.rstrip("\n")])
    return 0


def main(argv=None, stdout=None):
    """Run the CLI; returns 0 on success, 1 on validation errors, 2 on internal errors."""
    stdout = stdout or sys.stdout
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        s = _settings(args)
        out = _Out(args.out, stdout)
        cmd = args.command
        if cmd == "exact":
            return cmd_exact(s, out)
        if cmd == "bounds":
            return cmd_bounds(s, out)
        if cmd == "simulate":
            return cmd_simulate(s, out)
        if cmd == "compare":
            return cmd_compare(s, out, args.reference)
        if cmd == "verify-drift":
            return cmd_verify_drift(s, out, args.chain)
        if cmd == "table2":
            return cmd_table2(s, out)
        raise AssertionError(cmd)
    except (ParameterError, InputError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        traceback.print_exc(file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
