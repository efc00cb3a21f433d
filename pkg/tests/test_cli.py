import csv
import io
import json
import math

import pytest

from ftlab import bounds as B
from ftlab.cli import ConfigError, Settings, load_config, main, parse_settings, serialize
from ftlab.core import harmonic
from ftlab.problems import WeightedGraph, write_edge_list


def run_cli(*argv):
    buf = io.StringIO()
    code = main(list(argv), stdout=buf)
    return code, buf.getvalue()


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# config parsing

def test_kv_and_json_agree():
    kv = parse_settings("problem = onemax\nn = 50   # comment\nlambda = 4\np-over-n = 2\n")
    js = parse_settings('{"problem": "onemax", "n": 50, "lambda": 4, "p_over_n": 2}')
    assert kv == js
    assert kv.lam == 4 and kv.rate() == pytest.approx(0.04)


def test_serialize_round_trip():
    s = Settings(problem="leadingones", n=17, model="shift", p=0.25, shift_to=2, mu=3, lam=2, runs=77, seed=9,
                 targets="3,5")
    assert parse_settings(serialize(s)) == s
    assert parse_settings(serialize(Settings())) == Settings()


def test_unknown_key_suggests():
    with pytest.raises(ConfigError, match=r"<config>:2:1: unknown key 'mu_size'; did you mean 'mu'\?") as exc:
        parse_settings("problem = onemax\nmu_size = 3\n")
    assert (exc.value.line, exc.value.col) == (2, 1)


def test_bad_values_carry_position():
    with pytest.raises(ConfigError) as exc:
        parse_settings("n = 5\n  runs = many\n", source="cfg.txt")
    assert exc.value.line == 2 and exc.value.col == 10
    assert str(exc.value).startswith("cfg.txt:2:10:")
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        parse_settings("problem onemax\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_settings("n = 1\nn = 2\n")


def test_json_errors_carry_position():
    with pytest.raises(ConfigError) as exc:
        parse_settings('{\n  "problem": "onemax",\n  "n": 5,,\n}')
    assert exc.value.line == 3
    with pytest.raises(ConfigError) as exc:
        parse_settings('{\n  "problem": "onemax",\n  "runz": 5\n}')
    assert (exc.value.line, exc.value.col) == (3, 3)
    assert "did you mean 'runs'" in str(exc.value)


def test_empty_config_lists_required_fields(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    with pytest.raises(ConfigError, match="missing required fields: problem, n"):
        load_config(path)


def test_load_config_builds_experiment(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"problem": "onemax", "n": 20, "model": "fast", "beta": 2.5, "runs": 30,
                                "init": "random", "targets": [5, 20]}))
    cfg = load_config(path)
    assert cfg.n == 20 and cfg.runs == 30 and cfg.targets == [5, 20]
    assert cfg.algorithm.mutation.kind == "fast" and cfg.algorithm.mutation.beta == 2.5
    assert cfg.algorithm.init.kind == "uniform"


# subcommands

def test_exact_rls_matches_harmonic(tmp_path):
    code, out = run_cli("exact", "--problem", "onemax", "--n", "10", "--model", "rls", "--k", "10",
                        "--out", str(tmp_path))
    assert code == 0
    assert out.splitlines()[-1].startswith("10,")
    assert float(out.splitlines()[-1].split(",")[1]) == pytest.approx(10 * harmonic(10), rel=1e-12)
    rows = read_csv(tmp_path / "exact.csv")
    assert len(rows) == 11
    assert (tmp_path / "report.txt").exists()


def test_exact_leadingones_uniform(tmp_path):
    code, out = run_cli("exact", "--problem", "leadingones", "--n", "20", "--model", "rls", "--init", "random",
                        "--k", "20")
    assert code == 0
    assert float(out.splitlines()[-1].split(",")[1]) == pytest.approx(200.0, rel=1e-12)


def test_bounds_leadingones_closed_form():
    code, out = run_cli("bounds", "--problem", "leadingones", "--n", "2", "--p", "0.5", "--k", "2")
    assert code == 0
    name, n, k, value, kind, status = out.splitlines()[1].split(",")
    assert name == "lo_exact" and float(value) == pytest.approx(3.0) and status == B.APPLICABLE


def test_bounds_csv(tmp_path):
    code, _ = run_cli("bounds", "--problem", "onemax", "--n", "100", "--out", str(tmp_path))
    assert code == 0
    rows = read_csv(tmp_path / "bounds.csv")
    names = {r["bound_name"] for r in rows}
    assert {"om_upper_worst", "om_lower_levels", "om_lower_lengler", "om_lower_drift"} <= names


def test_simulate_writes_profile(tmp_path):
    code, out = run_cli("simulate", "--problem", "onemax", "--n", "20", "--runs", "200", "--seed", "3",
                        "--out", str(tmp_path))
    assert code == 0
    rows = read_csv(tmp_path / "profile.csv")
    assert [int(r["target"]) for r in rows] == list(range(1, 21))
    assert all(int(r["hits"]) == 200 for r in rows)
    code2, out2 = run_cli("simulate", "--problem", "onemax", "--n", "20", "--runs", "200", "--seed", "3")
    assert out2 == out


def test_simulate_mst(tmp_path):
    g = WeightedGraph(4, ((0, 1, 1), (1, 2, 2), (2, 3, 3), (0, 3, 4), (0, 2, 5)))
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    code, out = run_cli("simulate", "--problem", "mst", "--graph", str(path), "--targets", "6", "--runs", "50")
    assert code == 0
    assert out.splitlines()[2].startswith("6,50,50,")
    code, _ = run_cli("simulate", "--problem", "mst", "--graph", str(path), "--runs", "5")
    assert code == 1


def test_compare_exact_rls_is_tight(tmp_path):
    code, out = run_cli("compare", "--problem", "onemax", "--n", "30", "--model", "rls", "--out", str(tmp_path))
    assert code == 0
    assert "violations=0" in out
    rows = read_csv(tmp_path / "comparison.csv")
    worst = [r for r in rows if r["bound_name"] == "om_upper_worst"]
    assert len(worst) == 30
    assert all(float(r["ratio"]) == pytest.approx(1.0, rel=1e-9) for r in worst)
    assert {r["status"] for r in rows if r["bound_name"] in ("ea_zero", "ea_rand")} == {"reference"}


def test_compare_simulated(tmp_path):
    code, out = run_cli("compare", "--problem", "onemax", "--n", "20", "--runs", "2000", "--reference",
                        "simulated", "--out", str(tmp_path))
    assert code == 0
    assert "violations=0" in out


def test_verify_drift_overshoot(tmp_path):
    code, out = run_cli("verify-drift", "--chain", "overshoot", "--n", "7", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads((tmp_path / "drift_report.json").read_text())
    assert rep["exact"] == pytest.approx(7.0)
    assert rep["theorems"]["additive_upper"]["bound"] == pytest.approx(7.0)
    assert rep["theorems"]["additive_upper_naive"]["status"] == "info"


@pytest.mark.parametrize("chain", ["onemax", "leadingones"])
def test_verify_drift_bit_chains(chain):
    code, out = run_cli("verify-drift", "--chain", chain, "--n", "15", "--k", "12")
    assert code == 0
    assert ": fail" not in out


def test_table2_row(tmp_path):
    code, out = run_cli("table2", "--n", "1000", "--out", str(tmp_path))
    assert code == 0
    row = read_csv(tmp_path / "table2.csv")[0]
    assert float(row["max_ratio"]) == pytest.approx(2.606390636, abs=1e-6)


# exit codes

def test_exit_codes(tmp_path):
    assert run_cli("--help")[0] == 0
    assert run_cli("nonsense")[0] == 1
    assert run_cli("exact", "--problem", "onemax")[0] == 1
    assert run_cli("exact", "--problem", "onemax", "--n", "5", "--k", "9")[0] == 1
    assert run_cli("simulate", "--config", str(tmp_path / "missing.txt"))[0] == 1
    assert run_cli("exact", "--problem", "binval", "--n", "5")[0] == 1


def test_internal_error_exit_code(monkeypatch):
    import ftlab.cli as cli

    def boom(*a, **k):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(cli, "cmd_table2", boom)
    assert run_cli("table2", "--n", "10")[0] == 2


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "ftlab", "bounds", "--problem", "leadingones", "--n", "4",
                          "--model", "rls", "--k", "4"], capture_output=True, text=True)
    assert res.returncode == 0
    assert math.isclose(float(res.stdout.splitlines()[1].split(",")[3]), 8.0)
