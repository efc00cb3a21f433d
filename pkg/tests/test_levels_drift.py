import json
import math

import numpy as np
import pytest

from ftlab import bounds as B
from ftlab.core import MutationModel, ParameterError, one_bit_q
from ftlab.exact_markov import (DenseChain, fixed_target_expectation, leadingones_kernel, onemax_kernel,
                                overshoot_example_chain, point_init)
from ftlab.levels_drift import (THEOREMS, LevelConditionError, LevelSpec, QuadratureError, TabulatedDrift,
                                additive_lower, additive_upper, check_drift_function, check_lower_conditions,
                                check_refined_conditions, fl_lower, fl_upper, fl_upper_refined, integrate,
                                kernel_to_dense, leadingones_level_spec, merge_levels, multiplicative_upper,
                                overshoot_multiplicative_upper, overshoot_variable_upper, variable_lower,
                                variable_upper, verify_drift_on_chain, write_report_json)

MODELS = [MutationModel.rls(), MutationModel.sbm(), MutationModel.sbm(0.03), MutationModel.resample(),
          MutationModel.shift(), MutationModel.fast(1.5)]


def two_level(rate=0.25):
    return LevelSpec([rate], [1.0, 0.0], np.array([[0.0, 1.0], [0.0, 0.0]]), 0.0)


# fitness levels

def test_single_level_is_geometric():
    spec = two_level(0.25)
    assert fl_upper(spec) == pytest.approx(4.0)
    assert fl_lower(spec) == pytest.approx(4.0)
    assert fl_upper_refined(spec) == pytest.approx(4.0)


def test_fl_upper_sums_remaining_levels():
    rates = np.array([0.5, 0.25, 0.1])
    start = np.array([0.5, 0.0, 0.5, 0.0])
    spec = LevelSpec(rates, start)
    assert fl_upper(spec) == pytest.approx(0.5 * (2 + 4 + 10) + 0.5 * 10)


def test_viscous_sum_by_hand():
    rates = np.array([0.5, 0.25, 0.2])
    gamma = np.zeros((4, 4))
    gamma[0, 1:] = [0.5, 0.25, 0.25]
    gamma[1, 2:] = [0.5, 0.5]
    gamma[2, 3] = 1.0
    spec = LevelSpec(rates, [1.0, 0, 0, 0], gamma, 0.5)
    assert fl_lower(spec) == pytest.approx(2 + 0.5 * (4 + 5))


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label())
@pytest.mark.parametrize("n", [2, 5, 30, 100])
def test_leadingones_levels_reproduce_exact(model, n):
    spec = leadingones_level_spec(n, model)
    for k in sorted({1, max(1, n // 3), n}):
        merged = leadingones_level_spec(n, model, k)
        exact = B.lo_exact(model, n, k).value
        assert fl_lower(merged) == pytest.approx(exact, rel=1e-9)
        assert fl_upper_refined(merged) == pytest.approx(exact, rel=1e-9)
        assert fl_upper(merged) >= exact * (1 - 1e-12)
    assert fl_lower(spec) == pytest.approx(B.lo_exact(model, n, n).value, rel=1e-9)


def test_merge_levels_shapes():
    spec = leadingones_level_spec(6, MutationModel.sbm())
    m = merge_levels(spec, 4)
    assert m.m == 4 and m.rates.shape == (3,)
    assert m.start.sum() == pytest.approx(1.0)
    assert m.gamma[0, 1:].sum() == pytest.approx(1.0)
    assert merge_levels(spec, spec.m) is spec
    with pytest.raises(ParameterError):
        merge_levels(spec, 1)


def test_lower_condition_names_pair():
    gamma = np.zeros((3, 3))
    gamma[0, 1:] = [0.1, 0.9]
    gamma[1, 2] = 1.0
    spec = LevelSpec([0.5, 0.5], [1, 0, 0], gamma, 0.5)
    with pytest.raises(LevelConditionError, match=r"\(i, j\) = \(0, 1\)"):
        check_lower_conditions(spec)
    assert fl_lower(spec, validate=False) > 0


def test_refined_condition_failures():
    gamma = np.zeros((3, 3))
    gamma[0, 1:] = [0.9, 0.1]
    gamma[1, 2] = 1.0
    with pytest.raises(LevelConditionError, match=r"\(0, 1\)"):
        check_refined_conditions(LevelSpec([0.5, 0.5], [1, 0, 0], gamma, 0.5))
    gamma[0, 1:] = [0.5, 0.5]
    with pytest.raises(LevelConditionError, match="rate condition"):
        check_refined_conditions(LevelSpec([0.5, 0.1], [1, 0, 0], gamma, 0.5))


def test_level_spec_validation():
    with pytest.raises(ParameterError):
        LevelSpec([0.5], [0.5, 0.4])
    with pytest.raises(ParameterError):
        LevelSpec([0.0], [1.0, 0.0])
    with pytest.raises(ParameterError):
        LevelSpec([0.5], [1.0, 0.0], chi=1.5)
    with pytest.raises(ParameterError):
        LevelSpec([0.5], [1.0, 0.0], np.array([[0.5, 0.5], [0, 0]]))
    with pytest.raises(ParameterError):
        fl_lower(LevelSpec([0.5], [1.0, 0.0]))


# quadrature

@pytest.mark.parametrize("f,a,b,exact", [
    (math.sin, 0.0, math.pi, 2.0),
    (lambda x: 1.0 / x, 1.0, 1000.0, math.log(1000.0)),
    (math.exp, -3.0, 2.0, math.exp(2) - math.exp(-3)),
    (lambda x: x ** 5, 0.0, 2.0, 64.0 / 6.0),
])
def test_integrate_accuracy(f, a, b, exact):
    assert integrate(f, a, b) == pytest.approx(exact, rel=1e-9)
    assert integrate(f, b, a) == pytest.approx(-exact, rel=1e-9)


def test_integrate_with_kinks():
    f = lambda x: abs(x - 0.3)
    exact = 0.3 ** 2 / 2 + 0.7 ** 2 / 2
    assert integrate(f, 0.0, 1.0, breakpoints=(0.3,)) == pytest.approx(exact, rel=1e-12)
    assert integrate(f, 0.0, 1.0) == pytest.approx(exact, rel=1e-8)
    assert integrate(math.exp, 1.0, 1.0) == 0.0


def test_integrate_raises_without_convergence():
    with pytest.raises(QuadratureError):
        integrate(lambda x: math.sin(1.0 / x) / x, 1e-9, 1.0, max_depth=8)


def test_tabulated_drift():
    h = TabulatedDrift([3.0, 1.0, 2.0], [3.0, 1.0, 1.5])
    assert h(1.5) == pytest.approx(1.25)
    assert h(0.0) == 1.0 and h(10.0) == 3.0
    assert h.breakpoints == (1.0, 2.0, 3.0)
    with pytest.raises(ParameterError):
        TabulatedDrift([1.0, 2.0], [2.0, 1.0])
    with pytest.raises(ParameterError):
        TabulatedDrift([1.0, 1.0], [1.0, 2.0])


def test_check_drift_function():
    check_drift_function(lambda x: x + 1.0, 0.0, 5.0)
    with pytest.raises(ParameterError, match="positive"):
        check_drift_function(lambda x: x - 1.0, 0.0, 5.0)
    with pytest.raises(ParameterError, match="non-decreasing"):
        check_drift_function(lambda x: 10.0 - x, 0.0, 5.0)


# drift theorems

def test_closed_form_theorems():
    assert additive_upper(10.0, -2.0, 3.0) == pytest.approx(4.0)
    assert additive_lower(10.0, 2.0, k=4.0) == pytest.approx(3.0)
    assert additive_lower(10.0, 2.0, e_xt=-2.0) == pytest.approx(6.0)
    assert multiplicative_upper(math.e ** 2, 1.0, 0.5) == pytest.approx(6.0)
    assert overshoot_multiplicative_upper(0.5, 1.0, 1.0, 0.0) == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        additive_lower(10.0, 2.0)
    with pytest.raises(ParameterError):
        additive_upper(1.0, 0.0, 0.0)
    with pytest.raises(ParameterError):
        multiplicative_upper(0.5, 1.0, 0.1)
    with pytest.raises(ParameterError):
        overshoot_multiplicative_upper(0.5, 1.0, 2.0, 1.5)


def test_variable_upper_matches_multiplicative_on_random_triples():
    rng = np.random.default_rng(7)
    for _ in range(10):
        delta = rng.uniform(1e-3, 0.9)
        k_thr = rng.uniform(0.5, 20.0)
        x0 = k_thr * rng.uniform(1.0, 500.0)
        v = variable_upper(lambda z: delta * z, k_thr, x0)
        assert v == pytest.approx(multiplicative_upper(x0, k_thr, delta), rel=1e-9)


def test_overshoot_variable_reduces_to_additive():
    delta = 0.25
    v = overshoot_variable_upper(lambda z: delta, 1.0, 9.0, -1.0)
    assert v == pytest.approx(additive_upper(9.0, -1.0, delta), rel=1e-10)
    with pytest.raises(ParameterError):
        overshoot_variable_upper(lambda z: delta, 1.0, 9.0, 2.0)


def test_variable_lower_constant_drift():
    assert variable_lower(lambda z: 0.5, 1.0, 7.0) == pytest.approx(12.0)
    with pytest.raises(ParameterError):
        variable_lower(lambda z: 0.5, 0.0, 7.0)


@pytest.mark.parametrize("n", [100, 1000, 10000])
def test_onemax_drift_quadrature_matches_closed_form(n):
    for k in (int(0.7 * n) + 1, int(0.9 * n), n - 1):
        quad = variable_lower(lambda x: B.om_drift_h(x, n), n - k, n / 3.0, rel_tol=1e-12)
        full = B.om_lower_drift(n, k, with_arctan=True).value
        assert quad == pytest.approx(full, rel=1e-9)
        assert B.om_lower_drift(n, k).value <= full


def test_mst_component_bound_is_multiplicative():
    m = 12
    q = one_bit_q(MutationModel.sbm(), m)
    for k in (1, 3, 11):
        assert B.mst_components_upper(q, m, k).value == pytest.approx(multiplicative_upper(m - 1, k, q))


# verification against exact chains

@pytest.mark.parametrize("n", list(range(2, 101)))
def test_overshoot_chain(n):
    ch = overshoot_example_chain(n)
    rep = verify_drift_on_chain(ch, ch.values, 0.0, 0)
    th = rep["theorems"]
    assert rep["exact"] == pytest.approx(n, rel=1e-12)
    assert rep["e_xt"] == pytest.approx(1.0 - n)
    assert th["additive_upper"]["bound"] == pytest.approx(n, rel=1e-12)
    assert th["additive_upper"]["status"] == "pass"
    assert th["additive_upper_naive"]["bound"] == pytest.approx(1.0)
    assert th["additive_upper_naive"]["status"] == "info"
    assert th["overshoot_variable_upper"]["bound"] == pytest.approx(n, rel=1e-9)
    assert th["variable_upper"]["status"] == "skipped"
    assert rep["ok"]


def test_leadingones_chain_all_sound():
    n = 30
    kern = leadingones_kernel(n, MutationModel.sbm())
    ch = kernel_to_dense(kern, n)
    rep = verify_drift_on_chain(ch, ch.values, 0.0, 0)
    assert rep["exact"] == pytest.approx(fixed_target_expectation(kern, n, point_init(n + 1)), rel=1e-9)
    assert rep["ok"]
    statuses = {e["status"] for e in rep["theorems"].values()}
    assert "fail" not in statuses


def test_onemax_chain_all_sound():
    n = 40
    kern = onemax_kernel(n, MutationModel.sbm())
    ch = kernel_to_dense(kern, 30)
    rep = verify_drift_on_chain(ch, ch.values, n - 30, 0)
    assert rep["ok"]
    assert rep["theorems"]["multiplicative_upper"]["status"] == "pass"
    assert rep["theorems"]["variable_lower"]["status"] in ("pass", "skipped")


def test_geometric_chain_multiplicative_is_tight():
    # from potential 1 jump to 0 w.p. q: drift q * 1, exact 1/q
    q = 0.2
    P = np.array([[1 - q, q], [0.0, 1.0]])
    ch = DenseChain.from_potential(P, [1.0, 0.0], 0.0)
    rep = verify_drift_on_chain(ch, ch.values, 0.0, 0)
    th = rep["theorems"]
    assert rep["exact"] == pytest.approx(5.0)
    assert th["multiplicative_upper"]["bound"] == pytest.approx(5.0)
    assert th["overshoot_multiplicative_upper"]["bound"] == pytest.approx(5.0)
    assert set(th) == set(THEOREMS)


def test_start_on_target_is_skipped():
    ch = overshoot_example_chain(5)
    rep = verify_drift_on_chain(ch, ch.values, 0.0, 1)
    assert rep["exact"] == 0.0
    assert all(e["status"] == "skipped" for e in rep["theorems"].values())


def test_report_json(tmp_path):
    ch = overshoot_example_chain(4)
    rep = verify_drift_on_chain(ch, ch.values, 0.0, 0)
    path = tmp_path / "r.json"
    write_report_json(path, rep)
    assert json.loads(path.read_text())["exact"] == pytest.approx(4.0)
