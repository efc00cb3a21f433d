import csv
import math

import numpy as np
import pytest

from ftlab import bounds as B
from ftlab.algorithms import EaConfig
from ftlab.core import InitModel, MutationModel, ParameterError, harmonic, harmonic_numbers, one_bit_q, two_bit_q
from ftlab.exact_markov import (fixed_target_profile, leadingones_kernel, leadingones_uniform_init, onemax_kernel,
                                onemax_uniform_init, point_init)
from ftlab.harness import ExperimentConfig, run_experiment

LO_MODELS = [MutationModel.rls(), MutationModel.sbm(), MutationModel.sbm(0.05), MutationModel.resample(),
             MutationModel.resample(0.2), MutationModel.shift(), MutationModel.fast(1.5), MutationModel.fast(2.5)]


def test_lo_exact_examples():
    assert B.lo_exact(MutationModel.rls(), 10, 10).value == pytest.approx(50.0)
    assert B.lo_exact(MutationModel.sbm(0.5), 2, 2).value == pytest.approx(3.0)
    p, n = 0.1, 20
    for k in (1, 7, 20):
        sbm = B.lo_exact(MutationModel.sbm(p), n, k).value
        res = B.lo_exact(MutationModel.resample(p), n, k).value
        assert res == pytest.approx(sbm * (1 - (1 - p) ** n), rel=1e-12)
    assert B.lo_standard_exact(50, 30).value == pytest.approx(B.lo_exact(MutationModel.sbm(), 50, 30).value,
                                                              rel=1e-12)
    assert B.lo_exact(MutationModel.rls(2), 10, 3).status == B.VIOLATED
    with pytest.raises(ParameterError):
        B.lo_exact(MutationModel.sbm(), 10, 0)


@pytest.mark.parametrize("model", LO_MODELS, ids=lambda m: m.label())
def test_lo_exact_matches_chain(model):
    for n in (10, 50, 100):
        prof = fixed_target_profile(leadingones_kernel(n, model), leadingones_uniform_init(n))
        for k in range(1, n + 1):
            assert B.lo_exact(model, n, k).value == pytest.approx(prof[k], rel=1e-9)


def test_lo_mu1_upper():
    assert B.lo_mu1_upper(1, 10, 1).value == pytest.approx(1 + 30 * math.e)
    assert B.lo_mu1_upper(3, 10, 0).value == 3
    n = 50
    for k in range(1, n + 1):
        assert B.lo_mu1_upper(1, n, k).value > B.lo_exact(MutationModel.sbm(), n, k).value


def test_om_upper_worst_examples():
    assert B.om_upper_worst(0.5, 2, 2).value == pytest.approx(3.0)
    n = 30
    assert B.om_upper_worst(1 / n, n, n).value == pytest.approx(n * harmonic(n))
    vals = B.om_upper_worst_values(0.01, 80)
    assert vals[0] == 0.0
    assert vals[17] == pytest.approx(B.om_upper_worst(0.01, 80, 17).value, rel=1e-12)
    with pytest.raises(ParameterError):
        B.om_upper_worst(0.0, 5, 2)


@pytest.mark.parametrize("n", [5, 50, 500, 1000])
def test_rls_upper_is_exact(n):
    prof = fixed_target_profile(onemax_kernel(n, MutationModel.rls()), point_init(n + 1))
    vals = B.om_upper_worst_values(1.0 / n, n)
    assert np.allclose(vals[1:], prof[1:], rtol=1e-9)


def test_om_upper_random():
    n = 10 ** 4
    q = one_bit_q(MutationModel.sbm(), n)
    r = B.om_upper_random(q, n, n)
    assert r.status == B.ASYMPTOTIC
    assert r.value < B.om_upper_worst(q, n, n).value
    assert B.om_upper_random(q, n, n // 2).status == B.VIOLATED
    k0 = B.om_upper_random_min_k(n)
    assert B.om_upper_random(q, n, k0).usable and not B.om_upper_random(q, n, k0 - 1).usable
    vals = B.om_upper_random_values(q, n)
    assert vals[k0] == pytest.approx(B.om_upper_random(q, n, k0).value, rel=1e-12)


def test_om_upper_random_ratio_large_n():
    n = 10 ** 5
    model = MutationModel.sbm()
    prof = fixed_target_profile(onemax_kernel(n, model), onemax_uniform_init(n))
    # the comparison the claim is about covers k > n/2 + sqrt(n) ln n
    ks = np.arange(math.floor(n / 2 + math.sqrt(n) * math.log(n)) + 1, n + 1)
    ratio = B.om_upper_random_values(one_bit_q(model, n), n)[ks] / prof[ks]
    assert ratio.max() < 1.8
    assert ks[ratio < 1.5][0] / n == pytest.approx(0.815, abs=2e-3)
    wide = np.arange(B.om_upper_random_min_k(n), n + 1)
    assert (B.om_upper_random_values(one_bit_q(model, n), n)[wide] / prof[wide]).max() < 1.82


@pytest.mark.parametrize("n", [50, 100, 200, 500, 1000])
def test_onemax_sandwich_worst(n):
    model = MutationModel.sbm()
    exact = fixed_target_profile(onemax_kernel(n, model), point_init(n + 1))
    q = one_bit_q(model, n)
    checked = 0
    for k in range(1, n + 1):
        low = B.om_lower_levels(1.0 / n, n, k)
        up = B.om_upper_worst(q, n, k)
        assert up.value >= exact[k] * (1 - 1e-12)
        if k >= 2:
            assert up.value > exact[k]
        if low.applicable:
            checked += 1
            assert low.value <= exact[k]
            if k >= 2:
                assert low.value < exact[k] < up.value
    assert checked > 0


def test_lower_levels_status():
    n = 1000
    ell = B.om_lower_levels_start(1 / n, n)
    assert B.om_lower_levels(1 / n, n, ell).value == pytest.approx(0.0, abs=1e-12)
    assert B.om_lower_levels(1 / n, n, ell - 1).status == B.VIOLATED
    assert B.om_lower_levels(0.2, n, n).status == B.VIOLATED
    factor = 1 - 3.6 / ((1 - 1e-3) ** 2 * math.log(1000))
    assert factor == pytest.approx(0.4778, abs=1e-4)
    direct = B.om_lower_levels(1 / n, n, n).value * (1 / n) * (1 - 1 / n) ** (n - 1)
    assert direct == pytest.approx(factor * (harmonic(n - ell)), rel=1e-12)


def test_lengler():
    n = 1000
    r = B.om_lower_lengler(n, n - 1)
    expected = math.e * n * math.log(1000) - 2000 * math.log(math.log(1000)) - 16000
    assert r.value == pytest.approx(max(0.0, expected))
    assert B.om_lower_lengler(n, n).status == B.VIOLATED
    low = B.om_lower_lengler(10 ** 4, 5000)
    assert low.value == 0.0 and "clamped" in low.note


def test_drift_lower():
    n = 10 ** 4
    assert B.om_lower_drift(n, n - 1).value > B.om_lower_lengler(n, n - 1).value
    assert B.om_lower_drift(n, n // 2).status == B.VIOLATED
    assert math.isfinite(B.om_lower_drift(n, 2 * n // 3 + 1).value)
    n = 1000
    exact = fixed_target_profile(onemax_kernel(n, MutationModel.sbm()), onemax_uniform_init(n))
    assert B.om_lower_drift(n, 900).value <= exact[900] * 1.05
    # the arctan-free antiderivative is the smaller of the two
    for k in (700, 900, 999):
        assert B.om_lower_drift(n, k).value <= B.om_lower_drift(n, k, with_arctan=True).value


def test_drift_h_corrected_form():
    n, x = 100, 9.0
    assert B.om_drift_h(x, n) == pytest.approx((9 + 6) * (1 + (144 + 96) / 100) / (math.e * 100))


def test_om_mu1_upper():
    n = 100
    q = one_bit_q(MutationModel.sbm(), n)
    for k in (1, 2, 50, 100):
        a = B.om_mu1_upper(1, 1 / n, n, k).value
        b = B.om_upper_worst(q, n, k).value
        assert 0.2 * b <= a <= 20 * b + 10
    cfg = ExperimentConfig("onemax", n, EaConfig(8, 1, MutationModel.sbm(), InitModel.worst()), runs=1000,
                           seed=3, targets=[n])
    prof = run_experiment(cfg)
    assert B.om_mu1_upper(8, 1 / n, n, n).value >= prof.mean[0]


def test_resample_bounds_status():
    n = 1000
    p = 1 / n
    near = B.om_lower_resample_near(p, n, n)
    far = B.om_lower_resample_far(p, n, n // 2)
    assert near.status == B.ASYMPTOTIC and far.status == B.ASYMPTOTIC
    assert B.om_lower_resample_near(p, n, n // 2).status == B.VIOLATED
    up = B.om_upper_random_resample(p, n, n)
    assert up.status == B.ASYMPTOTIC and up.value > 0


def test_binval():
    n, p = 1000, 1e-3
    low = B.binval_bounds(p, n, 500, "lower")
    up = B.binval_bounds(p, n, 500, "upper")
    assert low.value <= up.value
    assert B.binval_bounds(p, n, n - 1, "lower").status == B.VIOLATED
    a_star = B.binval_optimal_alpha(p, n, 500)
    best = B.binval_bounds(p, n, 500, "upper", alpha=a_star).value
    for alpha in (1.5, 2.0, math.log(math.log(500)), 10.0, a_star * 1.01, a_star * 0.99):
        if alpha > 1:
            assert B.binval_bounds(p, n, 500, "upper", alpha=alpha).value >= best * (1 - 1e-12)
    assert B.binval_bounds(p, n, 500, "upper", alpha=1.0).status == B.VIOLATED


def test_mst_bounds():
    assert B.mst_components_upper(0.25, 5, 4).value == pytest.approx(4.0)
    assert B.mst_components_upper(1 / 3, 3, 1).value == pytest.approx(3 * (1 + math.log(2)))
    vals = [B.mst_components_upper(0.1, 10, k).value for k in range(1, 10)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ParameterError):
        B.mst_components_upper(0.1, 10, 0)
    q2 = two_bit_q(MutationModel.rls(2), 3)
    assert B.mst_weight_upper(q2, 3, 3, 0).value == pytest.approx((1 + math.log(6)) / q2)
    assert B.mst_weight_upper(0.1, 4, 2, 5).value == pytest.approx(10.0)
    # triangle, 2-opt RLS from the heaviest tree: exact chain value is 3 steps
    assert B.mst_weight_upper(q2, 3, 3, 0).value >= 3.0


@pytest.mark.parametrize("n", range(0, 61))
def test_weighted_harmonic_identity(n):
    assert B.harmonic_binomial_mean(n) == pytest.approx(B.harmonic_binomial_closed(n), abs=1e-12)


def test_weighted_harmonic_example():
    assert B.harmonic_binomial_mean(2) == pytest.approx(0.875)
    assert B.harmonic_binomial_closed(2) == pytest.approx(0.875)
    assert harmonic_numbers(2)[2] == 1.5


def test_bounds_csv(tmp_path):
    rows = [B.om_upper_worst(0.1, 10, 3), B.om_lower_lengler(10, 10)]
    path = tmp_path / "b.csv"
    B.write_bounds_csv(path, rows)
    got = list(csv.reader(open(path)))
    assert got[0] == ["bound_name", "n", "k", "value", "kind", "status"]
    assert got[1][0] == "om_upper_worst" and got[2][5] == B.VIOLATED
