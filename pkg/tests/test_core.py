import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ftlab.core import (BitString, InitModel, MutationModel, ParameterError, flip_count_cdf, flip_count_pmf,
                        harmonic, harmonic_diff, harmonic_numbers, harmonic_real, heavy_tail_constants, mutate,
                        one_bit_q, sample_flip_count, two_bit_q)
from ftlab.rng import Xoshiro256

ALL_MODELS = [
    MutationModel.rls(),
    MutationModel.sbm(),
    MutationModel.sbm(0.2),
    MutationModel.shift(),
    MutationModel.shift(shift_to=2),
    MutationModel.resample(),
    MutationModel.fast(1.5),
    MutationModel.fast(3.0),
]


def test_bitstring_basics():
    x = BitString([0, 1, 1, 0])
    assert len(x) == 4 and list(x) == [0, 1, 1, 0]
    assert str(x) == "0110"
    assert x.hamming(BitString.zeros(4)) == 2
    assert BitString.ones(3) == BitString([1, 1, 1])
    with pytest.raises((ParameterError, ValueError)):
        BitString([0, 2])


def test_model_validation():
    with pytest.raises(ParameterError):
        MutationModel.sbm(1.5)
    with pytest.raises(ParameterError):
        MutationModel.fast(1.0)
    with pytest.raises(ParameterError):
        MutationModel("gaussian")
    with pytest.raises(ParameterError):
        MutationModel.rls(3).check(2)
    with pytest.raises(ParameterError):
        InitModel("given")


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.label())
@pytest.mark.parametrize("n", [2, 7, 20, 101])
def test_pmf_is_distribution(model, n):
    pmf = flip_count_pmf(model, n)
    assert pmf.shape == (n + 1,)
    assert np.all(pmf >= 0)
    assert math.isclose(pmf.sum(), 1.0, rel_tol=1e-12)
    cdf = flip_count_cdf(model, n)
    assert cdf[-1] == 1.0 and np.all(np.diff(cdf) >= 0)
    if model.kind in ("shift", "resample", "rls"):
        assert pmf[0] == 0.0


def test_pmf_small_cases():
    pmf = flip_count_pmf(MutationModel.sbm(0.5), 2)
    assert np.allclose(pmf, [0.25, 0.5, 0.25])
    pmf = flip_count_pmf(MutationModel.resample(0.5), 2)
    assert np.allclose(pmf, [0.0, 2 / 3, 1 / 3])
    pmf = flip_count_pmf(MutationModel.shift(0.5), 2)
    assert np.allclose(pmf, [0.0, 0.75, 0.25])
    pmf = flip_count_pmf(MutationModel.rls(2), 4)
    assert list(pmf) == [0, 0, 1, 0, 0]


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.label())
def test_one_bit_q_matches_pmf(model):
    for n in (2, 5, 30, 400):
        assert math.isclose(one_bit_q(model, n) * n, flip_count_pmf(model, n)[1], rel_tol=1e-12)


def test_one_bit_q_examples():
    assert one_bit_q(MutationModel.rls(), 10) == pytest.approx(0.1)
    assert one_bit_q(MutationModel.sbm(0.5), 2) == pytest.approx(0.25)
    ht = heavy_tail_constants(100, 2.0)
    q = one_bit_q(MutationModel.fast(2.0), 100)
    assert math.exp(-1) / (100 * ht.normalization) <= q <= 2 * math.pi ** 2 / 3 / (100 * ht.normalization)


@pytest.mark.parametrize("n", [10, 100, 1000])
@pytest.mark.parametrize("beta", [1.1, 1.5, 2.0, 3.0])
def test_heavy_tail_gamma_factor_range(n, beta):
    g = heavy_tail_constants(n, beta).gamma_factor
    assert math.exp(-1) <= g <= 2 * math.pi ** 2 / 3


def _pair_probability(model, m):
    """Exact probability of flipping exactly bits {0, 1}: pmf[2] / C(m, 2)."""
    return flip_count_pmf(model, m)[2] / math.comb(m, 2)


def test_two_bit_q_examples():
    assert two_bit_q(MutationModel.rls(2), 4) == pytest.approx(1 / 6)
    assert two_bit_q(MutationModel.sbm(0.5), 2) == pytest.approx(0.25)
    assert two_bit_q(MutationModel.resample(0.5), 2) == pytest.approx(1 / 3)
    with pytest.raises(ParameterError):
        two_bit_q(MutationModel.sbm(), 1)


@pytest.mark.parametrize("model", ALL_MODELS + [MutationModel.rls(2)], ids=lambda m: m.label())
def test_two_bit_q_is_pair_probability(model):
    for m in (2, 6, 25):
        if model.kind == "rls" and model.flips > m:
            continue
        assert math.isclose(two_bit_q(model, m), _pair_probability(model, m), rel_tol=1e-12, abs_tol=1e-300)


def test_harmonic_examples():
    assert harmonic(0) == 0.0
    assert harmonic(1) == 1.0
    assert harmonic(3) == pytest.approx(11 / 6, rel=1e-15)
    H = harmonic_numbers(50)
    exact = float(sum(Fraction(1, i) for i in range(1, 51)))
    assert H[50] == pytest.approx(exact, rel=1e-15)
    assert harmonic_diff(10, 4) == pytest.approx(harmonic(10) - harmonic(4), rel=1e-14)
    assert harmonic_diff(4, 10) == pytest.approx(-(harmonic(10) - harmonic(4)), rel=1e-14)
    assert harmonic_real(2.0) == 1.5
    # digamma recurrence H_x = H_{x-1} + 1/x at half-integers
    assert harmonic_real(3.5) == pytest.approx(harmonic_real(2.5) + 1 / 3.5, rel=1e-13)
    assert harmonic_real(0.5) == pytest.approx(2 - 2 * math.log(2), rel=1e-13)
    with pytest.raises(ParameterError):
        harmonic(-1)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=30), st.integers(min_value=0, max_value=2 ** 63))
def test_mutate_distance_equals_flip_count(n, seed):
    model = MutationModel.sbm(0.3)
    x = BitString.random(n, Xoshiro256(seed))
    a, b = Xoshiro256(seed + 1), Xoshiro256(seed + 1)
    y = mutate(x, model, a)
    ell = sample_flip_count(model, n, b)
    assert len(y) == n
    assert x.hamming(y) == ell


def test_mutate_examples():
    rng = Xoshiro256(3)
    z = BitString.zeros(4)
    for _ in range(20):
        assert mutate(z, MutationModel.rls(), rng).hamming(z) == 1
    x = BitString([1, 0, 1, 1, 0])
    assert mutate(x, MutationModel.rls(5), rng) == BitString([0, 1, 0, 0, 1])


@pytest.mark.parametrize("model", [MutationModel.rls(), MutationModel.sbm(), MutationModel.shift(),
                                   MutationModel.resample(), MutationModel.fast(1.5)], ids=lambda m: m.label())
def test_flip_count_sampling_frequencies(model):
    # vectorised inverse transform with the generator's own uniforms
    n, draws = 20, 10 ** 6
    rng = np.random.default_rng(11)
    u = rng.random(draws)
    counts = np.bincount(np.searchsorted(flip_count_cdf(model, n), u, side="right"), minlength=n + 1)
    pmf = flip_count_pmf(model, n)
    se = np.sqrt(pmf * (1 - pmf) / draws)
    assert np.all(np.abs(counts / draws - pmf) <= 3 * se + 1e-12)
    # and a smaller run through the package generator
    gen = Xoshiro256(5)
    small = np.bincount([sample_flip_count(model, n, gen) for _ in range(20000)], minlength=n + 1) / 20000
    se = np.sqrt(pmf * (1 - pmf) / 20000)
    assert np.all(np.abs(small - pmf) <= 4 * se + 1e-12)


def test_sbm_zero_flip_frequency():
    n, trials = 10, 10 ** 6
    rng = np.random.default_rng(2)
    ell = rng.binomial(n, 1 / n, trials)
    p0 = (1 - 1 / n) ** n
    assert abs((ell == 0).mean() - p0) <= 3 * math.sqrt(p0 * (1 - p0) / trials)
    assert flip_count_pmf(MutationModel.sbm(), n)[0] == pytest.approx(p0, rel=1e-13)
