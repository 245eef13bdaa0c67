import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rsac import InputError, make_rng
from rsac.baselines import true_rsac_homogeneous, true_rsac_nb
from rsac.simlab import (MODELS, PopulationModel, cv_empirical, draw_population, expected_coverage,
                         get_model, relative_error, sample_poisson, true_rsac)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_rates_sum_to_L(name):
    rates = draw_population(MODELS[name], 20_000, make_rng(3))
    assert rates.sum() == pytest.approx(20_000, rel=1e-9)
    # Gamma(0.01) draws can underflow to exactly 0 in float64
    assert np.all(rates >= 0)


def test_homogeneous_rates():
    np.testing.assert_array_equal(draw_population(MODELS["P"], 100, make_rng(0)), np.ones(100))


def test_zipf_cv_paper_scale():
    # deterministic population: the CV is exactly reproducible
    assert cv_empirical(draw_population(MODELS["Z"], 1_000_000, make_rng(0))) == pytest.approx(
        10.79, abs=0.01)
    assert cv_empirical(draw_population(MODELS["ZM"], 1_000_000, make_rng(0))) == pytest.approx(
        15.10, abs=0.01)


def test_cv_small_cases():
    assert cv_empirical(np.full(5, 2.0)) == 0.0
    assert cv_empirical([1.0, 3.0]) == pytest.approx(np.sqrt(2) / 2)


def test_nb2_cv_near_ten():
    assert cv_empirical(draw_population(MODELS["NB2"], 100_000, make_rng(4))) == pytest.approx(
        10, rel=0.15)


def test_bad_models():
    with pytest.raises(InputError):
        get_model("nope")
    with pytest.raises(InputError):
        PopulationModel("NB", shape=-1.0)
    with pytest.raises(InputError):
        draw_population(MODELS["P"], 1, make_rng(0))


def test_sample_expected_individuals():
    rates = np.full(100, 0.5)
    assert rates.sum() * 1.0 == 50.0
    n = [sample_poisson(rates, 1.0, make_rng(s)).n_individuals for s in range(400)]
    assert abs(np.mean(n) - 50) < 3 * np.sqrt(50 / 400)


def test_sample_tiny_time_is_empty():
    rates = np.ones(1000)
    assert not sample_poisson(rates, 1e-12, make_rng(0))


def test_observed_species_moments():
    rates = draw_population(MODELS["LN"], 10_000, make_rng(7))
    t = 1.0
    p = -np.expm1(-rates * t)
    rng = make_rng(8)
    obs = np.array([sample_poisson(rates, t, rng).n_species for _ in range(200)])
    se = np.sqrt(np.sum(p * (1 - p)) / 200)
    assert abs(obs.mean() - p.sum()) < 3 * se


def test_truth_against_closed_forms():
    t = np.array([0.5, 1.0, 3.0, 10.0])
    r = np.array([1, 2, 16])
    np.testing.assert_allclose(true_rsac(np.full(100, 0.5), r, t),
                               true_rsac_homogeneous(100, 0.5, r[:, None], t[None, :]), rtol=1e-10,
                               atol=1e-13 * 100)
    assert true_rsac(np.full(100, 0.5), 16, 10.0) == pytest.approx(
        100 * stats.poisson.sf(15, 5.0), rel=1e-9)
    assert true_rsac(np.full(100, 0.5), 1, 1.0) == pytest.approx(100 * -np.expm1(-0.5))


def test_truth_gamma_rates_monte_carlo():
    # averaging the truth over Gamma rates approaches the NB closed form
    alpha, beta, L = 1.0, 1.0, 200_000
    rates = make_rng(10).gamma(alpha, beta, size=L)
    r = np.array([1, 3])
    t = np.array([1.0, 5.0])
    got = true_rsac(rates, r, t)
    want = true_rsac_nb(L, alpha, beta, r[:, None], t[None, :])
    np.testing.assert_allclose(got, want, rtol=0.01)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_truth_monotone(seed):
    rng = np.random.default_rng(seed)
    rates = rng.lognormal(0, 1.5, size=rng.integers(2, 300))
    tab = true_rsac(rates, np.arange(1, 30), np.linspace(0, 20, 25))
    slack = 1e-12 * rates.size
    assert np.all(np.diff(tab, axis=1) >= -slack)
    assert np.all(np.diff(tab, axis=0) <= slack)


def test_coverage_examples():
    assert expected_coverage(np.full(1_000_000, 1e-6), 1_000_000) == pytest.approx(0.632, abs=5e-4)
    assert expected_coverage(np.array([1.0]), 5) == 1.0
    assert expected_coverage(np.full(3, 1 / 3), 1) == pytest.approx(1 / 3)
    with pytest.raises(InputError):
        expected_coverage(np.array([0.3, 0.3]), 2)


@given(st.integers(2, 6), st.data())
@settings(max_examples=30, deadline=None)
def test_coverage_minimum_at_uniform(L, data):
    N = data.draw(st.integers(0, max(L - 2, 0)))
    w = np.array(data.draw(st.lists(st.floats(0.01, 1.0), min_size=L, max_size=L)))
    p = w / w.sum()
    assert expected_coverage(np.full(L, 1 / L), N) <= expected_coverage(p, N) + 1e-12


def test_coverage_brute_force_enumeration():
    # E[C] = P(next draw is a species already seen); enumerate all sequences for L = 3, N = 2
    from itertools import product
    p = np.array([0.5, 0.3, 0.2])
    N = 2
    want = 0.0
    for seq in product(range(3), repeat=N):
        pr = np.prod(p[list(seq)])
        want += pr * p[list(set(seq))].sum()
    assert expected_coverage(p, N) == pytest.approx(want, rel=1e-12)


def test_relative_error_examples():
    truth = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0], [4.0, 5.0, 6.0]])
    res = relative_error(truth, truth)
    assert res.mean == 0.0 and res.skipped == (1,)
    scaled = relative_error(1.1 * truth, truth)
    np.testing.assert_allclose(scaled.per_r[[0, 2]], [0.1, 0.1])
    assert scaled.mean == pytest.approx(0.1)
    with pytest.raises(InputError):
        relative_error(truth[:2], truth)
