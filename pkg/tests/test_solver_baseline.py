import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dugh.model import H_MIN, augmented_design, sigma_y
from dugh.solver_baseline import fit_champagne, update_gamma_champagne, update_lambda_hetero
from dugh.solver_full import FitConfig, fit_full, m_sn_diag, m_space, update_spatial

from conftest import random_instance

seeds = st.integers(0, 2**32 - 1)


def spatial_reference(h, lead, trials):
    """update_spatial with B = I: the joint closed form the baseline restricts."""
    phi = augmented_design(lead)
    sy = sigma_y(h, lead)
    g = m_sn_diag(h, phi, sy, m_space(trials, np.eye(trials.shape[2])))
    return update_spatial(h, phi, sy, g)


def test_scalar_chain():
    lead = np.array([[1.0]])
    trials = np.full((1, 1, 1), 2.0)
    h = np.array([1.0, 1.0])
    np.testing.assert_allclose(update_gamma_champagne(h, lead, trials), [np.sqrt(2)])
    np.testing.assert_allclose(update_lambda_hetero(h, lead, trials), [np.sqrt(2)])


def test_zero_posterior_floors_gamma(rng):
    lead, trials, h, _ = random_instance(rng)
    assert np.all(update_gamma_champagne(h, lead, np.zeros_like(trials)) == H_MIN)


def test_perfect_fit_floors_lambda():
    # identity lead field, negligible noise: the residual vanishes
    m = 3
    h = np.r_[np.ones(m), np.zeros(m)]
    trials = np.random.default_rng(0).standard_normal((1, m, 4))
    assert np.all(update_lambda_hetero(h, np.eye(m), trials) == H_MIN)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_index_restriction(seed):
    rng = np.random.default_rng(seed)
    lead, trials, h, _ = random_instance(rng)
    n = lead.shape[1]
    ref = spatial_reference(h, lead, trials)
    np.testing.assert_allclose(update_gamma_champagne(h, lead, trials), ref[:n], rtol=1e-10)
    np.testing.assert_allclose(update_lambda_hetero(h, lead, trials), ref[n:], rtol=1e-10)


def test_sum_normalization_scales_lambda(rng):
    lead, trials, h, _ = random_instance(rng)
    t = trials.shape[2]
    mean = update_lambda_hetero(h, lead, trials)
    summed = update_lambda_hetero(h, lead, trials, time_normalization="sum")
    np.testing.assert_allclose(summed, np.sqrt(t) * mean, rtol=1e-12)
    with pytest.raises(ValueError):
        update_lambda_hetero(h, lead, trials, time_normalization="median")


@pytest.mark.parametrize("homoscedastic", [False, True])
def test_equals_full_with_frozen_identity(rng, homoscedastic):
    lead, trials, h, _ = random_instance(rng)
    n = lead.shape[1]
    if homoscedastic:
        h[n:] = h[n]
    cfg = FitConfig(max_iter=40, homoscedastic=homoscedastic)
    ch = fit_champagne(lead, trials, cfg, init=h)
    full = fit_full(lead, trials, cfg, init=(h, np.eye(trials.shape[2])), learn_temporal=False)
    np.testing.assert_allclose(ch.spatial.h, full.spatial.h, rtol=1e-10)
    np.testing.assert_allclose(ch.posterior_means, full.posterior_means, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(ch.nll_trace, full.nll_trace, rtol=1e-10)


@settings(max_examples=15, deadline=None)
@given(seed=seeds, homoscedastic=st.booleans())
def test_champagne_descent(seed, homoscedastic):
    rng = np.random.default_rng(seed)
    lead, trials, _, _ = random_instance(rng, well_posed=False)
    res = fit_champagne(lead, trials, FitConfig(max_iter=60, seed=seed, homoscedastic=homoscedastic))
    steps = np.diff(res.nll_trace)
    assert np.all(steps <= 1e-8 * np.maximum(1.0, np.abs(res.nll_trace[:-1])))
    np.testing.assert_array_equal(res.b, np.eye(trials.shape[2]))


def test_champagne_single_sample_and_zero_trials(rng):
    lead = rng.standard_normal((4, 6))
    res = fit_champagne(lead, rng.standard_normal((1, 4, 1)), FitConfig(max_iter=20))
    assert res.posterior_means.shape == (1, 6, 1)
    zero = fit_champagne(lead, np.zeros((2, 4, 3)), FitConfig(max_iter=1))
    assert np.all(zero.spatial.h == H_MIN)
