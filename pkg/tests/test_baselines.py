import warnings

import numpy as np
import pytest
from scipy.stats import norm

from deepr_aft.baselines import (
    LinearAftFit, fit_gehan_lp, fit_paft_lognormal, fit_saft_gehan, gehan_objective,
    smoothed_estimating_function, smoothed_gehan_objective,
)
from deepr_aft.core import SurvivalDataset
from deepr_aft.errors import DimensionError, EmptyEventError, InvalidArgumentError, SingularDesignError


def linear_data(n, rng, beta=(1.0, 2.0, 2.0), intercept=0.5, noise=1.0, tau=None):
    X = rng.normal(size=(n, len(beta)))
    log_t = intercept + X @ np.asarray(beta) + noise * rng.normal(size=n)
    if tau is None:
        return SurvivalDataset(np.exp(log_t), np.ones(n, dtype=bool), X)
    log_c = np.log(tau * (1.0 - rng.random(n)))
    return SurvivalDataset(np.exp(np.minimum(log_t, log_c)), log_t <= log_c, X)


def brute_force_estimating_function(beta, data):
    X = data.covariates
    e = np.log(data.observed_time) - X @ beta
    n = data.n
    total = np.zeros(data.p)
    for i in range(n):
        if not data.event[i]:
            continue
        for j in range(n):
            d = X[i] - X[j]
            r = d @ d / n
            if r == 0:
                continue
            total += d * norm.cdf((e[j] - e[i]) / r)
    return total


def test_paft_without_censoring_is_least_squares():
    rng = np.random.default_rng(0)
    data = linear_data(200, rng)
    fit = fit_paft_lognormal(data)
    Z = np.column_stack([np.ones(200), data.covariates])
    ols, *_ = np.linalg.lstsq(Z, np.log(data.observed_time), rcond=None)
    resid = np.log(data.observed_time) - Z @ ols
    assert fit.converged
    np.testing.assert_allclose(fit.beta, ols, atol=1e-6)
    assert fit.sigma == pytest.approx(np.sqrt(np.mean(resid ** 2)), rel=1e-6)


def test_paft_recovers_linear_coefficients_under_censoring():
    rng = np.random.default_rng(1)
    data = linear_data(1000, rng, intercept=0.0, tau=40.0)
    fit = fit_paft_lognormal(data)
    assert fit.converged
    np.testing.assert_allclose(fit.slopes, [1.0, 2.0, 2.0], atol=0.15)
    assert fit.sigma == pytest.approx(1.0, abs=0.15)


def test_paft_rejects_all_censored():
    rng = np.random.default_rng(2)
    data = SurvivalDataset(np.ones(10), np.zeros(10, dtype=bool), rng.normal(size=(10, 2)))
    with pytest.raises(EmptyEventError):
        fit_paft_lognormal(data)


def test_paft_rejects_singular_design():
    rng = np.random.default_rng(3)
    x = rng.normal(size=20)
    data = SurvivalDataset(np.exp(rng.normal(size=20)), np.ones(20, dtype=bool), np.column_stack([x, 2 * x]))
    with pytest.raises(SingularDesignError):
        fit_paft_lognormal(data)


def test_paft_needs_more_subjects_than_parameters():
    data = SurvivalDataset([1.0, 2.0, 3.0], [True, True, True], np.eye(3))
    with pytest.raises(InvalidArgumentError):
        fit_paft_lognormal(data)


def test_paft_loglik_never_decreases():
    rng = np.random.default_rng(13)
    data = linear_data(300, rng, intercept=0.0, tau=20.0)
    history = []
    fit = fit_paft_lognormal(data, history=history)
    assert len(history) >= 2
    assert np.all(np.diff(history) >= 0)
    assert history[-1] == pytest.approx(fit.loglik)


def test_paft_low_noise_fit_emits_no_runtime_warnings():
    rng = np.random.default_rng(14)
    data = linear_data(100, rng, noise=0.01, tau=40.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        fit = fit_paft_lognormal(data)
    assert np.all(np.isfinite(fit.beta))


def test_estimating_function_identical_covariates_is_zero():
    data = SurvivalDataset([1.0, 3.0], [True, True], np.array([[0.5, 1.0], [0.5, 1.0]]))
    np.testing.assert_array_equal(smoothed_estimating_function(np.zeros(2), data), [0.0, 0.0])


def test_estimating_function_matches_double_loop():
    rng = np.random.default_rng(4)
    data = linear_data(5, rng, tau=3.0)
    if data.n_events == 0:
        data = SurvivalDataset(data.observed_time, [True] * 5, data.covariates)
    beta = np.array([0.3, -0.2, 0.8])
    np.testing.assert_allclose(smoothed_estimating_function(beta, data), brute_force_estimating_function(beta, data), atol=1e-12)


def test_estimating_function_far_gap_limit():
    data = SurvivalDataset([1.0, np.exp(50.0)], [True, False], np.array([[1.0], [0.0]]))
    # e_1 - e_0 = 50 so the smoothed indicator is 1
    np.testing.assert_allclose(smoothed_estimating_function(np.zeros(1), data), [1.0])


def test_constant_covariate_contributes_nothing():
    rng = np.random.default_rng(15)
    base = linear_data(30, rng, tau=20.0)
    data = SurvivalDataset(base.observed_time, base.event, np.column_stack([base.covariates, np.full(30, 3.0)]))
    ef = smoothed_estimating_function(np.array([1.0, 2.0, 2.0, 0.7]), data)
    assert ef[-1] == 0.0
    np.testing.assert_allclose(ef[:3], smoothed_estimating_function(np.array([1.0, 2.0, 2.0]), base))


def test_estimating_function_approaches_unsmoothed_as_bandwidth_vanishes():
    rng = np.random.default_rng(16)
    data = linear_data(30, rng, tau=20.0)
    beta = np.array([0.9, 2.1, 1.8])
    X = data.covariates
    e = np.log(data.observed_time) - X @ beta
    unsmoothed = np.zeros(3)
    for i in np.flatnonzero(data.event):
        for j in range(data.n):
            if e[j] > e[i]:
                unsmoothed += X[i] - X[j]
    # shrinking the covariates shrinks every r_ij while the residuals stay put
    eps = 1e-4
    shrunk = SurvivalDataset(data.observed_time, data.event, eps * X)
    np.testing.assert_allclose(smoothed_estimating_function(beta / eps, shrunk) / eps, unsmoothed, rtol=1e-6, atol=1e-8)


def test_smoothed_objective_gradient_is_estimating_function():
    rng = np.random.default_rng(5)
    data = linear_data(30, rng, tau=20.0)
    beta = np.array([0.8, 1.7, 2.2])
    h = 1e-6
    numeric = np.array([
        (smoothed_gehan_objective(beta + h * np.eye(3)[k], data) - smoothed_gehan_objective(beta - h * np.eye(3)[k], data)) / (2 * h)
        for k in range(3)
    ])
    np.testing.assert_allclose(numeric, smoothed_estimating_function(beta, data), rtol=1e-5, atol=1e-5)


def test_smoothed_objective_bounds_gehan_objective():
    rng = np.random.default_rng(6)
    data = linear_data(40, rng, tau=20.0)
    beta = np.array([1.0, 2.0, 2.0])
    assert smoothed_gehan_objective(beta, data) >= gehan_objective(beta, data)


def test_sqrt_bandwidth_is_accepted():
    rng = np.random.default_rng(7)
    data = linear_data(20, rng)
    assert smoothed_estimating_function(np.ones(3), data, bandwidth="sqrt").shape == (3,)
    with pytest.raises(InvalidArgumentError):
        smoothed_estimating_function(np.ones(3), data, bandwidth="cubic")


def test_gehan_objective_dimension_check():
    data = linear_data(10, np.random.default_rng(8))
    with pytest.raises(DimensionError):
        gehan_objective(np.ones(2), data)


def test_saft_noiseless_recovers_slopes():
    rng = np.random.default_rng(9)
    data = linear_data(150, rng, noise=0.0)
    fit = fit_saft_gehan(data, initial=np.zeros(3))
    assert fit.method == "saft"
    np.testing.assert_allclose(fit.slopes, [1.0, 2.0, 2.0], atol=1e-4)
    assert fit.intercept == pytest.approx(0.5, abs=1e-4)


def test_saft_agrees_with_linear_program():
    rng = np.random.default_rng(10)
    data = linear_data(50, rng, noise=0.01, tau=40.0)
    saft = fit_saft_gehan(data)
    exact = fit_gehan_lp(data)
    np.testing.assert_array_less(np.abs(saft.slopes - exact.slopes), 1e-2)


def test_gehan_lp_minimizes_unsmoothed_loss():
    rng = np.random.default_rng(11)
    data = linear_data(40, rng, tau=20.0)
    exact = fit_gehan_lp(data)
    best = gehan_objective(exact.slopes, data)
    for _ in range(20):
        assert gehan_objective(exact.slopes + 0.05 * rng.normal(size=3), data) >= best - 1e-6 * max(1.0, best)


def test_saft_kaplan_meier_centering():
    rng = np.random.default_rng(12)
    data = linear_data(300, rng, tau=40.0)
    fit = fit_saft_gehan(data, centering="kaplan_meier")
    assert np.isfinite(fit.intercept)
    np.testing.assert_allclose(fit.slopes, [1.0, 2.0, 2.0], atol=0.25)


def test_linear_fit_predict():
    fit = LinearAftFit(np.array([1.0, 2.0, -1.0]), None, True, 3, "saft")
    np.testing.assert_allclose(fit.predict(np.array([[1.0, 1.0], [0.0, 2.0]])), [2.0, -1.0])
    with pytest.raises(DimensionError):
        fit.predict(np.ones((2, 3)))


@pytest.mark.parametrize("seed", [20, 21, 22])
def test_saft_attains_lower_gehan_objective_than_paft(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(250, 3))
    log_t = X @ np.array([1.0, 2.0, 2.0]) + rng.gumbel(size=250)
    log_c = np.log(20.0 * (1.0 - rng.random(250)))
    data = SurvivalDataset(np.exp(np.minimum(log_t, log_c)), log_t <= log_c, X)
    saft = fit_saft_gehan(data)
    paft = fit_paft_lognormal(data)
    paft_value = gehan_objective(paft.slopes, data)
    assert gehan_objective(saft.slopes, data) <= paft_value * (1 + 1e-3)
