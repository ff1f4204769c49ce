import numpy as np
import pytest

from deepr_aft.errors import DimensionError, InvalidArgumentError
from deepr_aft.simgen import (
    ScenarioConfig, bias_variance_config, bias_variance_protocol, gen_covariates, gen_dataset,
    gen_errors, gen_train_test, mean_function,
)


def test_covariates_shape_and_binary_first_column():
    X = gen_covariates(500, 4, np.random.default_rng(0))
    assert X.shape == (500, 7)
    assert set(np.unique(X[:, 0])) <= {0.0, 1.0}


def test_covariates_conditional_means():
    X = gen_covariates(200000, 0, np.random.default_rng(1))
    assert X[:, 0].mean() == pytest.approx(0.5, abs=0.01)
    assert X[:, 1].mean() == pytest.approx(0.25, abs=0.01)
    assert X[:, 2].mean() == pytest.approx(0.125, abs=0.01)


def test_covariates_reject_bad_sizes():
    with pytest.raises(InvalidArgumentError):
        gen_covariates(0, 0, np.random.default_rng(0))
    with pytest.raises(InvalidArgumentError):
        gen_covariates(5, -1, np.random.default_rng(0))


def test_mean_function_examples():
    assert mean_function("interaction", [1.0, 1.0, 1.0]) == 5.0
    assert mean_function("linear", [1.0, 1.0, 1.0]) == 5.0
    assert mean_function("gam", [0.0, 0.0, 0.0]) == 1.0
    assert mean_function("linear", [1.0, 1.0, 1.0, 9.0, -9.0]) == 5.0


def test_mean_function_errors():
    with pytest.raises(DimensionError):
        mean_function("linear", [1.0, 2.0])
    with pytest.raises(InvalidArgumentError):
        mean_function("cubic", [1.0, 2.0, 3.0])


def test_mean_function_rows():
    X = np.array([[1.0, 1.0, 1.0], [0.0, 2.0, -1.0]])
    np.testing.assert_allclose(mean_function("interaction", X), [5.0, -4.0])


@pytest.mark.parametrize("dist", ["gumbel", "laplace", "t3"])
def test_standardized_errors_have_unit_moments(dist):
    draws = gen_errors(dist, 1_000_000, np.random.default_rng(2))
    se_mean = draws.std() / np.sqrt(len(draws))
    assert abs(draws.mean()) < 3 * se_mean
    if dist != "t3":
        se_var = np.sqrt((np.mean((draws - draws.mean()) ** 4) - draws.var() ** 2) / len(draws))
        assert abs(draws.var() - 1.0) < 3 * se_var


def test_t3_errors_divide_by_sqrt_three():
    raw = np.random.default_rng(3).standard_t(3, size=10)
    np.testing.assert_allclose(gen_errors("t3", 10, np.random.default_rng(3)), raw / np.sqrt(3.0))


def test_gaussian_errors_are_unmodified():
    raw = np.random.default_rng(4).standard_normal(10)
    np.testing.assert_array_equal(gen_errors("gaussian", 10, np.random.default_rng(4)), raw)


def test_gen_errors_unknown_distribution():
    with pytest.raises(InvalidArgumentError):
        gen_errors("cauchy", 10, np.random.default_rng(0))


@pytest.mark.parametrize("tau, expected", [(20.0, 0.42), (40.0, 0.34), (60.0, 0.30)])
def test_censoring_calibration(tau, expected):
    cfg = ScenarioConfig(tau=tau)
    sample = gen_dataset(cfg, np.random.default_rng(5), n=100_000)
    assert sample.dataset.censoring_rate == pytest.approx(expected, abs=0.03)


def test_censoring_decreases_with_tau():
    rates = [gen_dataset(ScenarioConfig(tau=tau), np.random.default_rng(6), n=50_000).dataset.censoring_rate
             for tau in (20.0, 40.0, 60.0)]
    assert rates[0] >= rates[1] >= rates[2]


def test_huge_tau_censors_almost_nothing():
    sample = gen_dataset(ScenarioConfig(tau=1e12), np.random.default_rng(7), n=10_000)
    assert sample.dataset.censoring_rate < 0.001


def test_latent_times_reconstruct_observed_data():
    sample = gen_dataset(ScenarioConfig(), np.random.default_rng(8), n=1000, keep_latent=True)
    np.testing.assert_array_equal(sample.dataset.observed_time, np.minimum(sample.failure_time, sample.censor_time))
    np.testing.assert_array_equal(sample.dataset.event, sample.failure_time <= sample.censor_time)
    np.testing.assert_allclose(sample.truth, mean_function("interaction", sample.dataset.covariates))


def test_gen_dataset_reuses_fixed_covariates():
    X = gen_covariates(20, 2, np.random.default_rng(9))
    sample = gen_dataset(ScenarioConfig(noise_dims=2), np.random.default_rng(10), covariates=X)
    np.testing.assert_array_equal(sample.dataset.covariates, X)


def test_gen_train_test_sizes_and_determinism():
    cfg = ScenarioConfig(n_train=100, n_test=50, noise_dims=3)
    train, test = gen_train_test(cfg, np.random.default_rng(11))
    assert (train.dataset.n, test.dataset.n, train.dataset.p) == (100, 50, 6)
    again, _ = gen_train_test(cfg, np.random.default_rng(11))
    np.testing.assert_array_equal(train.dataset.observed_time, again.dataset.observed_time)


def test_scenario_config_validation():
    with pytest.raises(InvalidArgumentError):
        ScenarioConfig(mean_kind="cubic")
    with pytest.raises(InvalidArgumentError):
        ScenarioConfig(tau=0.0)
    with pytest.raises(InvalidArgumentError):
        ScenarioConfig(noise_dims=-1)


def test_bias_variance_config_defaults():
    cfg = bias_variance_config("gam")
    assert (cfg.tau, cfg.n_train, cfg.n_test, cfg.error_dist) == (40.0, 3000, 2000, "gaussian")


def small_config():
    return bias_variance_config("interaction", seed=3, n_train=50, n_test=40)


def truth_fitter(train, X, seed):
    return mean_function("interaction", X)


def noisy_fitter(train, X, seed):
    return mean_function("interaction", X) + np.random.default_rng(seed).standard_normal(len(X))


def test_bias_variance_of_exact_fitter_is_zero():
    result = bias_variance_protocol(small_config(), 3, {"truth": truth_fitter})
    summary = result.summary()["truth"]
    assert summary["bias2"] == 0.0
    assert summary["variance"] == 0.0


def test_bias_variance_of_noisy_fitter():
    result = bias_variance_protocol(small_config(), 200, {"noise": noisy_fitter}, n_points=200)
    summary = result.summary()["noise"]
    assert summary["variance"] == pytest.approx(1.0, abs=0.05)
    assert summary["bias2"] < 0.02


def test_bias_plus_variance_is_mse():
    result = bias_variance_protocol(small_config(), 10, {"noise": noisy_fitter, "truth": truth_fitter})
    for name in ("noise", "truth"):
        np.testing.assert_allclose(result.bias2[name] + result.variance[name], result.mse[name], atol=1e-10)


def test_bias_variance_needs_two_replicates():
    with pytest.raises(InvalidArgumentError):
        bias_variance_protocol(small_config(), 1, {"truth": truth_fitter})
