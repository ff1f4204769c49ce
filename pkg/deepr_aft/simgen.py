"""Simulated right-censored AFT data and the bias/variance protocol.

Covariates: ``x1 ~ Bernoulli(0.5)``, ``x2 ~ N(x1/2, 1)``, ``x3 ~ N(x2/2, 1)``
plus ``K`` independent standard normal columns with no effect. Failure times
are ``exp(f(x) + eps)`` with standardized errors; censoring times are
``tau * U``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, NamedTuple, Optional

import numpy as np

from deepr_aft.constants import (
    BASE_COVARIATES, BIAS_VARIANCE_N_TRAIN, BIAS_VARIANCE_POINTS, BIAS_VARIANCE_TAU,
    DEFAULT_N_TEST, DEFAULT_N_TRAIN, DEFAULT_TAU, ERROR_DISTS, ERROR_MOMENTS, MEAN_KINDS,
)
from deepr_aft.core import SurvivalDataset
from deepr_aft.errors import DimensionError, InvalidArgumentError

logger = logging.getLogger(__name__)

Fitter = Callable[[SurvivalDataset, np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class ScenarioConfig:
    mean_kind: str = "interaction"
    error_dist: str = "gaussian"
    tau: float = DEFAULT_TAU
    n_train: int = DEFAULT_N_TRAIN
    n_test: int = DEFAULT_N_TEST
    noise_dims: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.mean_kind not in MEAN_KINDS:
            raise InvalidArgumentError(f"unknown mean function '{self.mean_kind}'")
        if self.error_dist not in ERROR_DISTS:
            raise InvalidArgumentError(f"unknown error distribution '{self.error_dist}'")
        if not self.tau > 0:
            raise InvalidArgumentError("tau must be positive")
        if self.n_train < 1 or self.n_test < 1:
            raise InvalidArgumentError("sample sizes must be positive")
        if self.noise_dims < 0:
            raise InvalidArgumentError("noise_dims must be nonnegative")

    @property
    def p(self) -> int:
        return BASE_COVARIATES + self.noise_dims

    def with_changes(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


class SimulatedSample(NamedTuple):
    dataset: SurvivalDataset
    truth: np.ndarray
    failure_time: Optional[np.ndarray] = None
    censor_time: Optional[np.ndarray] = None


def gen_covariates(n: int, K: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    if K < 0:
        raise InvalidArgumentError(f"K must be nonnegative, got {K}")
    x1 = rng.binomial(1, 0.5, size=n).astype(float)
    x2 = rng.normal(x1 / 2.0, 1.0)
    x3 = rng.normal(x2 / 2.0, 1.0)
    noise = rng.standard_normal((n, K))
    return np.column_stack([x1, x2, x3, noise])


def mean_function(kind: str, x):
    """True mean of log T. Accepts one covariate vector or a matrix of rows.

    Columns beyond the third have zero effect.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < BASE_COVARIATES:
        raise DimensionError(f"need at least {BASE_COVARIATES} covariates, got {x.shape[-1]}")
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    if kind == "interaction":
        value = 2.0 * x1 + x2 * x3 + 2.0 * x3
    elif kind == "gam":
        value = x1 + 0.5 * x2 ** 2 + np.exp(0.1 * x3)
    elif kind == "linear":
        value = x1 + 2.0 * x2 + 2.0 * x3
    else:
        raise InvalidArgumentError(f"unknown mean function '{kind}'")
    return float(value) if x.ndim == 1 else value


def gen_errors(dist: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean, unit-variance errors standardized with exact moments."""
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    if dist == "gaussian":
        return rng.standard_normal(n)
    if dist == "gumbel":
        raw = rng.gumbel(0.0, 1.0, size=n)
    elif dist == "laplace":
        raw = rng.laplace(0.0, 1.0, size=n)
    elif dist == "t3":
        raw = rng.standard_t(3, size=n)
    else:
        raise InvalidArgumentError(f"unknown error distribution '{dist}'")
    mean, sd = ERROR_MOMENTS[dist]
    return (raw - mean) / sd


def gen_dataset(cfg: ScenarioConfig, rng: np.random.Generator, n: Optional[int] = None,
                keep_latent: bool = False, covariates: Optional[np.ndarray] = None) -> SimulatedSample:
    """Draws one censored sample and the true mean at its covariates.

    Args:
        cfg: Scenario to simulate.
        rng: Random source.
        n: Sample size; defaults to ``cfg.n_train``.
        keep_latent: Also return the failure and censoring times.
        covariates: Fixed covariate rows to reuse instead of drawing new ones.
    """
    if covariates is None:
        n = cfg.n_train if n is None else n
        X = gen_covariates(n, cfg.noise_dims, rng)
    else:
        X = np.asarray(covariates, dtype=float)
        n = X.shape[0]
    truth = mean_function(cfg.mean_kind, X)
    failure = np.exp(truth + gen_errors(cfg.error_dist, n, rng))
    censor = cfg.tau * (1.0 - rng.random(n))
    observed = np.minimum(failure, censor)
    event = failure <= censor
    names = tuple(f"x{k + 1}" for k in range(X.shape[1]))
    continuous = (False,) + (True,) * (X.shape[1] - 1)
    dataset = SurvivalDataset(observed, event, X, covariate_names=names, continuous=continuous)
    if keep_latent:
        return SimulatedSample(dataset, truth, failure, censor)
    return SimulatedSample(dataset, truth)


def gen_train_test(cfg: ScenarioConfig, rng: np.random.Generator):
    """Independent training and test samples of sizes ``n_train`` and ``n_test``."""
    return gen_dataset(cfg, rng, cfg.n_train), gen_dataset(cfg, rng, cfg.n_test)


def bias_variance_config(mean_kind: str, seed: int = 0, **changes) -> ScenarioConfig:
    """Scenario used for the bias/variance study: tau 40, 3000 training subjects, Gaussian errors."""
    base = ScenarioConfig(mean_kind=mean_kind, error_dist="gaussian", tau=BIAS_VARIANCE_TAU,
                          n_train=BIAS_VARIANCE_N_TRAIN, n_test=BIAS_VARIANCE_POINTS, seed=seed)
    return base.with_changes(**changes) if changes else base


@dataclass
class BiasVarianceResult:
    """Per-point squared bias, variance and MSE for each fitter."""

    truth: np.ndarray
    bias2: Dict[str, np.ndarray] = field(default_factory=dict)
    variance: Dict[str, np.ndarray] = field(default_factory=dict)
    mse: Dict[str, np.ndarray] = field(default_factory=dict)

    def summary(self) -> Dict[str, Dict[str, float]]:
        return {
            name: {
                "bias2": float(np.mean(self.bias2[name])),
                "bias2_sd": float(np.std(self.bias2[name])),
                "variance": float(np.mean(self.variance[name])),
                "variance_sd": float(np.std(self.variance[name])),
                "mse": float(np.mean(self.mse[name])),
            }
            for name in self.bias2
        }


def bias_variance_protocol(cfg: ScenarioConfig, replicates: int, fitters: Dict[str, Fitter],
                           n_points: Optional[int] = None) -> BiasVarianceResult:
    """Decomposes each fitter's MSE into squared bias and variance.

    Test covariates are drawn once and held fixed. Every replicate draws a
    fresh training sample, refits every fitter and predicts at the fixed
    points. Variances use divisor ``replicates`` so that
    ``bias2 + variance == mse`` at every point.

    Args:
        cfg: Scenario for the training samples.
        replicates: Number of training samples (at least 2).
        fitters: Name to callable ``(train, test_covariates, seed) -> predictions``.
        n_points: Number of fixed test points; defaults to ``cfg.n_test``.
    """
    if replicates < 2:
        raise InvalidArgumentError("at least two replicates are required")
    n_points = cfg.n_test if n_points is None else n_points
    streams = np.random.SeedSequence(cfg.seed).spawn(replicates + 1)
    test_rng = np.random.default_rng(streams[0])
    X_test = gen_covariates(n_points, cfg.noise_dims, test_rng)
    truth = mean_function(cfg.mean_kind, X_test)

    predictions = {name: np.empty((replicates, n_points)) for name in fitters}
    for r in range(replicates):
        rng = np.random.default_rng(streams[r + 1])
        train = gen_dataset(cfg, rng).dataset
        fit_seed = int(rng.integers(2 ** 31 - 1))
        for name, fitter in fitters.items():
            predictions[name][r] = fitter(train, X_test, fit_seed)
        logger.info("bias/variance replicate %d/%d done", r + 1, replicates)

    result = BiasVarianceResult(truth)
    for name, preds in predictions.items():
        # deviations from the truth keep an exact fitter at exactly zero
        dev = preds - truth
        result.bias2[name] = dev.mean(axis=0) ** 2
        result.variance[name] = dev.var(axis=0)
        result.mse[name] = (dev ** 2).mean(axis=0)
    return result
