"""Simulation experiments: fitters, replicated scenarios and grids."""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from deepr_aft.baselines import fit_paft_lognormal, fit_saft_gehan
from deepr_aft.constants import (
    ACTIVATIONS, ARCHITECTURES, BANDWIDTHS, CENTERING_METHODS, DEFAULT_ACTIVITY_PENALTY,
    DEFAULT_BATCH_SIZE, DEFAULT_DECAY, DEFAULT_EPOCHS, DEFAULT_L2_PENALTY, DEFAULT_MOMENTUM,
    DEFAULT_N_TEST, DEFAULT_N_TRAIN, DEFAULT_NESTEROV, DEFAULT_PAIRS_PER_EVENT, DEFAULT_TAU,
    HIGH_DIM_CUTOFFS, HIGH_DIM_SWEEP, METHODS, PAIRS_PER_EVENT, REALDATA_PRESETS,
)
from deepr_aft.core import SurvivalDataset, intercept_offset
from deepr_aft.errors import ConfigError, InvalidArgumentError
from deepr_aft.metrics import c_index, mse
from deepr_aft.net import (
    LayerSpec, NetworkParams, TrainConfig, learning_rate_for, linear_params, predict,
    realdata_layers, simulation_layers, train,
)
from deepr_aft.simgen import Fitter, ScenarioConfig, gen_train_test

logger = logging.getLogger(__name__)


def pairs_per_event_for(n: int) -> int:
    """Sub-sampling size ``s`` for a training size: the table entry of the largest size not above ``n``."""
    eligible = [size for size in PAIRS_PER_EVENT if size <= n]
    return PAIRS_PER_EVENT[max(eligible)] if eligible else DEFAULT_PAIRS_PER_EVENT


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one reproducible run needs, as flat fields.

    ``learning_rate``, ``pairs_per_event`` and ``activation`` left as None are
    resolved from the training size, error law and mean function.
    """

    mean_kind: str = "interaction"
    error_dist: str = "gaussian"
    tau: float = DEFAULT_TAU
    n_train: int = DEFAULT_N_TRAIN
    n_test: int = DEFAULT_N_TEST
    noise_dims: int = 0
    seed: int = 0
    replicates: int = 1
    methods: Tuple[str, ...] = tuple(METHODS)
    architecture: str = "simulation"
    activation: Optional[str] = None
    optimizer: str = "sgd"
    learning_rate: Optional[float] = None
    momentum: float = DEFAULT_MOMENTUM
    nesterov: bool = DEFAULT_NESTEROV
    decay: float = DEFAULT_DECAY
    batch_size: int = DEFAULT_BATCH_SIZE
    epochs: int = DEFAULT_EPOCHS
    l2_weight_penalty: float = DEFAULT_L2_PENALTY
    activity_penalty: float = DEFAULT_ACTIVITY_PENALTY
    pairs_per_event: Optional[int] = None
    centering: str = "event_mean"
    bandwidth: str = "quadratic"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise InvalidArgumentError(f"unknown or empty method list: {', '.join(unknown) or '-'}")
        if self.replicates < 1:
            raise InvalidArgumentError("replicates must be at least 1")
        if self.architecture not in ARCHITECTURES:
            raise InvalidArgumentError(f"unknown architecture '{self.architecture}'")
        if self.activation is not None and self.activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation '{self.activation}'")
        if self.centering not in CENTERING_METHODS:
            raise InvalidArgumentError(f"unknown centering method '{self.centering}'")
        if self.bandwidth not in BANDWIDTHS:
            raise InvalidArgumentError(f"unknown bandwidth '{self.bandwidth}'")
        # surface scenario and optimizer errors at construction time
        self.scenario
        self.train_config(self.seed)

    @property
    def scenario(self) -> ScenarioConfig:
        return ScenarioConfig(self.mean_kind, self.error_dist, self.tau, self.n_train,
                              self.n_test, self.noise_dims, self.seed)

    def resolved_activation(self) -> str:
        if self.activation is not None:
            return self.activation
        return "linear" if self.mean_kind == "linear" else "relu"

    def layers(self) -> List[LayerSpec]:
        if self.architecture == "realdata":
            return realdata_layers(self.resolved_activation())
        return simulation_layers(self.resolved_activation())

    def train_config(self, seed: int, n: Optional[int] = None) -> TrainConfig:
        n = self.n_train if n is None else n
        return TrainConfig(
            learning_rate=self.learning_rate if self.learning_rate is not None else learning_rate_for(n, self.error_dist),
            momentum=self.momentum,
            nesterov=self.nesterov,
            decay=self.decay,
            batch_size=self.batch_size,
            epochs=self.epochs,
            l2_weight_penalty=self.l2_weight_penalty,
            activity_penalty=self.activity_penalty,
            pairs_per_event=self.pairs_per_event if self.pairs_per_event is not None else pairs_per_event_for(n),
            seed=int(seed),
            optimizer=self.optimizer,
        )

    def with_changes(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["methods"] = list(self.methods)
        return data

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


CONFIG_KEYS = [f.name for f in fields(ExperimentConfig)]


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    """Builds an :class:`ExperimentConfig` from a flat mapping.

    Raises:
        ConfigError: On unknown keys or values of the wrong type or range.
    """
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    try:
        return ExperimentConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def preset_config(name: str, **changes) -> ExperimentConfig:
    """Real-data settings: deep architecture, Adam and the dataset's learning rate and batch size."""
    if name not in REALDATA_PRESETS:
        raise InvalidArgumentError(f"unknown preset '{name}'")
    base = ExperimentConfig(architecture="realdata", activation="relu", **REALDATA_PRESETS[name])
    return base.with_changes(**changes) if changes else base


@dataclass(eq=False)
class FittedModel:
    """A fitted mean function: network output plus a constant offset."""

    method: str
    params: NetworkParams
    offset: float = 0.0
    converged: bool = True

    def predict(self, covariates) -> np.ndarray:
        return predict(self.params, covariates) + self.offset


def fit_method(name: str, config: ExperimentConfig, train_data: SurvivalDataset, seed: int) -> FittedModel:
    """Fits one method on a training set."""
    if name == "deepr_aft":
        params = train(train_data, config.layers(), config.train_config(seed, train_data.n))
        offset = intercept_offset(train_data, predict(params, train_data.covariates), config.centering)
        return FittedModel(name, params, offset)
    if name == "paft":
        fit = fit_paft_lognormal(train_data)
    elif name == "saft":
        fit = fit_saft_gehan(train_data, bandwidth=config.bandwidth, centering=config.centering)
    else:
        raise InvalidArgumentError(f"unknown method '{name}'")
    return FittedModel(name, linear_params(fit.intercept, fit.slopes), 0.0, fit.converged)


def make_fitters(config: ExperimentConfig) -> Dict[str, Fitter]:
    """Name to callable ``(train, test_covariates, seed) -> predictions`` for each configured method."""

    def fitter_for(name):
        def fitter(train_data, test_covariates, seed):
            return fit_method(name, config, train_data, seed).predict(test_covariates)
        return fitter

    return {name: fitter_for(name) for name in config.methods}


@dataclass
class MethodSummary:
    mse: List[float] = field(default_factory=list)
    cindex: List[float] = field(default_factory=list)

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.mse)) if self.mse else float("nan")

    @property
    def mean_cindex(self) -> float:
        return float(np.mean(self.cindex)) if self.cindex else float("nan")

    @property
    def sd_mse(self) -> float:
        return float(np.std(self.mse)) if self.mse else float("nan")

    @property
    def sd_cindex(self) -> float:
        return float(np.std(self.cindex)) if self.cindex else float("nan")


@dataclass
class ScenarioResult:
    scenario: ScenarioConfig
    methods: Dict[str, MethodSummary]
    config_hash: str
    seed: int
    censoring_rates: List[float] = field(default_factory=list)


def run_scenario(config: ExperimentConfig, fitters: Optional[Dict[str, Fitter]] = None,
                 config_hash: Optional[str] = None) -> ScenarioResult:
    """Runs ``config.replicates`` independent train/test draws of one scenario.

    Each replicate gets its own stream spawned from ``config.seed``; every
    method is fitted on the same training sample and scored on the same test
    sample (MSE against the true mean, C-index against observed times).
    """
    fitters = make_fitters(config) if fitters is None else fitters
    scenario = config.scenario
    result = ScenarioResult(scenario, {name: MethodSummary() for name in fitters},
                            config_hash or config.config_hash(), config.seed)
    for r, stream in enumerate(np.random.SeedSequence(config.seed).spawn(config.replicates)):
        rng = np.random.default_rng(stream)
        train_sample, test_sample = gen_train_test(scenario, rng)
        fit_seed = int(rng.integers(2 ** 31 - 1))
        test = test_sample.dataset
        result.censoring_rates.append(train_sample.dataset.censoring_rate)
        for name, fitter in fitters.items():
            predictions = fitter(train_sample.dataset, test.covariates, fit_seed)
            result.methods[name].mse.append(mse(predictions, test_sample.truth))
            result.methods[name].cindex.append(c_index(test.observed_time, test.event, predictions))
        logger.info("%s/%s tau=%g n=%d: replicate %d/%d done", scenario.mean_kind, scenario.error_dist,
                    scenario.tau, scenario.n_train, r + 1, config.replicates)
    return result


def run_grid(base_config: ExperimentConfig, mean_kinds: Iterable[str], error_dists: Iterable[str],
             taus: Iterable[float], n_trains: Iterable[int]) -> List[ScenarioResult]:
    """Runs every combination of the given scenario settings; all results share the base config hash."""
    grid_hash = base_config.config_hash()
    results = []
    for mean_kind, error_dist, tau, n_train in itertools.product(mean_kinds, error_dists, taus, n_trains):
        config = base_config.with_changes(mean_kind=mean_kind, error_dist=error_dist, tau=tau, n_train=n_train)
        results.append(run_scenario(config, config_hash=grid_hash))
    return results


def high_dimension_sweep(config: ExperimentConfig, dims: Sequence[int] = HIGH_DIM_SWEEP) -> List[ScenarioResult]:
    """Adds ``K`` noise covariates for each ``K`` in ``dims``.

    Baselines are dropped once ``K`` passes their cutoff (SAFT above 300,
    PAFT above 700); the network runs at every ``K``.
    """
    results = []
    for K in dims:
        methods = tuple(m for m in config.methods if K <= HIGH_DIM_CUTOFFS.get(m, K))
        if not methods:
            continue
        results.append(run_scenario(config.with_changes(noise_dims=K, methods=methods)))
    return results
