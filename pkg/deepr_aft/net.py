"""Feedforward mean function trained on sub-sampled Gehan pairs.

Both members of a pair go through the same parameter set; their gradients are
summed into a single :class:`NetworkParams`-shaped gradient.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from deepr_aft.constants import (
    ACTIVATIONS, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, DEFAULT_ACTIVITY_PENALTY,
    DEFAULT_BATCH_SIZE, DEFAULT_DECAY, DEFAULT_EPOCHS, DEFAULT_L2_PENALTY,
    DEFAULT_MOMENTUM, DEFAULT_NESTEROV, DEFAULT_PAIRS_PER_EVENT, LARGE_SAMPLE_THRESHOLD,
    LEARNING_RATES, OPTIMIZERS, REALDATA_WIDTHS, SIMULATION_WIDTHS,
)
from deepr_aft.core import SurvivalDataset, log_times
from deepr_aft.errors import DimensionError, InvalidArgumentError
from deepr_aft.gehan import iter_minibatches, subsample_pairs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LayerSpec:
    width: int
    activation: str = "relu"

    def __post_init__(self):
        if int(self.width) < 1:
            raise InvalidArgumentError(f"layer width must be positive, got {self.width}")
        if self.activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation '{self.activation}'")


def validate_layers(layers: Sequence[LayerSpec]) -> Tuple[LayerSpec, ...]:
    """Checks a layer chain ends in a single linear output unit."""
    layers = tuple(layers)
    if not layers:
        raise InvalidArgumentError("at least one layer is required")
    last = layers[-1]
    if last.width != 1 or last.activation != "linear":
        raise InvalidArgumentError("the final layer must have width 1 and a linear activation")
    return layers


def simulation_layers(activation: str = "relu") -> List[LayerSpec]:
    """128/32/16 hidden units plus a linear output."""
    return [LayerSpec(w, activation) for w in SIMULATION_WIDTHS] + [LayerSpec(1, "linear")]


def realdata_layers(activation: str = "relu") -> List[LayerSpec]:
    """Five 128-unit, two 64-unit and two 32-unit layers plus a linear output."""
    return [LayerSpec(w, activation) for w in REALDATA_WIDTHS] + [LayerSpec(1, "linear")]


def parse_layers(widths: str, activation: str = "relu") -> List[LayerSpec]:
    """Builds hidden layers from a comma separated width list such as ``"128,32,16"``."""
    hidden = [int(w) for w in widths.split(",") if w.strip()]
    return [LayerSpec(w, activation) for w in hidden] + [LayerSpec(1, "linear")]


@dataclass(eq=False)
class NetworkParams:
    """Weight matrices (out x in) and bias vectors of every layer."""

    layers: Tuple[LayerSpec, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        self.layers = tuple(self.layers)
        if not (len(self.layers) == len(self.weights) == len(self.biases)):
            raise DimensionError("layers, weights and biases differ in count")
        fan_in = None
        for spec, w, b in zip(self.layers, self.weights, self.biases):
            if w.ndim != 2 or w.shape[0] != spec.width or b.shape != (spec.width,):
                raise DimensionError(f"parameter shapes {w.shape}/{b.shape} do not match width {spec.width}")
            if fan_in is not None and w.shape[1] != fan_in:
                raise DimensionError(f"layer expects {w.shape[1]} inputs but previous layer has {fan_in} units")
            fan_in = spec.width

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def arrays(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.layers, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "NetworkParams":
        return NetworkParams(self.layers, [np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_vector(self, vector: np.ndarray) -> "NetworkParams":
        vector = np.asarray(vector, dtype=float)
        sizes = [a.size for a in self.arrays()]
        if len(vector) != sum(sizes):
            raise DimensionError(f"expected {sum(sizes)} parameters, got {len(vector)}")
        chunks = np.split(vector, np.cumsum(sizes)[:-1])
        shapes = [a.shape for a in self.arrays()]
        arrays = [c.reshape(s).copy() for c, s in zip(chunks, shapes)]
        return NetworkParams(self.layers, arrays[0::2], arrays[1::2])

    def check_same_shape(self, other: "NetworkParams"):
        if [a.shape for a in self.arrays()] != [a.shape for a in other.arrays()]:
            raise DimensionError("parameter and gradient shapes differ")


def init_params(layers: Sequence[LayerSpec], input_dim: int, rng: np.random.Generator) -> NetworkParams:
    """He-normal weights (variance ``2 / fan_in``) and zero biases."""
    layers = validate_layers(layers)
    if input_dim < 1:
        raise InvalidArgumentError(f"input dimension must be positive, got {input_dim}")
    weights, biases = [], []
    fan_in = input_dim
    for spec in layers:
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(spec.width, fan_in)))
        biases.append(np.zeros(spec.width))
        fan_in = spec.width
    return NetworkParams(layers, weights, biases)


def linear_params(intercept: float, slopes) -> NetworkParams:
    """A single linear unit computing ``intercept + x @ slopes``."""
    slopes = np.asarray(slopes, dtype=float).reshape(1, -1)
    return NetworkParams([LayerSpec(1, "linear")], [slopes.copy()], [np.array([float(intercept)])])


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(z, 0.0) if activation == "relu" else z


def _forward_rows(params: NetworkParams, X: np.ndarray):
    """Returns the output vector and, per layer, the (input, pre-activation, output) triple."""
    if X.shape[1] != params.input_dim:
        raise DimensionError(f"expected {params.input_dim} covariates, got {X.shape[1]}")
    cache = []
    h = X
    for spec, w, b in zip(params.layers, params.weights, params.biases):
        z = h @ w.T + b
        a = _activate(z, spec.activation)
        cache.append((h, z, a))
        h = a
    return h[:, 0], cache


def forward(params: NetworkParams, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if len(x) != params.input_dim:
        raise DimensionError(f"expected {params.input_dim} covariates, got {len(x)}")
    out, _ = _forward_rows(params, x[None, :])
    return float(out[0])


def predict(params: NetworkParams, covariates) -> np.ndarray:
    X = np.asarray(covariates, dtype=float)
    if X.ndim != 2:
        raise DimensionError("covariates must be a matrix")
    out, _ = _forward_rows(params, X)
    return out


class Penalties(NamedTuple):
    l2_weight: float = 0.0
    activity: float = 0.0


@dataclass(frozen=True, eq=False)
class PairBatch:
    """Covariates and log times of both members of each pair."""

    x_first: np.ndarray
    x_second: np.ndarray
    log_y_first: np.ndarray
    log_y_second: np.ndarray

    def __len__(self):
        return len(self.log_y_first)

    @classmethod
    def from_tuples(cls, rows: Sequence[tuple]) -> "PairBatch":
        """Builds a batch from ``(x_i, x_j, logY_i, logY_j)`` tuples."""
        if len(rows) == 0:
            raise InvalidArgumentError("a batch needs at least one pair")
        x_i, x_j, ly_i, ly_j = zip(*rows)
        return cls(np.asarray(x_i, dtype=float), np.asarray(x_j, dtype=float),
                   np.asarray(ly_i, dtype=float), np.asarray(ly_j, dtype=float))

    @classmethod
    def from_indices(cls, covariates: np.ndarray, log_y: np.ndarray, first, second) -> "PairBatch":
        return cls(covariates[first], covariates[second], log_y[first], log_y[second])


def pair_loss_and_grad(params: NetworkParams, batch, penalties: Penalties = Penalties()) -> Tuple[float, NetworkParams]:
    """Mini-batch Gehan loss with penalties, and its exact gradient.

    The rank term is ``sum [e_i - e_j]^-`` with ``e = log Y - f(x)``. The weight
    penalty is ``l2_weight * sum ||W_l||^2`` (biases excluded). The activity
    penalty is ``activity * sum_l ||h_l||^2 / b`` over every hidden layer
    output of both branches, ``b`` being the number of pairs.
    """
    if not isinstance(batch, PairBatch):
        batch = PairBatch.from_tuples(batch)
    b = len(batch)
    if b == 0:
        raise InvalidArgumentError("a batch needs at least one pair")
    if batch.x_first.shape != batch.x_second.shape:
        raise DimensionError("pair covariate blocks differ in shape")

    stacked = np.vstack([batch.x_first, batch.x_second])
    out, cache = _forward_rows(params, stacked)
    f_first, f_second = out[:b], out[b:]
    gap = (batch.log_y_second - f_second) - (batch.log_y_first - f_first)
    active = gap > 0
    loss = float(gap[active].sum())

    l2, act = penalties
    if l2:
        loss += l2 * sum(float(np.sum(w * w)) for w in params.weights)
    if act:
        loss += act * sum(float(np.sum(a * a)) for _, _, a in cache[:-1]) / b

    grad = params.zeros_like()
    hinge = active.astype(float)
    upstream = np.concatenate([hinge, -hinge])[:, None]
    last = params.num_layers - 1
    for l in range(last, -1, -1):
        h_in, z, a = cache[l]
        if act and l < last:
            upstream = upstream + (2.0 * act / b) * a
        if params.layers[l].activation == "relu":
            upstream = upstream * (z > 0)
        grad.weights[l] = upstream.T @ h_in
        grad.biases[l] = upstream.sum(axis=0)
        if l2:
            grad.weights[l] = grad.weights[l] + 2.0 * l2 * params.weights[l]
        upstream = upstream @ params.weights[l]
    return loss, grad


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and sub-sampling hyperparameters for one training run."""

    learning_rate: float = LEARNING_RATES[("small", "other")]
    momentum: float = DEFAULT_MOMENTUM
    nesterov: bool = DEFAULT_NESTEROV
    decay: float = DEFAULT_DECAY
    batch_size: int = DEFAULT_BATCH_SIZE
    epochs: int = DEFAULT_EPOCHS
    l2_weight_penalty: float = DEFAULT_L2_PENALTY
    activity_penalty: float = DEFAULT_ACTIVITY_PENALTY
    pairs_per_event: int = DEFAULT_PAIRS_PER_EVENT
    seed: int = 0
    optimizer: str = "sgd"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidArgumentError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidArgumentError("momentum must lie in [0, 1)")
        if self.decay < 0 or self.l2_weight_penalty < 0 or self.activity_penalty < 0:
            raise InvalidArgumentError("decay and penalties must be nonnegative")
        if self.batch_size < 1 or self.pairs_per_event < 1:
            raise InvalidArgumentError("batch_size and pairs_per_event must be positive")
        if self.epochs < 0:
            raise InvalidArgumentError("epochs must be nonnegative")
        if self.optimizer not in OPTIMIZERS:
            raise InvalidArgumentError(f"unknown optimizer '{self.optimizer}'")

    @property
    def s(self) -> int:
        return self.pairs_per_event

    @property
    def penalties(self) -> Penalties:
        return Penalties(self.l2_weight_penalty, self.activity_penalty)

    def with_changes(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


def learning_rate_for(n: int, error_dist: str) -> float:
    """SGD learning rate by training size and error law."""
    band = "large" if n >= LARGE_SAMPLE_THRESHOLD else "small"
    law = "gumbel" if error_dist == "gumbel" else "other"
    return LEARNING_RATES[(band, law)]


@dataclass
class OptimizerState:
    t: int = 0
    velocity: Optional[NetworkParams] = None
    second_moment: Optional[NetworkParams] = None


def init_optimizer_state(params: NetworkParams) -> OptimizerState:
    return OptimizerState(0, params.zeros_like(), params.zeros_like())


def _current_rate(config: TrainConfig, t: int) -> float:
    return config.learning_rate / (1.0 + config.decay * t)


def sgd_step(params: NetworkParams, grad: NetworkParams, state: OptimizerState, config: TrainConfig) -> Tuple[NetworkParams, OptimizerState]:
    """One momentum SGD update.

    ``v <- momentum * v - lr_t * grad``; the parameters move by ``v``, or by
    ``momentum * v - lr_t * grad`` with Nesterov lookahead.
    ``lr_t = learning_rate / (1 + decay * t)``.
    """
    params.check_same_shape(grad)
    velocity = state.velocity if state.velocity is not None else params.zeros_like()
    params.check_same_shape(velocity)
    lr = _current_rate(config, state.t)
    m = config.momentum
    new_arrays, new_velocity = [], []
    for w, g, v in zip(params.arrays(), grad.arrays(), velocity.arrays()):
        v = m * v - lr * g
        step = m * v - lr * g if config.nesterov else v
        new_arrays.append(w + step)
        new_velocity.append(v)
    new_params = NetworkParams(params.layers, new_arrays[0::2], new_arrays[1::2])
    new_state = OptimizerState(state.t + 1, NetworkParams(params.layers, new_velocity[0::2], new_velocity[1::2]), state.second_moment)
    return new_params, new_state


def adam_step(params: NetworkParams, grad: NetworkParams, state: OptimizerState, config: TrainConfig) -> Tuple[NetworkParams, OptimizerState]:
    """One Adam update with the same learning-rate decay rule as :func:`sgd_step`."""
    params.check_same_shape(grad)
    first = state.velocity if state.velocity is not None else params.zeros_like()
    second = state.second_moment if state.second_moment is not None else params.zeros_like()
    lr = _current_rate(config, state.t)
    t = state.t + 1
    new_arrays, new_first, new_second = [], [], []
    for w, g, m1, m2 in zip(params.arrays(), grad.arrays(), first.arrays(), second.arrays()):
        m1 = ADAM_BETA1 * m1 + (1.0 - ADAM_BETA1) * g
        m2 = ADAM_BETA2 * m2 + (1.0 - ADAM_BETA2) * g * g
        m1_hat = m1 / (1.0 - ADAM_BETA1 ** t)
        m2_hat = m2 / (1.0 - ADAM_BETA2 ** t)
        new_arrays.append(w - lr * m1_hat / (np.sqrt(m2_hat) + ADAM_EPSILON))
        new_first.append(m1)
        new_second.append(m2)
    layers = params.layers
    return (
        NetworkParams(layers, new_arrays[0::2], new_arrays[1::2]),
        OptimizerState(t, NetworkParams(layers, new_first[0::2], new_first[1::2]),
                       NetworkParams(layers, new_second[0::2], new_second[1::2])),
    )


def optimizer_step(params, grad, state, config: TrainConfig):
    if config.optimizer == "adam":
        return adam_step(params, grad, state, config)
    return sgd_step(params, grad, state, config)


def train(dataset: SurvivalDataset, layers: Sequence[LayerSpec], config: TrainConfig,
          history: Optional[list] = None) -> NetworkParams:
    """Fits the network by mini-batch SGD on sub-sampled Gehan pairs.

    Pairs are sampled once; each epoch reshuffles them into blocks of
    ``batch_size``. The whole run is determined by ``config.seed``.

    Args:
        dataset: Training data with at least one event.
        layers: Layer chain ending in a single linear unit.
        config: Optimizer and sampling settings.
        history: If given, receives the mean batch loss of every epoch.

    Returns:
        NetworkParams: The parameters after the last update.
    """
    layers = validate_layers(layers)
    dataset.require_events()
    rng = np.random.default_rng(config.seed)
    params = init_params(layers, dataset.p, rng)
    if config.epochs == 0:
        return params

    s = min(config.pairs_per_event, dataset.n - 1)
    if s < config.pairs_per_event:
        logger.warning("only %d subjects; drawing %d pairs per event instead of %d", dataset.n, s, config.pairs_per_event)
    sample = subsample_pairs(dataset, s, rng)
    X = dataset.covariates
    log_y = log_times(dataset)
    state = init_optimizer_state(params)
    penalties = config.penalties
    logger.info("training on %d pairs for %d epochs (%s, lr=%g)", len(sample), config.epochs, config.optimizer, config.learning_rate)

    for epoch in range(config.epochs):
        total, batches = 0.0, 0
        for first, second in iter_minibatches(sample, config.batch_size, rng):
            batch = PairBatch.from_indices(X, log_y, first, second)
            loss, grad = pair_loss_and_grad(params, batch, penalties)
            params, state = optimizer_step(params, grad, state, config)
            total += loss
            batches += 1
        mean_loss = total / max(batches, 1)
        if history is not None:
            history.append(mean_loss)
        if epoch % 50 == 0 or epoch == config.epochs - 1:
            logger.debug("epoch %d: mean batch loss %.5f", epoch, mean_loss)
    return params
