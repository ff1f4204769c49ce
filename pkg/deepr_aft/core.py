"""Right-censored regression data and residuals.

Only the observed time ``Y = min(T, C)`` and the event flag ``Δ = I(T <= C)``
are stored; the latent failure and censoring times never enter the model.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from deepr_aft.errors import DimensionError, EmptyEventError, InvalidArgumentError


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Observed times, event flags and an ``n x p`` covariate matrix.

    Args:
        observed_time: Strictly positive observed times, one per subject.
        event: True where the failure was observed.
        covariates: Row-major covariate matrix with one row per subject.
        covariate_names: Optional column names, used by file I/O.
        continuous: Optional per-column flag marking continuous covariates
            (the ones a standardizer may rescale).
        scaler: Transform that was applied to the covariates, if any.
    """

    observed_time: np.ndarray
    event: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple = ()
    continuous: tuple = ()
    scaler: Optional[Any] = field(default=None, compare=False)

    def __post_init__(self):
        time = np.array(self.observed_time, dtype=float).reshape(-1)
        event = np.array(self.event, dtype=bool).reshape(-1)
        covariates = np.array(self.covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, 1) if len(time) > 0 else covariates.reshape(0, 0)
        if covariates.ndim != 2:
            raise DimensionError(f"covariates must be a matrix, got {covariates.ndim} dimensions")
        if len(event) != len(time):
            raise DimensionError(f"event has {len(event)} entries but observed_time has {len(time)}")
        if covariates.shape[0] != len(time):
            raise DimensionError(f"covariates have {covariates.shape[0]} rows but observed_time has {len(time)}")
        if not np.all(np.isfinite(time)) or np.any(time <= 0):
            raise InvalidArgumentError("observed_time values must be finite and strictly positive")
        if not np.all(np.isfinite(covariates)):
            raise InvalidArgumentError("covariates must be finite")
        names = tuple(self.covariate_names)
        if names and len(names) != covariates.shape[1]:
            raise DimensionError(f"{len(names)} covariate names for {covariates.shape[1]} columns")
        continuous = tuple(bool(c) for c in self.continuous)
        if continuous and len(continuous) != covariates.shape[1]:
            raise DimensionError(f"{len(continuous)} continuous flags for {covariates.shape[1]} columns")

        object.__setattr__(self, "observed_time", _frozen(time))
        object.__setattr__(self, "event", _frozen(event))
        object.__setattr__(self, "covariates", _frozen(covariates))
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "continuous", continuous)

    @property
    def n(self) -> int:
        return len(self.observed_time)

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    @property
    def censoring_rate(self) -> float:
        if self.n == 0:
            return 0.0
        return 1.0 - self.n_events / self.n

    def require_events(self):
        """Raises EmptyEventError unless at least one failure is observed."""
        if self.n_events == 0:
            raise EmptyEventError("dataset has no observed events")

    def subset(self, indices: Sequence[int]) -> "SurvivalDataset":
        idx = np.asarray(indices, dtype=int)
        return SurvivalDataset(
            self.observed_time[idx],
            self.event[idx],
            self.covariates[idx],
            covariate_names=self.covariate_names,
            continuous=self.continuous,
            scaler=self.scaler,
        )

    def with_covariates(self, covariates: np.ndarray, scaler: Optional[Any] = None) -> "SurvivalDataset":
        return SurvivalDataset(
            self.observed_time,
            self.event,
            covariates,
            covariate_names=self.covariate_names,
            continuous=self.continuous,
            scaler=scaler if scaler is not None else self.scaler,
        )


@dataclass(frozen=True, eq=False)
class ResidualVector:
    """Censored residuals ``e_i = log Y_i - prediction_i``."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("residuals must be finite")
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def as_values(res) -> np.ndarray:
    """Returns the residual entries of a ResidualVector or array-like."""
    if isinstance(res, ResidualVector):
        return res.values
    return np.asarray(res, dtype=float).reshape(-1)


def log_times(dataset: SurvivalDataset) -> np.ndarray:
    """Natural log of each observed time."""
    return np.log(dataset.observed_time)


def residuals(dataset: SurvivalDataset, predictions) -> ResidualVector:
    """Computes ``log Y_i - predictions[i]`` for every subject.

    Raises:
        DimensionError: If ``predictions`` does not have one entry per subject.
    """
    pred = np.asarray(predictions, dtype=float).reshape(-1)
    if len(pred) != dataset.n:
        raise DimensionError(f"expected {dataset.n} predictions, got {len(pred)}")
    return ResidualVector(log_times(dataset) - pred)


def kaplan_meier_mean(values: np.ndarray, events: np.ndarray) -> float:
    """Mean of the Kaplan-Meier estimate of a right-censored sample.

    Mass left over above the largest value is placed on that value.
    """
    values = np.asarray(values, dtype=float)
    events = np.asarray(events, dtype=bool)
    # failures sort ahead of censorings at tied values
    order = np.lexsort((~events, values))
    v, d = values[order], events[order]
    at_risk = len(v) - np.arange(len(v))
    survival = np.cumprod(np.where(d, 1.0 - 1.0 / at_risk, 1.0))
    previous = np.concatenate([[1.0], survival[:-1]])
    return float(np.sum((previous - survival) * v) + survival[-1] * v[-1])


def intercept_offset(dataset: SurvivalDataset, train_predictions, method: str = "event_mean") -> float:
    """Constant that fixes the location rank-based fits leave unidentified.

    ``event_mean`` aligns the mean prediction with the mean log time over the
    events. ``kaplan_meier`` uses the Kaplan-Meier mean of the residuals.
    """
    dataset.require_events()
    res = residuals(dataset, train_predictions).values
    if method == "event_mean":
        return float(res[dataset.event].mean())
    if method == "kaplan_meier":
        return kaplan_meier_mean(res, dataset.event)
    raise InvalidArgumentError(f"unknown centering method '{method}'")


def center_predictions(predictions, train_predictions, dataset: SurvivalDataset, method: str = "event_mean") -> np.ndarray:
    """Shifts ``predictions`` by the offset estimated on the training data."""
    return np.asarray(predictions, dtype=float) + intercept_offset(dataset, train_predictions, method)
