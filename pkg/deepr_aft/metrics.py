"""Evaluation measures: MSE against the true mean and the censored C-index."""
from __future__ import annotations

import numpy as np

from deepr_aft.errors import DimensionError, UndefinedMetricError

_BLOCK_ELEMENTS = 1 << 22


def mse(predicted, truth) -> float:
    """Mean squared difference between estimated and true mean functions."""
    predicted = np.asarray(predicted, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if len(predicted) != len(truth):
        raise DimensionError(f"{len(predicted)} predictions for {len(truth)} true values")
    if len(predicted) == 0:
        raise UndefinedMetricError("MSE of an empty sample is undefined")
    return float(np.mean((predicted - truth) ** 2))


def _concordance_counts(observed_time, events, predicted):
    time = np.asarray(observed_time, dtype=float).reshape(-1)
    delta = np.asarray(events, dtype=bool).reshape(-1)
    pred = np.asarray(predicted, dtype=float).reshape(-1)
    if not (len(time) == len(delta) == len(pred)):
        raise DimensionError("observed_time, events and predicted differ in length")
    return time, delta, pred


def c_index(observed_time, events, predicted) -> float:
    """Proportion of comparable pairs whose predicted order matches the observed one.

    A pair ``(i, j)`` is comparable when ``Δ_i = 1`` and ``Y_i < Y_j``; it is
    concordant when also ``pred_i < pred_j``. Tied times are not comparable
    and tied predictions are never concordant.

    Raises:
        UndefinedMetricError: If there are no comparable pairs.
    """
    time, delta, pred = _concordance_counts(observed_time, events, predicted)
    anchors = np.flatnonzero(delta)
    n = len(time)
    block = max(1, _BLOCK_ELEMENTS // max(n, 1))
    comparable = 0
    concordant = 0
    for start in range(0, len(anchors), block):
        rows = anchors[start:start + block]
        later = time[rows, None] < time[None, :]
        comparable += int(later.sum())
        concordant += int((later & (pred[rows, None] < pred[None, :])).sum())
    if comparable == 0:
        raise UndefinedMetricError("no comparable pairs for the C-index")
    return concordant / comparable


def c_index_bruteforce(observed_time, events, predicted) -> float:
    """Double-loop reference for :func:`c_index`."""
    time, delta, pred = _concordance_counts(observed_time, events, predicted)
    comparable = concordant = 0
    n = len(time)
    for i in range(n):
        if not delta[i]:
            continue
        for j in range(n):
            if i != j and time[i] < time[j]:
                comparable += 1
                if pred[i] < pred[j]:
                    concordant += 1
    if comparable == 0:
        raise UndefinedMetricError("no comparable pairs for the C-index")
    return concordant / comparable
