"""Gehan rank loss, its subgradient, and pair sub-sampling.

The loss over residuals ``e`` is ``sum_i sum_j Δ_i [e_i - e_j]^-`` with
``[a]^- = max(0, -a)``. Only differences ``e_i - e_j`` enter, so the loss is
unchanged by adding a constant to every residual.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence, Tuple, Union

import numpy as np

from deepr_aft.core import ResidualVector, SurvivalDataset, as_values
from deepr_aft.errors import DimensionError, EmptyEventError, InvalidArgumentError, PairIndexError

logger = logging.getLogger(__name__)

# rows of the pairwise difference matrix evaluated per block
_BLOCK_ELEMENTS = 1 << 22


class ResidualPair(NamedTuple):
    """An ordered pair ``(i, j)`` whose anchor ``i`` is an observed failure."""

    i: int
    j: int


@dataclass(frozen=True, eq=False)
class PairSample:
    """Pairs drawn by :func:`subsample_pairs`, stored as two index arrays."""

    first: np.ndarray
    second: np.ndarray
    s: int
    source_n: int

    def __post_init__(self):
        first = np.asarray(self.first, dtype=np.int64).reshape(-1)
        second = np.asarray(self.second, dtype=np.int64).reshape(-1)
        if len(first) != len(second):
            raise DimensionError("pair index arrays differ in length")
        first.setflags(write=False)
        second.setflags(write=False)
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)

    def __len__(self):
        return len(self.first)

    @property
    def pairs(self) -> list:
        return [ResidualPair(int(i), int(j)) for i, j in zip(self.first, self.second)]


PairBatchLike = Union[PairSample, Sequence[ResidualPair], Tuple[np.ndarray, np.ndarray]]


def pair_indices(batch: PairBatchLike) -> Tuple[np.ndarray, np.ndarray]:
    """Splits any accepted batch representation into ``(first, second)`` index arrays."""
    if isinstance(batch, PairSample):
        return batch.first, batch.second
    if isinstance(batch, tuple) and len(batch) == 2 and isinstance(batch[0], np.ndarray):
        return np.asarray(batch[0], dtype=np.int64), np.asarray(batch[1], dtype=np.int64)
    if len(batch) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    arr = np.asarray([(p[0], p[1]) for p in batch], dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def _check_lengths(values: np.ndarray, events) -> np.ndarray:
    delta = np.asarray(events, dtype=bool).reshape(-1)
    if len(delta) != len(values):
        raise DimensionError(f"{len(values)} residuals but {len(delta)} event flags")
    return delta


def full_gehan_loss(res: Union[ResidualVector, np.ndarray], events) -> float:
    """Exact Gehan loss over all ordered pairs.

    Evaluated block-wise over the event anchors; the diagonal ``i == j`` is
    skipped explicitly.

    Raises:
        DimensionError: If ``res`` and ``events`` differ in length.
    """
    e = as_values(res)
    delta = _check_lengths(e, events)
    anchors = np.flatnonzero(delta)
    n = len(e)
    if len(anchors) == 0 or n < 2:
        return 0.0
    block = max(1, _BLOCK_ELEMENTS // n)
    total = 0.0
    for start in range(0, len(anchors), block):
        rows = anchors[start:start + block]
        gaps = e[None, :] - e[rows, None]
        gaps[np.arange(len(rows)), rows] = 0.0
        total += float(np.maximum(gaps, 0.0).sum())
    return total


def gehan_subgradient(res: Union[ResidualVector, np.ndarray], events) -> np.ndarray:
    """Subgradient of :func:`full_gehan_loss` with respect to the predictions.

    Since ``e = log Y - prediction``, component ``k`` equals
    ``Δ_k #{j: e_j > e_k} - #{i: Δ_i, e_i < e_k}``. Tied residuals contribute
    nothing.
    """
    e = as_values(res)
    delta = _check_lengths(e, events)
    if not delta.any():
        return np.zeros(len(e))
    sorted_all = np.sort(e)
    sorted_events = np.sort(e[delta])
    above = len(e) - np.searchsorted(sorted_all, e, side="right")
    events_below = np.searchsorted(sorted_events, e, side="left")
    return delta * above.astype(float) - events_below.astype(float)


def subsample_pairs(dataset: SurvivalDataset, s: int, rng: np.random.Generator) -> PairSample:
    """Draws ``s`` distinct partners ``j != i`` for every event subject ``i``.

    Partners are drawn uniformly without replacement from the ``n - 1`` other
    subjects, so the sample holds exactly ``n_events * s`` pairs.

    Raises:
        InvalidArgumentError: If ``s`` is not in ``[1, n - 1]``.
        EmptyEventError: If the dataset has no events.
    """
    n = dataset.n
    if s < 1 or s > n - 1:
        raise InvalidArgumentError(f"s must lie in [1, {n - 1}], got {s}")
    anchors = np.flatnonzero(dataset.event)
    if len(anchors) == 0:
        raise EmptyEventError("cannot sample pairs without event subjects")
    first = np.repeat(anchors, s)
    second = np.empty(len(anchors) * s, dtype=np.int64)
    for k, i in enumerate(anchors):
        draw = rng.choice(n - 1, size=s, replace=False)
        second[k * s:(k + 1) * s] = draw + (draw >= i)
    logger.debug("sampled %d pairs (%d events, s=%d)", len(first), len(anchors), s)
    return PairSample(first, second, s=s, source_n=n)


def minibatch_loss(res: Union[ResidualVector, np.ndarray], batch: PairBatchLike) -> float:
    """Gehan loss restricted to the pairs in ``batch``.

    Raises:
        PairIndexError: If a pair refers to an index outside ``res``.
    """
    e = as_values(res)
    first, second = pair_indices(batch)
    if len(first) == 0:
        return 0.0
    _check_pair_bounds(first, second, len(e))
    return float(np.maximum(e[second] - e[first], 0.0).sum())


def pair_subgradient(res: Union[ResidualVector, np.ndarray], batch: PairBatchLike) -> np.ndarray:
    """Subgradient of :func:`minibatch_loss` with respect to the predictions."""
    e = as_values(res)
    first, second = pair_indices(batch)
    grad = np.zeros(len(e))
    if len(first) == 0:
        return grad
    _check_pair_bounds(first, second, len(e))
    active = (e[second] > e[first]).astype(float)
    np.add.at(grad, first, active)
    np.add.at(grad, second, -active)
    return grad


def _check_pair_bounds(first: np.ndarray, second: np.ndarray, n: int):
    if first.min() < 0 or second.min() < 0 or first.max() >= n or second.max() >= n:
        raise PairIndexError(f"pair index out of range for {n} residuals")


def iter_minibatches(sample: PairSample, batch_size: int, rng: np.random.Generator) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Shuffles the sample once and yields consecutive blocks of ``batch_size`` pairs.

    The last block may be shorter.
    """
    if batch_size < 1:
        raise InvalidArgumentError(f"batch_size must be positive, got {batch_size}")
    order = rng.permutation(len(sample))
    for start in range(0, len(order), batch_size):
        block = order[start:start + batch_size]
        yield sample.first[block], sample.second[block]
