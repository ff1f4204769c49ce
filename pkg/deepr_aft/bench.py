"""Timing sweep: exact Gehan loss against the sub-sampled minibatch loss."""
from __future__ import annotations

import logging
import timeit
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from deepr_aft.constants import BENCH_REPETITIONS, BENCH_SIZES, DEFAULT_PAIRS_PER_EVENT
from deepr_aft.core import log_times
from deepr_aft.errors import InvalidArgumentError
from deepr_aft.gehan import PairSample, full_gehan_loss, minibatch_loss, pair_indices, subsample_pairs
from deepr_aft.simgen import ScenarioConfig, gen_dataset

logger = logging.getLogger(__name__)


class TimingRow(NamedTuple):
    n: int
    n_events: int
    full_seconds: float
    subsampled_seconds: float
    pairs_touched: int
    full_loss: float
    subsampled_loss: float


def pairs_touched(batch) -> int:
    """Number of pairs a minibatch loss evaluation reads."""
    return len(pair_indices(batch)[0])


def fit_loglog_slope(sizes: Sequence[float], times: Sequence[float]) -> float:
    """Least-squares slope of ``log(time)`` against ``log(size)``."""
    sizes = np.asarray(sizes, dtype=float)
    times = np.asarray(times, dtype=float)
    if len(sizes) != len(times) or len(sizes) < 2:
        raise InvalidArgumentError("need at least two (size, time) points of equal count")
    if np.any(sizes <= 0) or np.any(times <= 0):
        raise InvalidArgumentError("sizes and times must be positive")
    slope, _ = np.polyfit(np.log(sizes), np.log(times), 1)
    return float(slope)


def _median_time(func, repetitions: int) -> float:
    func()  # warm-up
    return float(np.median(timeit.repeat(func, number=1, repeat=repetitions)))


def loss_timing_sweep(sizes: Sequence[int] = BENCH_SIZES, s: int = DEFAULT_PAIRS_PER_EVENT,
                      repetitions: int = BENCH_REPETITIONS,
                      rng: Optional[np.random.Generator] = None) -> List[TimingRow]:
    """Median wall time of both losses for every sample size.

    Each size gets a fresh interaction/Gaussian sample and a fresh pair
    sample over all event subjects; residuals are taken against the true
    mean. Runs are sequential.

    Raises:
        InvalidArgumentError: If sizes are not ascending or ``repetitions < 3``.
    """
    sizes = [int(n) for n in sizes]
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise InvalidArgumentError("sizes must be a non-empty ascending list")
    if repetitions < 3:
        raise InvalidArgumentError("at least three repetitions are required")
    rng = np.random.default_rng() if rng is None else rng

    rows = []
    for n in sizes:
        sample = gen_dataset(ScenarioConfig(n_train=n), rng, n)
        dataset = sample.dataset
        res = log_times(dataset) - sample.truth
        if n < 2 or dataset.n_events == 0:
            pairs = PairSample(np.zeros(0), np.zeros(0), s=0, source_n=n)
        else:
            pairs = subsample_pairs(dataset, min(s, n - 1), rng)
        full = _median_time(lambda: full_gehan_loss(res, dataset.event), repetitions)
        sub = _median_time(lambda: minibatch_loss(res, pairs), repetitions)
        row = TimingRow(n, dataset.n_events, full, sub, pairs_touched(pairs),
                        full_gehan_loss(res, dataset.event), minibatch_loss(res, pairs))
        logger.info("n=%d: full %.3es, sub-sampled %.3es (%d pairs)", n, full, sub, row.pairs_touched)
        rows.append(row)
    return rows


def sweep_slopes(rows: Sequence[TimingRow]) -> Dict[str, float]:
    """Fitted log-log slopes of both timing curves; needs at least two sizes."""
    sizes = [row.n for row in rows]
    return {
        "full": fit_loglog_slope(sizes, [row.full_seconds for row in rows]),
        "subsampled": fit_loglog_slope(sizes, [row.subsampled_seconds for row in rows]),
    }
