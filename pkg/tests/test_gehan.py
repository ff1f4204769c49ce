import itertools

import numpy as np
import pytest

from deepr_aft.core import ResidualVector, SurvivalDataset
from deepr_aft.errors import DimensionError, EmptyEventError, InvalidArgumentError, PairIndexError
from deepr_aft.gehan import (
    PairSample, ResidualPair, full_gehan_loss, gehan_subgradient, iter_minibatches,
    minibatch_loss, pair_subgradient, subsample_pairs,
)


def brute_force_loss(res, events):
    total = 0.0
    for i, j in itertools.permutations(range(len(res)), 2):
        if events[i]:
            total += max(0.0, res[j] - res[i])
    return total


def make_dataset(n, events):
    return SurvivalDataset(np.arange(1, n + 1, dtype=float), events, np.zeros((n, 1)))


def test_full_loss_examples():
    assert full_gehan_loss(ResidualVector([0.2, 0.5]), [False, False]) == 0.0
    assert full_gehan_loss(ResidualVector([0.2, 0.5]), [True, False]) == pytest.approx(0.3)
    assert full_gehan_loss(ResidualVector([0.5, 0.2]), [True, True]) == pytest.approx(0.3)


def test_full_loss_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(2, 30))
        res = rng.normal(size=n)
        events = rng.random(n) < 0.6
        assert full_gehan_loss(res, events) == pytest.approx(brute_force_loss(res, events))


def test_full_loss_is_translation_invariant():
    rng = np.random.default_rng(1)
    res = rng.normal(size=40)
    events = rng.random(40) < 0.5
    assert full_gehan_loss(res + 3.7, events) == pytest.approx(full_gehan_loss(res, events))


def test_full_loss_is_convex_along_segments():
    rng = np.random.default_rng(11)
    for _ in range(50):
        events = rng.random(25) < 0.6
        p, q = rng.normal(size=25), rng.normal(size=25)
        lam = rng.random()
        mixed = full_gehan_loss(lam * p + (1 - lam) * q, events)
        assert mixed <= lam * full_gehan_loss(p, events) + (1 - lam) * full_gehan_loss(q, events) + 1e-12


def test_full_loss_scales_with_positive_factor():
    rng = np.random.default_rng(12)
    res = rng.normal(size=30)
    events = rng.random(30) < 0.5
    for lam in (0.01, 0.5, 2.0, 37.0):
        assert full_gehan_loss(lam * res, events) == pytest.approx(lam * full_gehan_loss(res, events))


def test_full_loss_length_mismatch():
    with pytest.raises(DimensionError):
        full_gehan_loss([0.1, 0.2], [True])


def test_subgradient_examples():
    np.testing.assert_array_equal(gehan_subgradient([0.2, 0.5], [False, False]), [0.0, 0.0])
    np.testing.assert_allclose(gehan_subgradient([0.2, 0.5], [True, False]), [1.0, -1.0])


def test_subgradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    res = rng.normal(size=10)
    events = np.array([True, False] * 5)
    analytic = gehan_subgradient(res, events)
    h = 1e-6
    numeric = np.empty(10)
    for k in range(10):
        step = np.zeros(10)
        step[k] = h
        # residual e = log Y - prediction, so raising the prediction lowers e
        numeric[k] = (full_gehan_loss(res - step, events) - full_gehan_loss(res + step, events)) / (2 * h)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-6)


def test_subsample_pairs_counts():
    data = make_dataset(1000, np.ones(1000, dtype=bool))
    sample = subsample_pairs(data, 5, np.random.default_rng(0))
    assert len(sample) == 5000
    assert np.all(sample.first != sample.second)
    for i in (0, 500, 999):
        partners = sample.second[sample.first == i]
        assert len(set(partners.tolist())) == 5


def test_subsample_pairs_forced_outcome():
    data = make_dataset(3, [False, True, False])
    sample = subsample_pairs(data, 2, np.random.default_rng(3))
    assert sorted(sample.pairs) == [ResidualPair(1, 0), ResidualPair(1, 2)]


def test_subsample_pairs_inclusion_probability():
    n, s, draws = 6, 2, 10000
    data = make_dataset(n, np.ones(n, dtype=bool))
    hits = 0
    rng = np.random.default_rng(4)
    for _ in range(draws):
        sample = subsample_pairs(data, s, rng)
        hits += int(np.any((sample.first == 0) & (sample.second == 3)))
    p = s / (n - 1)
    se = np.sqrt(p * (1 - p) / draws)
    assert abs(hits / draws - p) < 3 * se


def test_subsample_pairs_rejects_bad_arguments():
    data = make_dataset(4, [True, False, False, True])
    with pytest.raises(InvalidArgumentError):
        subsample_pairs(data, 0, np.random.default_rng(0))
    with pytest.raises(InvalidArgumentError):
        subsample_pairs(data, 4, np.random.default_rng(0))
    with pytest.raises(EmptyEventError):
        subsample_pairs(make_dataset(4, np.zeros(4, dtype=bool)), 2, np.random.default_rng(0))


def test_subsample_pairs_is_deterministic_per_seed():
    data = make_dataset(50, np.arange(50) % 2 == 0)
    a = subsample_pairs(data, 3, np.random.default_rng(11))
    b = subsample_pairs(data, 3, np.random.default_rng(11))
    np.testing.assert_array_equal(a.second, b.second)


def test_minibatch_loss_examples():
    res = ResidualVector([0.1, 0.4, 0.9])
    assert minibatch_loss(res, []) == 0.0
    assert minibatch_loss(res, [ResidualPair(0, 1), ResidualPair(0, 2)]) == pytest.approx(1.1)


def test_minibatch_loss_over_all_event_pairs_equals_full_loss():
    rng = np.random.default_rng(5)
    res = rng.normal(size=15)
    events = rng.random(15) < 0.5
    pairs = [(i, j) for i, j in itertools.permutations(range(15), 2) if events[i]]
    assert minibatch_loss(res, pairs) == pytest.approx(full_gehan_loss(res, events))


def test_minibatch_loss_index_out_of_range():
    with pytest.raises(PairIndexError):
        minibatch_loss([0.1, 0.2], [(0, 2)])


def test_rescaled_subsampled_loss_is_unbiased():
    rng = np.random.default_rng(6)
    n, s = 50, 4
    events = rng.random(n) < 0.6
    data = SurvivalDataset(np.exp(rng.normal(size=n)), events, np.zeros((n, 1)))
    res = rng.normal(size=n)
    full = full_gehan_loss(res, events)
    estimates = np.array([
        (n - 1) / s * minibatch_loss(res, subsample_pairs(data, s, rng)) for _ in range(2000)
    ])
    se = estimates.std(ddof=1) / np.sqrt(len(estimates))
    assert abs(estimates.mean() - full) < 3 * se


def test_pair_subgradient_matches_full_subgradient_on_all_pairs():
    rng = np.random.default_rng(7)
    res = rng.normal(size=12)
    events = rng.random(12) < 0.5
    first, second = zip(*[(i, j) for i, j in itertools.permutations(range(12), 2) if events[i]])
    batch = (np.array(first), np.array(second))
    np.testing.assert_allclose(pair_subgradient(res, batch), gehan_subgradient(res, events))


def test_iter_minibatches_covers_every_pair_once():
    sample = PairSample(np.arange(23), np.arange(23)[::-1], s=1, source_n=23)
    blocks = list(iter_minibatches(sample, 5, np.random.default_rng(0)))
    assert [len(first) for first, _ in blocks] == [5, 5, 5, 5, 3]
    seen = np.sort(np.concatenate([first for first, _ in blocks]))
    np.testing.assert_array_equal(seen, np.arange(23))


def test_iter_minibatches_rejects_bad_batch_size():
    sample = PairSample(np.arange(3), np.arange(3), s=1, source_n=3)
    with pytest.raises(InvalidArgumentError):
        list(iter_minibatches(sample, 0, np.random.default_rng(0)))
