import math

import numpy as np
import pytest

from deepr_aft.core import (
    ResidualVector, SurvivalDataset, as_values, center_predictions, intercept_offset,
    kaplan_meier_mean, log_times, residuals,
)
from deepr_aft.errors import DimensionError, EmptyEventError, InvalidArgumentError


def make_dataset(times, events, covariates=None):
    times = np.asarray(times, dtype=float)
    if covariates is None:
        covariates = np.zeros((len(times), 1))
    return SurvivalDataset(times, events, covariates)


def test_dataset_properties():
    data = make_dataset([1.0, 2.0, 3.0, 4.0], [True, False, True, False])
    assert data.n == 4
    assert data.p == 1
    assert data.n_events == 2
    assert data.censoring_rate == pytest.approx(0.5)


def test_dataset_arrays_are_read_only():
    data = make_dataset([1.0, 2.0], [True, True])
    with pytest.raises(ValueError):
        data.observed_time[0] = 5.0


def test_dataset_rejects_nonpositive_time():
    with pytest.raises(InvalidArgumentError):
        make_dataset([1.0, 0.0], [True, True])


def test_dataset_rejects_length_mismatch():
    with pytest.raises(DimensionError):
        SurvivalDataset(np.ones(3), [True, False], np.zeros((3, 2)))
    with pytest.raises(DimensionError):
        SurvivalDataset(np.ones(3), [True, False, True], np.zeros((2, 2)))


def test_subset_keeps_metadata():
    data = SurvivalDataset([1.0, 2.0, 3.0], [True, False, True], np.arange(6.0).reshape(3, 2),
                           covariate_names=("a", "b"), continuous=(True, False))
    part = data.subset([2, 0])
    assert part.covariate_names == ("a", "b")
    assert part.continuous == (True, False)
    np.testing.assert_array_equal(part.observed_time, [3.0, 1.0])
    np.testing.assert_array_equal(part.covariates, [[4.0, 5.0], [0.0, 1.0]])


def test_require_events():
    with pytest.raises(EmptyEventError):
        make_dataset([1.0, 2.0], [False, False]).require_events()


def test_log_times():
    np.testing.assert_allclose(log_times(make_dataset([1, 1, 1], [True] * 3)), [0, 0, 0])
    np.testing.assert_allclose(log_times(make_dataset([math.e, math.e ** 2], [True] * 2)), [1, 2])
    assert log_times(make_dataset([20.0], [True]))[0] == pytest.approx(2.995732, abs=1e-6)


def test_residuals_examples():
    np.testing.assert_allclose(residuals(make_dataset([1, 1], [True] * 2), [0, 0]).values, [0, 0])
    np.testing.assert_allclose(residuals(make_dataset([math.e], [True]), [1]).values, [0], atol=1e-15)
    res = residuals(make_dataset([math.e ** 2, math.e], [True, False]), [1, 0.5])
    assert isinstance(res, ResidualVector)
    np.testing.assert_allclose(res.values, [1.0, 0.5])


def test_residuals_length_mismatch():
    with pytest.raises(DimensionError):
        residuals(make_dataset([1.0, 2.0], [True, True]), [0.0])


def test_as_values_accepts_arrays_and_vectors():
    np.testing.assert_array_equal(as_values(ResidualVector([1.0, 2.0])), [1.0, 2.0])
    np.testing.assert_array_equal(as_values([1.0, 2.0]), [1.0, 2.0])
    assert len(ResidualVector([0.0, 1.0, 2.0])) == 3


def test_kaplan_meier_mean_without_censoring_is_sample_mean():
    values = np.array([0.3, -1.2, 2.5, 0.7])
    assert kaplan_meier_mean(values, np.ones(4, dtype=bool)) == pytest.approx(values.mean())


def test_kaplan_meier_mean_moves_mass_past_censored_values():
    # the censored 1.0 passes its mass on to 3.0
    assert kaplan_meier_mean(np.array([1.0, 2.0, 3.0]), np.array([False, True, True])) == pytest.approx(2.5)


def test_intercept_offset_event_mean():
    data = make_dataset([math.e, math.e ** 3, math.e ** 10], [True, True, False])
    assert intercept_offset(data, [0.0, 1.0, 0.0]) == pytest.approx(1.5)


def test_intercept_offset_unknown_method():
    data = make_dataset([1.0, 2.0], [True, True])
    with pytest.raises(InvalidArgumentError):
        intercept_offset(data, [0.0, 0.0], method="median")


def test_center_predictions_shifts_by_offset():
    data = make_dataset([math.e, math.e], [True, True])
    centred = center_predictions([0.0, 2.0, 5.0], [0.0, 0.0], data)
    np.testing.assert_allclose(centred, [1.0, 3.0, 6.0])
