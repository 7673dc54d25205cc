import unittest

import numpy as np
import pytest
from sklearn.base import clone

from fvrlab.criteria import incremental_null_flags
from fvrlab.errors import InsufficientHoldoutError, InvalidArgumentError
from fvrlab.estimator import (
    EstimatorConfig,
    FvrEstimateCurve,
    FvrEstimator,
    bootstrap_lambda,
    fvr_estimate,
    selection_size,
    single_split_estimate,
    split_rng,
    threshold_estimate,
)
from fvrlab.selection import (
    Dataset,
    PValueSequence,
    forward_stepwise,
    incremental_pvalues,
)
from fvrlab.simulation import BlockDesign, generate_block_design, sample_dataset
from fvrlab.utils import mean_and_se


def null_data(n=200, p=5, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.standard_normal((n, p)), rng.standard_normal(n))


def strong_data(n=200, p=5, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    return Dataset(x, 5.0 * x[:, 0] + rng.standard_normal(n))


@pytest.mark.parametrize(
    "k, lam, expected",
    [
        (4, 0.5, 4.0),
        (2, 0.5, 2.0),
        (4, 0.25, 3 / 0.75),
        (0, 0.5, 0.0),
    ],
)
def test_threshold_estimate(k, lam, expected):
    pvals = PValueSequence([0.1, 0.6, 0.9, 0.3])
    assert threshold_estimate(pvals, k, lam) == pytest.approx(expected)


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.2])
def test_threshold_estimate_rejects_lambda(lam):
    with pytest.raises(InvalidArgumentError):
        threshold_estimate([0.5], 1, lam)


def test_bootstrap_lambda_prefers_smallest_on_ties():
    rng = np.random.default_rng(0)
    assert bootstrap_lambda(np.full(6, 0.01), 6, [0.8, 0.2, 0.5], 50, rng) == 0.2


def test_bootstrap_lambda_returns_grid_value():
    rng = np.random.default_rng(1)
    pvals = np.random.default_rng(2).uniform(size=10)
    assert bootstrap_lambda(pvals, 10, [0.3, 0.5, 0.7], 100, rng) in (0.3, 0.5, 0.7)


def test_bootstrap_lambda_single_grid_value():
    pvals = np.random.default_rng(4).uniform(size=8)
    assert bootstrap_lambda(pvals, 8, [0.35], 10, np.random.default_rng(5)) == 0.35


def test_bootstrap_lambda_strong_signals_keep_smallest():
    # every estimate is zero, so all thresholds tie
    rng = np.random.default_rng(6)
    pvals = np.full(10, 1e-8)
    assert bootstrap_lambda(pvals, 10, [0.2, 0.4, 0.6, 0.8], 100, rng) == 0.2


@pytest.mark.parametrize("n_signal, low, high", [(0, 15.0, 22.0), (10, 7.5, 11.0)])
def test_bootstrap_lambda_estimates_the_null_count(n_signal, low, high):
    # 20 p-values, the first n_signal from strong signals, the rest uniform nulls
    rng = np.random.default_rng(12)
    grid = [0.2, 0.4, 0.6, 0.8]
    estimates = []
    for _ in range(200):
        pvals = np.concatenate(
            [np.full(n_signal, 1e-8), rng.uniform(size=20 - n_signal)]
        )
        lam = bootstrap_lambda(pvals, 20, grid, 200, rng)
        estimates.append(threshold_estimate(pvals, 20, lam))
    assert low <= np.mean(estimates) <= high


def test_selection_size_gives_odd_row_to_selection():
    assert selection_size(101, 0.5) == 51
    assert selection_size(100, 0.5) == 50


class TestEstimatorConfig(unittest.TestCase):
    def test_defaults(self):
        config = EstimatorConfig()
        self.assertEqual(
            (config.lam, config.n_splits, config.split_fraction), (0.5, 50, 0.5)
        )

    def test_rejects_bad_values(self):
        for kwargs in [
            {"lam": 1.0},
            {"n_splits": 0},
            {"split_fraction": 1.0},
            {"seed": -1},
            {"lambda_grid": [0.5, 1.2]},
            {"n_boot": 0},
        ]:
            with self.assertRaises(InvalidArgumentError):
                EstimatorConfig(**kwargs)


class TestSingleSplit(unittest.TestCase):
    def test_strong_signal_first_step_is_not_null(self):
        config = EstimatorConfig()
        estimates = single_split_estimate(strong_data(), config, split_rng(0, 0), 3)
        self.assertEqual(estimates.shape, (3,))
        self.assertEqual(estimates[0], 0.0)

    def test_short_path_leaves_nan(self):
        rng = np.random.default_rng(3)
        column = rng.standard_normal(40)
        data = Dataset(
            np.column_stack([column, column, column]), column + rng.standard_normal(40)
        )
        estimates = single_split_estimate(data, EstimatorConfig(), split_rng(0, 0), 3)
        self.assertFalse(np.isnan(estimates[0]))
        self.assertTrue(np.all(np.isnan(estimates[1:])))

    def test_small_holdout_is_rejected(self):
        data = null_data(n=10, p=6)
        with self.assertRaises(InsufficientHoldoutError):
            single_split_estimate(data, EstimatorConfig(), split_rng(0, 0), 5)

    def test_bootstrap_grid(self):
        config = EstimatorConfig(lambda_grid=[0.3, 0.5, 0.7], n_boot=20)
        estimates = single_split_estimate(null_data(), config, split_rng(1, 0), 3)
        self.assertTrue(np.all(estimates >= 0))


def test_fvr_estimate_is_reproducible():
    config = EstimatorConfig(n_splits=5, seed=42)
    first = fvr_estimate(strong_data(), config, 3)
    second = fvr_estimate(strong_data(), config, 3)
    np.testing.assert_array_equal(first.per_split, second.per_split)
    assert first.per_split.shape == (5, 3)
    assert first.to_frame().columns.tolist() == [
        "k",
        "fvr_est",
        "fvr_est_se",
        "fvr_est_clipped",
        "n_splits_at_k",
    ]


def test_one_split_is_the_single_split_estimate():
    config = EstimatorConfig(n_splits=1, seed=17)
    data = strong_data(seed=3)
    curve = fvr_estimate(data, config, 4)
    expected = single_split_estimate(data, config, split_rng(17, 0), 4)
    np.testing.assert_array_equal(curve.per_split[0], expected)
    np.testing.assert_array_equal(curve.estimate, expected)


def test_curve_views():
    curve = FvrEstimateCurve(np.array([[0.0, 2.0], [1.0, np.nan]]))
    np.testing.assert_allclose(curve.estimate, [0.5, 2.0])
    np.testing.assert_allclose(curve.clipped, [0.5, 1.0])
    np.testing.assert_array_equal(curve.split_counts, [2, 1])
    assert np.isnan(curve.standard_error[1])
    assert curve.k_max == 2


def test_null_estimate_is_within_three_standard_errors_of_one():
    per_k = []
    for seed in range(100):
        config = EstimatorConfig(n_splits=10, seed=seed)
        per_k.append(fvr_estimate(null_data(p=8, seed=seed), config, 5).estimate)
    mean, se, counts = mean_and_se(np.vstack(per_k))
    np.testing.assert_array_equal(counts, 100)
    assert np.all(np.abs(mean - 1.0) <= 3 * se)


def test_sklearn_estimator():
    estimator = FvrEstimator(k_max=3, n_splits=4, seed=9)
    assert clone(estimator).get_params()["n_splits"] == 4
    data = strong_data()
    fitted = estimator.fit(data.x, data.y)
    assert fitted is estimator
    assert estimator.estimate_.shape == (3,)
    np.testing.assert_array_equal(
        estimator.estimate_,
        fvr_estimate(data, EstimatorConfig(n_splits=4, seed=9), 3).estimate,
    )


@pytest.mark.slow
@pytest.mark.parametrize("lam", [0.3, 0.5, 0.7])
def test_expected_null_count_bounds_true_null_count(lam):
    design = BlockDesign(
        n=100, n_blocks=10, block_size=2, n_signal=4, rho=0.8, sigma_eps=1.0
    )
    model = generate_block_design(design)
    k_max = 8
    estimated, true = [], []
    for rep in range(200):
        rng = np.random.default_rng(rep)
        data = sample_dataset(model, design.n, rng)
        selection, holdout = data.take(range(50)), data.take(range(50, 100))
        path = forward_stepwise(selection, k_max)
        pvals = incremental_pvalues(path, holdout)
        estimated.append(
            [threshold_estimate(pvals, k, lam) for k in range(1, k_max + 1)]
        )
        true.append(np.cumsum(incremental_null_flags(model, path, k_max)))
    difference = np.array(estimated) - np.array(true)
    mean = difference.mean(axis=0)
    se = difference.std(axis=0, ddof=1) / np.sqrt(len(difference))
    assert np.all(mean >= -2 * se)
