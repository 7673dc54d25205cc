import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator

from fvrlab import constants, utils
from fvrlab.errors import InsufficientHoldoutError, InvalidArgumentError
from fvrlab.selection import (
    Dataset,
    PValueSequence,
    forward_stepwise,
    incremental_pvalues,
)


@dataclass
class EstimatorConfig:
    lam: float = constants.DEFAULT_LAMBDA
    n_splits: int = constants.DEFAULT_SPLITS
    split_fraction: float = constants.DEFAULT_SPLIT_FRACTION
    seed: int = 0
    lambda_grid: tuple = None  # bootstrap-calibrated lambda per model size when set
    n_boot: int = constants.DEFAULT_BOOTSTRAPS

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise InvalidArgumentError(f"lam must lie in (0, 1), got {self.lam}")
        if int(self.n_splits) != self.n_splits or self.n_splits < 1:
            raise InvalidArgumentError(
                f"n_splits must be a positive integer, got {self.n_splits}"
            )
        if not 0 < self.split_fraction < 1:
            raise InvalidArgumentError(
                f"split_fraction must lie in (0, 1), got {self.split_fraction}"
            )
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise InvalidArgumentError(
                f"seed must be an unsigned 64-bit integer, got {self.seed}"
            )
        if self.lambda_grid is not None:
            self.lambda_grid = tuple(float(value) for value in self.lambda_grid)
            in_range = all(0 < value < 1 for value in self.lambda_grid)
            if not self.lambda_grid or not in_range:
                raise InvalidArgumentError(
                    "lambda_grid must be a nonempty list of values in (0, 1)"
                )
        if int(self.n_boot) != self.n_boot or self.n_boot < 1:
            raise InvalidArgumentError(
                f"n_boot must be a positive integer, got {self.n_boot}"
            )
        self.n_splits = int(self.n_splits)
        self.seed = int(self.seed)
        self.n_boot = int(self.n_boot)


@dataclass(frozen=True, eq=False)
class FvrEstimateCurve:
    """
    Per-split FVR estimates, one row per split and one column per model size;
    NaN where the split's stepwise path stopped before that size.
    """

    per_split: np.ndarray

    @property
    def k_max(self):
        return self.per_split.shape[1]

    @property
    def split_counts(self):
        return utils.mean_and_se(self.per_split)[2]

    @property
    def estimate(self):
        return utils.mean_and_se(self.per_split)[0]

    @property
    def clipped(self):
        return np.clip(self.estimate, 0.0, 1.0)

    @property
    def standard_error(self):
        return utils.mean_and_se(self.per_split)[1]

    def to_frame(self):
        return pd.DataFrame(
            {
                "k": np.arange(1, self.k_max + 1),
                "fvr_est": self.estimate,
                "fvr_est_se": self.standard_error,
                "fvr_est_clipped": self.clipped,
                "n_splits_at_k": self.split_counts,
            }
        )


def _p_values(pvals):
    return np.asarray(getattr(pvals, "p_values", pvals), dtype=float)


def threshold_estimate(pvals: PValueSequence, k, lam) -> float:
    """
    Estimated number of null hypotheses among the first k: #{p_j > lam} / (1 - lam).
    """
    if not 0 < lam < 1:
        raise InvalidArgumentError(f"lambda must lie in (0, 1), got {lam}")
    values = _p_values(pvals)
    if not 0 <= k <= len(values):
        raise InvalidArgumentError(f"k={k} outside 0..{len(values)}")
    return np.count_nonzero(values[:k] > lam) / (1 - lam)


def bootstrap_lambda(pvals: PValueSequence, k, grid, n_boot, rng) -> float:
    """
    Threshold from `grid` minimising the bootstrap mean squared distance of
    the threshold estimate to its minimum over the grid; smallest on ties.
    """
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0 or np.any((grid <= 0) | (grid >= 1)):
        raise InvalidArgumentError("grid must be a nonempty list of values in (0, 1)")
    if n_boot < 1:
        raise InvalidArgumentError(f"n_boot must be positive, got {n_boot}")
    values = _p_values(pvals)
    if not 1 <= k <= len(values):
        raise InvalidArgumentError(f"k={k} outside 1..{len(values)}")

    sample = values[:k]
    floor = min(threshold_estimate(sample, k, lam) for lam in grid)
    resamples = rng.choice(sample, size=(n_boot, k), replace=True)
    estimates = np.sum(resamples[:, :, None] > grid, axis=1) / (1 - grid)
    mse = np.mean((estimates - floor) ** 2, axis=0)
    return float(grid[np.argmin(mse)])


def selection_size(n, split_fraction):
    """
    Rows used for selection; the odd row goes to the selection half.
    """
    return math.ceil(n * split_fraction)


def split_rng(seed, index):
    return np.random.default_rng((seed + index) % 2**64)


def single_split_estimate(
    data: Dataset, config: EstimatorConfig, rng, k_max
) -> np.ndarray:
    """
    FVR estimates for model sizes 1..k_max from one random split: stepwise
    on one part, nested-model p-values on the other.
    """
    if data.n < 4:
        raise InvalidArgumentError(f"need at least 4 rows to split, got {data.n}")
    if not 1 <= k_max <= data.p:
        raise InvalidArgumentError(f"k_max={k_max} outside 1..{data.p}")
    n_select = selection_size(data.n, config.split_fraction)
    n_holdout = data.n - n_select
    if n_holdout - k_max - 1 <= 0:
        raise InsufficientHoldoutError(
            "single_split_estimate",
            f"holdout of {n_holdout} rows is too small for k_max={k_max}",
        )

    rows = rng.permutation(data.n)
    selection = data.take(rows[:n_select])
    holdout = data.take(rows[n_select:])

    path = forward_stepwise(selection, max(0, min(k_max, n_select - 2)))
    pvals = incremental_pvalues(path, holdout, len(path))

    estimates = np.full(k_max, np.nan)
    for k in range(1, len(path) + 1):
        if config.lambda_grid is None:
            lam = config.lam
        else:
            lam = bootstrap_lambda(pvals, k, config.lambda_grid, config.n_boot, rng)
        estimates[k - 1] = threshold_estimate(pvals, k, lam) / k
    return estimates


def fvr_estimate(data: Dataset, config: EstimatorConfig, k_max) -> FvrEstimateCurve:
    per_split = [
        single_split_estimate(data, config, split_rng(config.seed, index), k_max)
        for index in range(config.n_splits)
    ]
    return FvrEstimateCurve(np.vstack(per_split))


class FvrEstimator(BaseEstimator):
    """
    Split-sample FVR estimate for forward stepwise selection on (X, y).
    """

    def __init__(
        self,
        k_max=10,
        lam=constants.DEFAULT_LAMBDA,
        n_splits=constants.DEFAULT_SPLITS,
        split_fraction=constants.DEFAULT_SPLIT_FRACTION,
        seed=0,
        lambda_grid=None,
        n_boot=constants.DEFAULT_BOOTSTRAPS,
    ):
        self.k_max = k_max
        self.lam = lam
        self.n_splits = n_splits
        self.split_fraction = split_fraction
        self.seed = seed
        self.lambda_grid = lambda_grid
        self.n_boot = n_boot

    def fit(self, X, y):
        config = EstimatorConfig(
            lam=self.lam,
            n_splits=self.n_splits,
            split_fraction=self.split_fraction,
            seed=self.seed,
            lambda_grid=self.lambda_grid,
            n_boot=self.n_boot,
        )
        self.curve_ = fvr_estimate(Dataset(X, y), config, self.k_max)
        self.estimate_ = self.curve_.estimate
        return self
