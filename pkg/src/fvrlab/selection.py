import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import stats
from sklearn.utils import check_X_y

from fvrlab import constants
from fvrlab.criteria import SelectedSet
from fvrlab.errors import (
    InsufficientHoldoutError,
    InvalidArgumentError,
    InvalidDatasetError,
)


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        try:
            x, y = check_X_y(
                self.x,
                self.y,
                dtype=np.float64,
                copy=True,
                ensure_min_samples=2,
                y_numeric=True,
            )
        except ValueError as err:
            raise InvalidDatasetError(str(err)) from err
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    def take(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.x[rows], self.y[rows])


@dataclass(frozen=True)
class SelectionPath:
    """
    Variables in the order stepwise selection added them.

    rss[0] is the total sum of squares about the mean and rss[j] the residual
    sum of squares after j steps.
    """

    order: tuple
    rss: tuple
    p: int

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        if len(set(order)) != len(order):
            raise InvalidArgumentError(f"path repeats variables: {order}")
        if len(self.rss) != len(order) + 1:
            raise InvalidArgumentError(
                "rss needs one entry per step plus the intercept-only fit"
            )
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "rss", tuple(float(value) for value in self.rss))

    def __len__(self):
        return len(self.order)

    def prefix(self, k) -> SelectedSet:
        if not 0 <= k <= len(self):
            raise InvalidArgumentError(f"k={k} outside 0..{len(self)}")
        return SelectedSet(self.order[:k])


@dataclass(frozen=True, eq=False)
class PValueSequence:
    p_values: np.ndarray
    f_statistics: np.ndarray = field(default=None)

    def __post_init__(self):
        p_values = np.atleast_1d(np.array(self.p_values, dtype=float))
        if p_values.ndim != 1 or np.any(~((p_values >= 0) & (p_values <= 1))):
            raise InvalidArgumentError(
                "p-values must be a vector with entries in [0, 1]"
            )
        p_values.setflags(write=False)
        object.__setattr__(self, "p_values", p_values)

    def __len__(self):
        return len(self.p_values)


def residual_sum_of_squares(x, y):
    """
    RSS of the least-squares fit of y on an intercept and the columns of x.

    QR with column pivoting; columns whose pivot falls below COLLINEAR_TOL
    relative to the largest pivot are dropped as collinear.
    """
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones(len(y)), np.asarray(x, dtype=float)])
    q, r, _ = scipy.linalg.qr(design, mode="economic", pivoting=True)
    pivots = np.abs(np.diag(r))
    rank = int(np.sum(pivots > constants.COLLINEAR_TOL * pivots[0]))
    basis = q[:, :rank]
    residual = y - basis @ (basis.T @ y)
    return float(residual @ residual)


def forward_stepwise(data: Dataset, max_steps=None) -> SelectionPath:
    """
    Greedy forward selection with an intercept: each step adds the variable
    with the largest drop in residual sum of squares, smallest index on ties.
    """
    limit = min(data.p, data.n - 2)
    if max_steps is None:
        max_steps = limit
    if not 0 <= max_steps <= limit:
        raise InvalidArgumentError(
            f"max_steps={max_steps} outside 0..min(p, n - 2) = {limit}"
        )

    x = data.x - data.x.mean(axis=0)
    residual = data.y - data.y.mean()
    tss = float(residual @ residual)
    column_norms = np.sum(x**2, axis=0)

    # columns of z stay orthogonal to the intercept and every selected variable
    z = x.copy()
    available = np.ones(data.p, dtype=bool)
    order = []
    rss = [tss]
    for step in range(max_steps):
        z_norms = np.sum(z**2, axis=0)
        candidates = available & (z_norms > constants.COLLINEAR_TOL * column_norms)
        if not candidates.any():
            logging.warning(
                f"stepwise stopped after {step} steps: "
                "remaining variables are collinear"
            )
            break

        reduction = np.full(data.p, -np.inf)
        projections = z[:, candidates].T @ residual
        reduction[candidates] = projections**2 / z_norms[candidates]
        best = int(np.argmax(reduction))
        if reduction[best] <= constants.COLLINEAR_TOL * tss:
            logging.warning(
                f"stepwise stopped after {step} steps: no variable reduces the RSS"
            )
            break

        direction = z[:, best] / np.sqrt(z_norms[best])
        residual = residual - direction * (direction @ residual)
        z = z - np.outer(direction, direction @ z)
        available[best] = False
        order.append(best)
        rss.append(min(rss[-1], float(residual @ residual)))

    return SelectionPath(tuple(order), tuple(rss), data.p)


def incremental_pvalues(
    path: SelectionPath, holdout: Dataset, k=None
) -> PValueSequence:
    """
    p-values of the nested F tests along the path, computed on held-out data.

    Step j compares the fits on the first j - 1 and the first j variables,
    both with an intercept, against F(1, n - j - 1).
    """
    if holdout.p != path.p:
        raise InvalidArgumentError(
            f"holdout has {holdout.p} variables, path was fit on {path.p}"
        )
    k = len(path) if k is None else k
    if not 0 <= k <= len(path):
        raise InvalidArgumentError(f"k={k} outside 0..{len(path)}")
    if holdout.n - k - 1 <= 0:
        raise InsufficientHoldoutError(
            "incremental_pvalues",
            f"holdout of {holdout.n} rows leaves no residual degrees of freedom "
            f"at step {k}",
        )

    previous = residual_sum_of_squares(holdout.x[:, []], holdout.y)
    tss = previous
    p_values = np.empty(k)
    f_statistics = np.empty(k)
    for j in range(1, k + 1):
        current = residual_sum_of_squares(holdout.x[:, list(path.order[:j])], holdout.y)
        df = holdout.n - j - 1
        drop = previous - current
        if drop <= constants.COLLINEAR_TOL * previous:
            drop = 0.0

        if current <= constants.COLLINEAR_TOL * tss:
            f_statistics[j - 1] = np.inf if drop > 0 else 0.0
            p_values[j - 1] = 0.0 if drop > 0 else 1.0
        else:
            f_statistics[j - 1] = drop / (current / df)
            p_values[j - 1] = stats.f.sf(f_statistics[j - 1], 1, df)
        previous = current

    return PValueSequence(p_values, f_statistics)
