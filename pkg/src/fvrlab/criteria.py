import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from fvrlab.errors import (
    DegenerateProjectionError,
    InvalidArgumentError,
    InvalidSelectionError,
    SingularMatrixError,
)
from fvrlab.population_model import (
    PopulationModel,
    build_augmented_covariance,
    selection_indices,
    sparsest_solutions,
    symmetric_inverse,
    zero_tolerance,
)


class Criterion(str, Enum):
    MARGINAL = "marginal"
    FULL = "full"
    PROJECTED = "projected"


@dataclass(frozen=True)
class SelectedSet:
    """
    Ordered set of distinct 0-based variable indices.
    """

    indices: tuple = ()

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if len(set(indices)) != len(indices):
            raise InvalidSelectionError(f"duplicate indices in selection {indices}")
        if any(i < 0 for i in indices):
            raise InvalidSelectionError(f"negative index in selection {indices}")
        object.__setattr__(self, "indices", indices)

    @classmethod
    def from_labels(cls, labels):
        """
        Selection from 1-based variable labels.
        """
        labels = [int(label) for label in labels]
        if any(label < 1 for label in labels):
            raise InvalidSelectionError(f"variable labels start at 1, got {labels}")
        return cls(tuple(label - 1 for label in labels))

    @property
    def labels(self):
        return tuple(i + 1 for i in self.indices)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, index):
        return index in self.indices


@dataclass(frozen=True)
class FalseSelectionReport:
    v: int
    size: int
    criterion: Criterion

    def __post_init__(self):
        if self.size < 1:
            raise InvalidSelectionError(
                "an empty selection has no false selection proportion"
            )
        if not 0 <= self.v <= self.size:
            raise InvalidArgumentError(f"false count {self.v} outside 0..{self.size}")

    @property
    def proportion(self) -> Fraction:
        return Fraction(self.v, self.size)

    @property
    def rate(self) -> float:
        return float(self.proportion)

    def __str__(self):
        return f"{self.criterion.value}={self.proportion}"


def _nonempty_indices(model, selected):
    indices = selection_indices(selected, model.p)
    if not indices:
        raise InvalidSelectionError(
            "an empty selection has no false selection proportion"
        )
    return indices


def marginal_false_count(model: PopulationModel, selected) -> FalseSelectionReport:
    """
    A selected variable is false when it is uncorrelated with y.
    """
    indices = _nonempty_indices(model, selected)
    cov = model.cov_xy
    false = np.abs(cov[list(indices)]) <= zero_tolerance(cov)
    return FalseSelectionReport(int(np.sum(false)), len(indices), Criterion.MARGINAL)


def full_model_false_count(model: PopulationModel, selected) -> FalseSelectionReport:
    """
    A selected variable is false when its coefficient in the full model is zero.
    """
    indices = _nonempty_indices(model, selected)
    false = np.abs(model.beta[list(indices)]) <= zero_tolerance(model.beta)
    return FalseSelectionReport(int(np.sum(false)), len(indices), Criterion.FULL)


def _precision_zeros(model, indices, operation):
    restricted = build_augmented_covariance(model).restricted(indices)
    precision = symmetric_inverse(restricted, operation)
    y_row = precision[-1, :-1]
    return np.abs(y_row) <= zero_tolerance(precision)


def _precision_false_count(model, indices):
    return int(np.sum(_precision_zeros(model, indices, "projected_false_count")))


def projected_false_count(model: PopulationModel, selected) -> FalseSelectionReport:
    """
    A selected variable is false when its coefficient is zero in the model
    projected onto the selected variables.

    Reads the zeros of the y row of the inverse augmented covariance on the
    selection; when that matrix is singular, counts the variables outside a
    minimal subset instead.
    """
    indices = _nonempty_indices(model, selected)
    try:
        v = _precision_false_count(model, indices)
    except SingularMatrixError:
        logging.info(
            f"augmented covariance on {len(indices)} selected variables is singular, "
            "counting through the minimal subset"
        )
        v = len(indices) - len(minimal_subset(model, indices))
    return FalseSelectionReport(v, len(indices), Criterion.PROJECTED)


def evaluate_all(model: PopulationModel, selected):
    return {
        Criterion.MARGINAL: marginal_false_count(model, selected),
        Criterion.FULL: full_model_false_count(model, selected),
        Criterion.PROJECTED: projected_false_count(model, selected),
    }


def minimal_subsets(model: PopulationModel, selected):
    """
    Yields every smallest subset B of the selection whose projection of the
    signal equals that of the whole selection, in lexicographic order.
    """
    indices = sorted(selection_indices(selected, model.p))
    gram = model.sigma[np.ix_(indices, indices)]
    target = model.cov_xy[indices]
    found = False
    solutions = sparsest_solutions(
        gram, target, zero_tolerance(model.cov_xy), "minimal_subset"
    )
    for support, _ in solutions:
        found = True
        yield SelectedSet(tuple(indices[i] for i in support))
    if not found:
        raise DegenerateProjectionError(
            "minimal_subset",
            f"no subset of the {len(indices)} selected variables "
            "reproduces their projection",
        )


def minimal_subset(model: PopulationModel, selected) -> SelectedSet:
    return next(minimal_subsets(model, selected))


def _path_order(path):
    return tuple(int(i) for i in getattr(path, "order", path))


def misordering_count(model: PopulationModel, path, k) -> int:
    """
    Fewest noise variables that sit ahead of a minimal-subset variable in the
    first k steps of the path, minimised over all minimal subsets.
    """
    order = _path_order(path)
    if not 0 <= k <= len(order):
        raise InvalidArgumentError(f"k={k} outside 0..{len(order)}")
    prefix = order[:k]
    position = {variable: step for step, variable in enumerate(prefix)}

    best = None
    for subset in minimal_subsets(model, prefix):
        if not subset:
            return 0
        last = max(position[b] for b in subset)
        t = sum(1 for variable in prefix[:last] if variable not in subset)
        best = t if best is None else min(best, t)
    return best


def incremental_null_flags(model: PopulationModel, path, k) -> np.ndarray:
    """
    flags[j - 1] is True when the j-th variable on the path has a zero
    coefficient in the model projected onto the first j variables, read
    the same way as projected_false_count. On a singular selection the
    variable is null when some minimal subset leaves it out.
    """
    order = _path_order(path)
    if not 0 <= k <= len(order):
        raise InvalidArgumentError(f"k={k} outside 0..{len(order)}")
    flags = np.zeros(k, dtype=bool)
    for j in range(1, k + 1):
        prefix = order[:j]
        try:
            zeros = _precision_zeros(model, prefix, "incremental_null_flags")
            flags[j - 1] = zeros[-1]
        except SingularMatrixError:
            flags[j - 1] = any(
                prefix[-1] not in subset for subset in minimal_subsets(model, prefix)
            )
    return flags
