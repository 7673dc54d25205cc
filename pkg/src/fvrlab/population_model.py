import logging
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import networkx as nx
import numpy as np
import scipy.linalg

from fvrlab import constants
from fvrlab.errors import (
    DegenerateGraphError,
    DegenerateProjectionError,
    EnumerationCapError,
    InvalidModelError,
    InvalidSelectionError,
    SingularMatrixError,
)


def zero_tolerance(values):
    """
    Threshold below which an entry of `values` counts as zero, relative to
    the largest absolute entry.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    return constants.ZERO_TOL * float(np.max(np.abs(values)))


def selection_indices(selected, p):
    """
    Validated tuple of 0-based indices from a SelectedSet or any sequence of ints.
    """
    indices = tuple(int(i) for i in getattr(selected, "indices", selected))
    if len(set(indices)) != len(indices):
        raise InvalidSelectionError(f"duplicate indices in selection {indices}")
    outside = [i for i in indices if not 0 <= i < p]
    if outside:
        raise InvalidSelectionError(f"indices {outside} outside 0..{p - 1}")
    return indices


def is_well_conditioned(matrix):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return True
    eigenvalues = np.linalg.eigvalsh(matrix)
    if eigenvalues[0] <= 0:
        return False
    return eigenvalues[-1] <= constants.MAX_CONDITION * eigenvalues[0]


def symmetric_inverse(matrix, operation="symmetric_inverse"):
    """
    Inverse of a symmetric positive definite matrix.

    Cholesky first, eigendecomposition if the factorization breaks down.
    Matrices with condition number above MAX_CONDITION are treated as singular.
    """
    matrix = np.asarray(matrix, dtype=float)
    if not is_well_conditioned(matrix):
        raise SingularMatrixError(
            operation,
            f"{matrix.shape[0]}x{matrix.shape[0]} matrix is singular or has "
            f"condition number above {constants.MAX_CONDITION:.0e}",
        )
    try:
        factor = scipy.linalg.cho_factor(matrix)
        inverse = scipy.linalg.cho_solve(factor, np.eye(matrix.shape[0]))
    except np.linalg.LinAlgError:
        eigenvalues, eigenvectors = np.linalg.eigh(matrix)
        inverse = (eigenvectors / eigenvalues) @ eigenvectors.T
    return (inverse + inverse.T) / 2


def sparsest_solutions(gram, target, tol, operation):
    """
    Yields (support, coefficients) for every smallest support S with
    gram[:, S] @ coefficients[S] == target up to `tol`, in lexicographic order
    of S. Supports index into the rows of `gram`.
    """
    size = gram.shape[0]
    if size > constants.SUBSET_ENUMERATION_CAP:
        raise EnumerationCapError(
            operation,
            f"{size} variables exceed the subset enumeration cap of "
            f"{constants.SUBSET_ENUMERATION_CAP}",
        )
    for support_size in range(size + 1):
        found = False
        for support in combinations(range(size), support_size):
            coefficients = np.zeros(size)
            columns = list(support)
            if columns:
                block = gram[np.ix_(columns, columns)]
                if not is_well_conditioned(block):
                    continue
                coefficients[columns] = scipy.linalg.solve(
                    block, target[columns], assume_a="pos"
                )
            residual = gram[:, columns] @ coefficients[columns] - target
            if np.max(np.abs(residual), initial=0.0) <= tol:
                found = True
                yield support, coefficients
        if found:
            return


@dataclass(frozen=True, eq=False)
class PopulationModel:
    """
    Gaussian linear model y = intercept + X beta + eps with X ~ N(0, sigma)
    and eps ~ N(0, sigma_eps^2).
    """

    sigma: np.ndarray
    beta: np.ndarray
    sigma_eps: float = 1.0
    intercept: float = 0.0

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        beta = np.atleast_1d(np.array(self.beta, dtype=float))

        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] == 0:
            raise InvalidModelError(
                f"sigma must be a nonempty square matrix, got shape {sigma.shape}"
            )
        if beta.ndim != 1 or beta.shape[0] != sigma.shape[0]:
            raise InvalidModelError(
                f"beta has shape {beta.shape}, "
                f"expected ({sigma.shape[0]},) to match sigma"
            )
        if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(beta))):
            raise InvalidModelError("sigma and beta must be finite")

        scale = float(np.max(np.abs(sigma)))
        if np.max(np.abs(sigma - sigma.T)) > constants.SYMMETRY_TOL * scale:
            raise InvalidModelError("sigma is not symmetric")
        eigenvalues = np.linalg.eigvalsh(sigma)
        if eigenvalues[0] < -constants.PSD_TOL * max(eigenvalues[-1], 0.0):
            raise InvalidModelError(
                "sigma is not positive semidefinite "
                f"(smallest eigenvalue {eigenvalues[0]:.3g})"
            )

        sigma_eps = float(self.sigma_eps)
        if not np.isfinite(sigma_eps) or sigma_eps < 0:
            raise InvalidModelError(
                f"sigma_eps must be finite and nonnegative, got {sigma_eps}"
            )

        sigma.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma_eps", sigma_eps)
        object.__setattr__(self, "intercept", float(self.intercept))

    @classmethod
    def from_precision(cls, omega, intercept=0.0):
        """
        Model whose joint (X, y) precision matrix is `omega`, y in the last row.
        """
        omega = np.asarray(omega, dtype=float)
        p = omega.shape[0] - 1
        covariance = symmetric_inverse(omega, "from_precision")
        return cls(
            sigma=covariance[:p, :p],
            beta=-omega[:p, p] / omega[p, p],
            sigma_eps=np.sqrt(1.0 / omega[p, p]),
            intercept=intercept,
        )

    @property
    def p(self):
        return self.sigma.shape[0]

    @cached_property
    def cov_xy(self):
        cov = self.sigma @ self.beta
        cov.setflags(write=False)
        return cov

    @cached_property
    def var_y(self):
        return float(self.beta @ self.sigma @ self.beta) + self.sigma_eps**2

    @cached_property
    def sqrt_sigma(self):
        eigenvalues, eigenvectors = np.linalg.eigh(self.sigma)
        scale = np.sqrt(np.clip(eigenvalues, 0.0, None))
        root = (eigenvectors * scale) @ eigenvectors.T
        root = (root + root.T) / 2
        root.setflags(write=False)
        return root


@dataclass(frozen=True, eq=False)
class AugmentedCovariance:
    """
    Joint covariance of (x_1, ..., x_p, y); y is the last row and column.
    """

    matrix: np.ndarray

    @property
    def p(self):
        return self.matrix.shape[0] - 1

    @property
    def y_index(self):
        return self.p

    def restricted(self, indices):
        rows = list(indices) + [self.y_index]
        return self.matrix[np.ix_(rows, rows)]


def build_augmented_covariance(model: PopulationModel) -> AugmentedCovariance:
    p = model.p
    matrix = np.empty((p + 1, p + 1))
    matrix[:p, :p] = model.sigma
    matrix[:p, p] = model.cov_xy
    matrix[p, :p] = model.cov_xy
    matrix[p, p] = model.var_y
    matrix.setflags(write=False)
    return AugmentedCovariance(matrix)


def projected_coefficients(model: PopulationModel, selected) -> np.ndarray:
    """
    Coefficients of the population regression of y on the selected variables.

    For a singular selected covariance the normal equations have many
    solutions; one of the sparsest is returned.
    """
    indices = selection_indices(selected, model.p)
    if not indices:
        raise InvalidSelectionError("projected_coefficients needs a nonempty selection")

    gram = model.sigma[np.ix_(indices, indices)]
    target = model.cov_xy[list(indices)]
    if is_well_conditioned(gram):
        return scipy.linalg.solve(gram, target, assume_a="pos")

    logging.info(
        f"covariance of {len(indices)} selected variables is singular, "
        "searching for the sparsest projection"
    )
    solutions = sparsest_solutions(
        gram, target, zero_tolerance(model.cov_xy), "projected_coefficients"
    )
    for _, coefficients in solutions:
        return coefficients
    raise DegenerateProjectionError(
        "projected_coefficients",
        f"no support of the {len(indices)} selected variables "
        "solves the normal equations",
    )


class DependenceGraph:
    """
    Undirected graph over variable indices and the y node; an edge means a
    nonzero partial correlation given the other nodes.
    """

    def __init__(self, graph: nx.Graph):
        self.graph = nx.freeze(graph)

    @property
    def nodes(self):
        return list(self.graph.nodes)

    @property
    def edges(self):
        return {frozenset(edge) for edge in self.graph.edges}

    def has_edge(self, i, j):
        return self.graph.has_edge(i, j)

    def neighbors_of_y(self):
        return set(self.graph.neighbors(constants.Y_NODE))

    def __repr__(self):
        edges = self.graph.number_of_edges()
        return f"DependenceGraph(nodes={len(self.graph)}, edges={edges})"


def induced_graph(model: PopulationModel, selected=None) -> DependenceGraph:
    """
    Dependence graph of the marginal distribution of the selected variables
    and y. `selected=None` gives the graph of all variables.
    """
    if selected is None:
        indices = tuple(range(model.p))
    else:
        indices = selection_indices(selected, model.p)

    restricted = build_augmented_covariance(model).restricted(indices)
    try:
        precision = symmetric_inverse(restricted, "induced_graph")
    except SingularMatrixError as err:
        raise DegenerateGraphError(
            "induced_graph",
            f"augmented covariance of {len(indices)} variables and y is singular, "
            "use minimal_subset instead",
        ) from err

    labels = list(indices) + [constants.Y_NODE]
    nonzero = np.abs(precision) > zero_tolerance(precision)
    graph = nx.Graph()
    graph.add_nodes_from(labels)
    rows, columns = np.nonzero(np.triu(nonzero, k=1))
    graph.add_edges_from((labels[i], labels[j]) for i, j in zip(rows, columns))
    return DependenceGraph(graph)


def full_graph(model: PopulationModel) -> DependenceGraph:
    return induced_graph(model, None)


def marginal_path_to_y(model: PopulationModel, j) -> bool:
    """
    Whether variable j reaches y in the full dependence graph.
    """
    return nx.has_path(full_graph(model).graph, int(j), constants.Y_NODE)
