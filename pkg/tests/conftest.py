import numpy as np
import pytest

from fvrlab.population_model import PopulationModel
from fvrlab.simulation import BlockDesign, toy_gene_model


def table_one_sigma():
    # x3 carries all the signal, x1 and x2 both correlate with it, x4 is orthogonal
    return np.array(
        [
            [2.0, 1.0, 1.0, 0.0],
            [1.0, 2.0, 1.0, 0.0],
            [1.0, 1.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def graph_precision():
    """
    Joint precision of (x1, ..., x7, y) with edges y-1, y-3, 1-2, 1-4, 3-5, 6-7.
    """
    labels = [1, 2, 3, 4, 5, 6, 7, "y"]
    omega = np.eye(8)
    for a, b in [("y", 1), ("y", 3), (1, 2), (1, 4), (3, 5), (6, 7)]:
        i, j = labels.index(a), labels.index(b)
        omega[i, j] = omega[j, i] = -0.3
    return omega


@pytest.fixture
def table_one_model():
    return PopulationModel(
        sigma=table_one_sigma(), beta=[0.0, 0.0, 1.0, 0.0], sigma_eps=1.0
    )


@pytest.fixture
def graph_model():
    return PopulationModel.from_precision(graph_precision())


@pytest.fixture
def toy_model():
    return toy_gene_model(rho=0.9)


@pytest.fixture
def small_design():
    return BlockDesign(
        n=60, n_blocks=4, block_size=2, n_signal=2, rho=0.9, sigma_eps=0.8
    )
