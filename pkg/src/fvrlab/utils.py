import logging
import os
from pathlib import Path

import numpy as np

from fvrlab import constants


def mean_and_se(values):
    """
    Column means, standard errors (sample sd / sqrt(count)) and counts of a
    2-d array, ignoring NaN cells. Columns with fewer than two values get a
    NaN standard error.
    """
    values = np.asarray(values, dtype=float)
    width = values.shape[1]
    counts = np.sum(~np.isnan(values), axis=0)
    mean = np.divide(
        np.nansum(values, axis=0), counts, out=np.full(width, np.nan), where=counts > 0
    )
    squares = np.nansum((values - mean) ** 2, axis=0)
    variance = np.divide(
        squares, counts - 1, out=np.full(width, np.nan), where=counts > 1
    )
    se = np.sqrt(variance) / np.sqrt(np.maximum(counts, 1))
    return mean, se, counts


def rep_rng(master_seed, rep):
    """
    Independent generator for Monte Carlo rep `rep`.
    """
    return np.random.default_rng(int(master_seed) ^ int(rep))


def resolve_n_jobs(threads=None):
    """
    joblib worker count from --threads, falling back to FVRLAB_THREADS;
    0 means all cores.
    """
    if threads is None:
        threads = int(os.environ.get(constants.THREADS_ENV_VAR, 1))
    threads = int(threads)
    if threads < 0:
        raise ValueError(f"threads must be nonnegative, got {threads}")
    return -1 if threads == 0 else threads


def save_results(results_pd, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    results_pd.to_csv(
        path,
        index=False,
        float_format=constants.CSV_FLOAT_FORMAT,
        lineterminator="\n",
    )
    logging.info(f"saved results to {path}")
