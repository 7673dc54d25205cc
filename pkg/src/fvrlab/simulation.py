import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
import scipy.linalg
from joblib import Parallel, delayed
from tqdm.autonotebook import tqdm

from fvrlab import constants, utils
from fvrlab.criteria import full_model_false_count, projected_false_count
from fvrlab.errors import FactorizationError, InvalidArgumentError, InvalidDesignError
from fvrlab.estimator import EstimatorConfig, fvr_estimate, selection_size
from fvrlab.population_model import PopulationModel
from fvrlab.selection import Dataset, forward_stepwise

TOY_GENES = ["A", "B1", "B2", "B3", "C1", "C2", "C3", "D"]


@dataclass
class BlockDesign:
    """
    Block-diagonal equicorrelated design; the first variable of each of the
    first n_signal blocks carries signal_coef.
    """

    n: int
    n_blocks: int
    block_size: int
    n_signal: int
    rho: float
    sigma_eps: float
    signal_coef: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ["n", "n_blocks", "block_size"]:
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidDesignError(
                    f"{name} must be a positive integer, got {value}"
                )
        if self.n < 3:
            raise InvalidDesignError(f"n must be at least 3, got {self.n}")
        in_range = 0 <= self.n_signal <= self.n_blocks
        if int(self.n_signal) != self.n_signal or not in_range:
            raise InvalidDesignError(
                f"n_signal must lie in 0..{self.n_blocks}, got {self.n_signal}"
            )
        if not 0 <= self.rho < 1:
            raise InvalidDesignError(f"rho must lie in [0, 1), got {self.rho}")
        if not self.sigma_eps >= 0:
            raise InvalidDesignError(
                f"sigma_eps must be nonnegative, got {self.sigma_eps}"
            )

    @property
    def p(self):
        return self.n_blocks * self.block_size


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    curves: pd.DataFrame
    per_rep: dict
    reps: int
    master_seed: int
    design: BlockDesign = None
    estimator: EstimatorConfig = None
    elapsed: float = field(default=0.0, compare=False)

    def to_csv(self, path):
        utils.save_results(self.curves, path)


def generate_block_design(design: BlockDesign) -> PopulationModel:
    design.validate()
    block = np.full((design.block_size, design.block_size), float(design.rho))
    np.fill_diagonal(block, 1.0)
    sigma = scipy.linalg.block_diag(*([block] * design.n_blocks))
    beta = np.zeros(design.p)
    beta[np.arange(design.n_signal) * design.block_size] = design.signal_coef
    return PopulationModel(sigma=sigma, beta=beta, sigma_eps=design.sigma_eps)


def toy_gene_model(rho=0.9, sigma_eps=1.0) -> PopulationModel:
    """
    Eight genes A, B1-B3, C1-C3, D; A and B1 drive the outcome, the B and C
    groups are equicorrelated with correlation rho.
    """
    group = np.full((3, 3), float(rho))
    np.fill_diagonal(group, 1.0)
    sigma = scipy.linalg.block_diag(np.eye(1), group, group, np.eye(1))
    beta = np.zeros(len(TOY_GENES))
    beta[TOY_GENES.index("A")] = 1.0
    beta[TOY_GENES.index("B1")] = 1.0
    return PopulationModel(sigma=sigma, beta=beta, sigma_eps=sigma_eps)


def sample_dataset(model: PopulationModel, n, rng) -> Dataset:
    """
    n draws of X ~ N(0, sigma) through the symmetric square root of sigma,
    with y = intercept + X beta + N(0, sigma_eps^2) noise.
    """
    if n < 2:
        raise InvalidArgumentError(f"n must be at least 2, got {n}")
    root = model.sqrt_sigma
    if not np.all(np.isfinite(root)):
        raise FactorizationError("sample_dataset", "square root of sigma is not finite")
    x = rng.standard_normal((n, model.p)) @ root
    noise = rng.standard_normal(n)
    y = model.intercept + x @ model.beta + model.sigma_eps * noise
    return Dataset(x, y)


def _prefix_rates(model, path, k_max):
    fdp = np.full(k_max, np.nan)
    fvp = np.full(k_max, np.nan)
    for k in range(1, min(len(path), k_max) + 1):
        prefix = path.prefix(k)
        fdp[k - 1] = full_model_false_count(model, prefix).rate
        fvp[k - 1] = projected_false_count(model, prefix).rate
    return fdp, fvp


def _truth_rep(model, n, k_max, master_seed, rep):
    rng = utils.rep_rng(master_seed, rep)
    data = sample_dataset(model, n, rng)
    path = forward_stepwise(data, min(k_max, n - 2))
    fdp, fvp = _prefix_rates(model, path, k_max)
    return {"fdr_true": fdp, "fvr_true_full": fvp}


def _experiment_rep(model, n, estimator_cfg, k_max, master_seed, rep):
    rng = utils.rep_rng(master_seed, rep)
    data = sample_dataset(model, n, rng)

    path = forward_stepwise(data, min(k_max, n - 2))
    fdp, fvp = _prefix_rates(model, path, k_max)

    half_rows = rng.permutation(n)[: selection_size(n, estimator_cfg.split_fraction)]
    half_path = forward_stepwise(
        data.take(half_rows), max(0, min(k_max, len(half_rows) - 2))
    )
    _, fvp_half = _prefix_rates(model, half_path, k_max)

    config = replace(estimator_cfg, seed=int(rng.integers(2**63)))
    curve = fvr_estimate(data, config, k_max)
    return {
        "fdr_true": fdp,
        "fvr_true_full": fvp,
        "fvr_true_half": fvp_half,
        "fvr_est": curve.estimate,
        "fvr_est_clipped": curve.clipped,
    }


def _run_reps(worker, reps, n_jobs, progress_bar, **kwargs):
    indices = tqdm(range(reps), desc="rep", disable=not progress_bar)
    if n_jobs == 1:
        return [worker(rep=rep, **kwargs) for rep in indices]
    jobs = (delayed(worker)(rep=rep, **kwargs) for rep in indices)
    return Parallel(n_jobs=n_jobs)(jobs)


def _setup_results(per_rep, k_max):
    """
    Aggregated curves in CSV column order; columns without per-rep values are NaN.
    """
    empty = np.full(k_max, np.nan)
    results = {"k": np.arange(1, k_max + 1)}
    for name, se_name in [
        ("fdr_true", "fdr_se"),
        ("fvr_true_full", "fvr_full_se"),
        ("fvr_true_half", "fvr_half_se"),
        ("fvr_est", "fvr_est_se"),
    ]:
        if name in per_rep:
            results[name], results[se_name], _ = utils.mean_and_se(per_rep[name])
        else:
            results[name], results[se_name] = empty, empty
    if "fvr_est_clipped" in per_rep:
        results["fvr_est_clipped"] = utils.mean_and_se(per_rep["fvr_est_clipped"])[0]
    else:
        results["fvr_est_clipped"] = empty
    results["n_reps_at_k"] = utils.mean_and_se(per_rep["fdr_true"])[2]
    return pd.DataFrame(results, columns=constants.CSV_COLUMNS)


def _collect(results):
    return {
        name: np.vstack([result[name] for result in results]) for name in results[0]
    }


def _check_run(k_max, p, reps):
    if int(k_max) != k_max or not 1 <= k_max <= p:
        raise InvalidArgumentError(f"k_max={k_max} outside 1..{p}")
    if int(reps) != reps or reps < 1:
        raise InvalidArgumentError(f"reps must be a positive integer, got {reps}")


def true_rate_curves(
    model: PopulationModel, n, k_max, reps, master_seed, n_jobs=1, progress_bar=False
) -> pd.DataFrame:
    """
    Monte Carlo FDR (full model) and FVR (projected model) of forward
    stepwise selection at sample size n, per model size k.
    """
    _check_run(k_max, model.p, reps)
    if n < 3:
        raise InvalidArgumentError(f"n must be at least 3, got {n}")
    logging.info(f"starting {reps} truth reps, n={n}, p={model.p}, k_max={k_max}")
    start = time.time()
    results = _run_reps(
        _truth_rep,
        reps,
        n_jobs,
        progress_bar,
        model=model,
        n=n,
        k_max=k_max,
        master_seed=master_seed,
    )
    curves = _setup_results(_collect(results), k_max)
    logging.info(f"finished truth reps, took {(time.time() - start) / 60:.3f} minutes")
    return curves


def run_experiment(
    design: BlockDesign,
    estimator_cfg: EstimatorConfig,
    k_max,
    reps,
    master_seed,
    n_jobs=1,
    progress_bar=False,
) -> MonteCarloResult:
    """
    Per rep: true FDR/FVR at full n, true FVR for selection on a random half,
    and the split-sample FVR estimate, all from one sampled dataset.
    """
    model = generate_block_design(design)
    _check_run(k_max, model.p, reps)
    logging.info(f"starting {reps} experiment reps for {design} with {estimator_cfg}")
    start = time.time()
    results = _run_reps(
        _experiment_rep,
        reps,
        n_jobs,
        progress_bar,
        model=model,
        n=design.n,
        estimator_cfg=estimator_cfg,
        k_max=k_max,
        master_seed=master_seed,
    )
    per_rep = _collect(results)
    elapsed = time.time() - start
    logging.info(f"finished experiment reps, took {elapsed / 60:.3f} minutes")
    return MonteCarloResult(
        curves=_setup_results(per_rep, k_max),
        per_rep=per_rep,
        reps=reps,
        master_seed=master_seed,
        design=design,
        estimator=estimator_cfg,
        elapsed=elapsed,
    )
