import argparse
import logging
import sys
import tomllib
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import scipy.linalg

import fvrlab
from fvrlab import constants, utils
from fvrlab.criteria import SelectedSet, evaluate_all
from fvrlab.errors import ConfigError, InvalidInputError, NumericalError
from fvrlab.estimator import EstimatorConfig
from fvrlab.population_model import PopulationModel
from fvrlab.simulation import (
    BlockDesign,
    generate_block_design,
    run_experiment,
    true_rate_curves,
)

# criteria runs straight from the command line and has no run config
MODES = ["truth", "experiment"]
MODEL_KEYS = {"p", "sigma", "blocks", "beta", "sigma_eps", "intercept"}
RUN_KEYS = {
    "mode",
    "reps",
    "k_max",
    "seed",
    "out",
    "threads",
    "model",
    "n",
    "design",
    "estimator",
}


@dataclass
class RunConfig:
    mode: str
    reps: int = constants.DEFAULT_REPS
    k_max: int = 10
    seed: int = 0
    out: str = "results.csv"
    n_jobs: int = 1
    progress_bar: bool = True
    force_write_logs: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {MODES}, got {self.mode!r}")
        for key in ["reps", "k_max"]:
            value = getattr(self, key)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(key, f"must be a positive integer, got {value!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(
                "seed", f"must be an unsigned 64-bit integer, got {self.seed!r}"
            )

        output_dir = Path(self.out).parent
        output_dir.mkdir(parents=True, exist_ok=True)
        logging.basicConfig(
            format="%(asctime)s - %(message)s",
            level=logging.INFO,
            handlers=[logging.FileHandler(output_dir / constants.LOG_FILE, mode="w")],
            force=self.force_write_logs,
        )
        logging.info(
            f"fvrlab {fvrlab.__version__}, mode {self.mode}, using {self.n_jobs} jobs"
        )


@dataclass
class ExperimentConfig(RunConfig):
    design: BlockDesign = None
    estimator: EstimatorConfig = None
    model: PopulationModel = None
    n: int = None

    def __post_init__(self):
        if self.mode == "experiment" and self.design is None:
            raise ConfigError("design", "experiment mode needs a [design] section")
        if self.mode == "truth" and self.design is None:
            if self.model is None:
                raise ConfigError(
                    "design", "truth mode needs a [design] section or a model file"
                )
            if self.n is None:
                raise ConfigError(
                    "n", "truth mode with a model file needs the sample size n"
                )
        if self.estimator is None:
            self.estimator = EstimatorConfig(seed=self.seed)
        super().__post_init__()
        logging.info(f"design {self.design}, estimator {self.estimator}")

    @property
    def sample_size(self):
        return self.design.n if self.design is not None else self.n

    def population_model(self):
        if self.model is not None:
            return self.model
        return generate_block_design(self.design)


def _read_toml(path, key):
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except OSError as err:
        raise ConfigError(key, f"cannot read {path}: {err.strerror}") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(key, f"{path} is not valid TOML: {err}") from err


def _dataclass_from(cls, section, values):
    known = {f.name for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{section}.{key}", "unknown key")
    try:
        return cls(**values)
    except TypeError as err:
        missing = [f.name for f in fields(cls) if f.name not in values]
        key = missing[0] if missing else "?"
        raise ConfigError(f"{section}.{key}", str(err)) from err
    except ValueError as err:
        raise ConfigError(section, str(err)) from err


def _block_sigma(blocks):
    matrices = []
    for position, block in enumerate(blocks):
        key = f"blocks[{position}]"
        unknown = set(block) - {"size", "rho", "variance"}
        if unknown:
            raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown key")
        if "size" not in block or "rho" not in block:
            raise ConfigError(key, "each block needs size and rho")
        size, rho = int(block["size"]), float(block["rho"])
        matrix = np.full((size, size), rho)
        np.fill_diagonal(matrix, 1.0)
        matrices.append(float(block.get("variance", 1.0)) * matrix)
    return scipy.linalg.block_diag(*matrices)


def load_model(path) -> PopulationModel:
    """
    Population model from a TOML file with keys p, beta, sigma_eps,
    optional intercept, and either sigma (nested or flat row-major) or
    blocks = [{size, rho, variance}, ...].
    """
    values = _read_toml(path, "model")
    unknown = set(values) - MODEL_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key in model file")
    for key in ["p", "beta", "sigma_eps"]:
        if key not in values:
            raise ConfigError(key, "missing from model file")
    if ("sigma" in values) == ("blocks" in values):
        raise ConfigError("sigma", "model file needs exactly one of sigma or blocks")

    p = values["p"]
    if not isinstance(p, int) or p < 1:
        raise ConfigError("p", f"must be a positive integer, got {p!r}")
    if "blocks" in values:
        sigma = _block_sigma(values["blocks"])
    else:
        sigma = np.asarray(values["sigma"], dtype=float)
        if sigma.ndim == 1:
            if sigma.size != p * p:
                raise ConfigError(
                    "sigma", f"flat sigma needs {p * p} entries, got {sigma.size}"
                )
            sigma = sigma.reshape(p, p)
    if sigma.shape != (p, p):
        raise ConfigError(
            "sigma", f"expected a {p}x{p} matrix, got shape {sigma.shape}"
        )
    if len(values["beta"]) != p:
        raise ConfigError(
            "beta", f"expected {p} coefficients, got {len(values['beta'])}"
        )

    try:
        return PopulationModel(
            sigma=sigma,
            beta=values["beta"],
            sigma_eps=values["sigma_eps"],
            intercept=values.get("intercept", 0.0),
        )
    except InvalidInputError as err:
        raise ConfigError("model", str(err)) from err


def _parse_selection(text):
    try:
        labels = [int(token) for token in text.split(",") if token.strip()]
    except ValueError as err:
        raise ConfigError(
            "select", f"expected comma-separated variable numbers, got {text!r}"
        ) from err
    if not labels:
        raise ConfigError("select", "selection is empty")
    try:
        return SelectedSet.from_labels(labels)
    except InvalidInputError as err:
        raise ConfigError("select", str(err)) from err


def _run_criteria(args):
    model = load_model(args.model)
    selected = _parse_selection(args.select)
    if max(selected.labels) > model.p:
        raise ConfigError(
            "select", f"variable {max(selected.labels)} exceeds p={model.p}"
        )
    reports = evaluate_all(model, selected)
    print(" ".join(str(report) for report in reports.values()))
    return 0


def _build_config(args):
    if args.command == "preset":
        preset = constants.PRESETS[args.name]
        values = {
            "mode": preset["mode"],
            "design": dict(preset["design"]),
            "k_max": preset["k_max"],
        }
    else:
        values = _read_toml(args.config, "config") if args.config else {}
        values.setdefault("mode", args.command)
        if values["mode"] != args.command:
            raise ConfigError(
                "mode", f"config file is for {values['mode']!r}, not {args.command!r}"
            )

    unknown = set(values) - RUN_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")

    overrides = {
        "reps": args.reps,
        "k_max": args.kmax,
        "seed": args.seed,
        "out": args.out,
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value

    estimator = dict(values.get("estimator", {}))
    if args.lam is not None:
        estimator["lam"] = args.lam
    if args.splits is not None:
        estimator["n_splits"] = args.splits
    estimator.setdefault("seed", values.get("seed", 0))

    design = values.get("design")
    if design is not None:
        design = _dataclass_from(BlockDesign, "design", design)
    model = load_model(values["model"]) if "model" in values else None
    threads = args.threads if args.threads is not None else values.get("threads")
    try:
        n_jobs = utils.resolve_n_jobs(threads)
    except ValueError as err:
        raise ConfigError("threads", str(err)) from err

    return ExperimentConfig(
        mode=values["mode"],
        design=design,
        estimator=_dataclass_from(EstimatorConfig, "estimator", estimator),
        model=model,
        n=values.get("n"),
        reps=values.get("reps", constants.DEFAULT_REPS),
        k_max=values.get("k_max", 10),
        seed=values.get("seed", 0),
        out=values.get("out", "results.csv"),
        n_jobs=n_jobs,
        progress_bar=not args.quiet,
    )


def run_simulation(config: ExperimentConfig):
    """
    Runs the truth or experiment simulation a config describes, writes its
    CSV to config.out and returns the curves.
    """
    if config.mode == "truth":
        curves = true_rate_curves(
            config.population_model(),
            config.sample_size,
            config.k_max,
            config.reps,
            config.seed,
            n_jobs=config.n_jobs,
            progress_bar=config.progress_bar,
        )
        utils.save_results(curves, config.out)
    else:
        result = run_experiment(
            config.design,
            config.estimator,
            config.k_max,
            config.reps,
            config.seed,
            n_jobs=config.n_jobs,
            progress_bar=config.progress_bar,
        )
        result.to_csv(config.out)
        curves = result.curves

    summary = (
        f"{config.mode}: {config.reps} reps, k_max={config.k_max}, "
        f"mean fdr_true={np.nanmean(curves['fdr_true']):.4f}, "
        f"mean fvr_true_full={np.nanmean(curves['fvr_true_full']):.4f}"
    )
    if config.mode == "experiment":
        summary += f", mean fvr_est={np.nanmean(curves['fvr_est']):.4f}"
    print(f"{summary}, wrote {config.out}")
    return curves


def _add_run_flags(parser):
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--reps", type=int, help="Monte Carlo replications")
    parser.add_argument("--kmax", type=int, help="largest model size")
    parser.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        help="threshold of the null-count estimate",
    )
    parser.add_argument("--splits", type=int, help="data splits averaged per estimate")
    parser.add_argument(
        "--threads",
        type=int,
        help=(
            "parallel reps, 0 for all cores "
            f"(default: ${constants.THREADS_ENV_VAR} or 1)"
        ),
    )
    parser.add_argument("--quiet", action="store_true", help="no progress bar")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fvrlab", description="False variable rates of forward stepwise selection"
    )
    parser.add_argument(
        "--version", action="version", version=f"fvrlab {fvrlab.__version__}"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    criteria = commands.add_parser(
        "criteria", help="false selections of a selected set under each criterion"
    )
    criteria.add_argument("--model", required=True, help="model TOML file")
    criteria.add_argument(
        "--select",
        required=True,
        help="comma-separated variable numbers, starting at 1",
    )

    for name, text in [
        ("truth", "true FDR and FVR curves of stepwise selection"),
        ("experiment", "true curves plus the split-sample FVR estimate"),
    ]:
        command = commands.add_parser(name, help=text)
        command.add_argument("--config", help="run TOML file")
        _add_run_flags(command)

    preset = commands.add_parser(
        "preset", help="run a built-in block-design configuration"
    )
    preset.add_argument("name", choices=sorted(constants.PRESETS))
    _add_run_flags(preset)
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit:
        return exit.code

    try:
        if args.command == "criteria":
            return _run_criteria(args)
        run_simulation(_build_config(args))
        return 0
    except ConfigError as err:
        print(f"config error in {err.key}: {err}", file=sys.stderr)
        return 2
    except InvalidInputError as err:
        print(f"invalid input: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure in {err.operation}: {err}", file=sys.stderr)
        return 1
