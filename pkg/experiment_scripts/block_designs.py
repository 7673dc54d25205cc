import os

from fvrlab import constants
from fvrlab.cli import ExperimentConfig, run_simulation
from fvrlab.estimator import EstimatorConfig
from fvrlab.simulation import BlockDesign

save_path = "runs"
reps = 100

# n = 50 truth curves: stepwise FDR against the projected-model FVR
sec34 = constants.PRESETS["sec34"]
run_simulation(
    ExperimentConfig(
        mode="truth",
        design=BlockDesign(**sec34["design"]),
        reps=reps,
        k_max=sec34["k_max"],
        seed=0,
        out=os.path.join(save_path, "sec34.csv"),
        n_jobs=-1,
        progress_bar=True,
    )
)

# n = 100 estimator runs, fixed lambda and bootstrap-calibrated lambda
bootstrap = EstimatorConfig(lambda_grid=[0.3, 0.4, 0.5, 0.6, 0.7], n_boot=200)
for name in ["fig7", "fig8", "fig9", "fig10"]:
    preset = constants.PRESETS[name]
    for suffix, estimator in [("", EstimatorConfig()), ("_bootstrap", bootstrap)]:
        config = ExperimentConfig(
            mode="experiment",
            design=BlockDesign(**preset["design"]),
            estimator=estimator,
            reps=reps,
            k_max=preset["k_max"],
            seed=0,
            out=os.path.join(save_path, f"{name}{suffix}.csv"),
            n_jobs=-1,
            progress_bar=True,
        )
        run_simulation(config)
