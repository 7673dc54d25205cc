LOG_FILE = "fvrlab.log"

# relative to the largest absolute entry of the matrix/vector being inspected
ZERO_TOL = 1e-8
SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
MAX_CONDITION = 1e12
COLLINEAR_TOL = 1e-12

SUBSET_ENUMERATION_CAP = 20

Y_NODE = "y"

CSV_COLUMNS = [
    "k",
    "fdr_true",
    "fdr_se",
    "fvr_true_full",
    "fvr_full_se",
    "fvr_true_half",
    "fvr_half_se",
    "fvr_est",
    "fvr_est_se",
    "fvr_est_clipped",
    "n_reps_at_k",
]
CSV_FLOAT_FORMAT = "%.17g"

THREADS_ENV_VAR = "FVRLAB_THREADS"

DEFAULT_LAMBDA = 0.5
DEFAULT_SPLITS = 50
DEFAULT_SPLIT_FRACTION = 0.5
DEFAULT_REPS = 100
DEFAULT_BOOTSTRAPS = 200

# n, n_blocks, block_size, n_signal, sigma_eps, rho
PRESETS = {
    "sec34": {
        "mode": "truth",
        "design": {
            "n": 50,
            "n_blocks": 20,
            "block_size": 2,
            "n_signal": 10,
            "sigma_eps": 0.8,
            "rho": 0.95,
        },
        "k_max": 20,
    },
    "fig7": {
        "mode": "experiment",
        "design": {
            "n": 100,
            "n_blocks": 20,
            "block_size": 2,
            "n_signal": 6,
            "sigma_eps": 0.8,
            "rho": 0.95,
        },
        "k_max": 20,
    },
    "fig8": {
        "mode": "experiment",
        "design": {
            "n": 100,
            "n_blocks": 5,
            "block_size": 3,
            "n_signal": 3,
            "sigma_eps": 0.5,
            "rho": 0.95,
        },
        "k_max": 15,
    },
    "fig9": {
        "mode": "experiment",
        "design": {
            "n": 100,
            "n_blocks": 20,
            "block_size": 2,
            "n_signal": 10,
            "sigma_eps": 0.5,
            "rho": 0.95,
        },
        "k_max": 20,
    },
    "fig10": {
        "mode": "experiment",
        "design": {
            "n": 100,
            "n_blocks": 20,
            "block_size": 2,
            "n_signal": 10,
            "sigma_eps": 2.0,
            "rho": 0.95,
        },
        "k_max": 20,
    },
}
