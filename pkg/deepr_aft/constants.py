import math

VERSION = "0.1.0"

# Simulation scenarios
MEAN_KINDS = ["interaction", "gam", "linear"]
ERROR_DISTS = ["gaussian", "gumbel", "laplace", "t3"]
PAPER_TAUS = [20.0, 40.0, 60.0]
DEFAULT_TAU = 40.0
DEFAULT_N_TRAIN = 1000
DEFAULT_N_TEST = 2000
BASE_COVARIATES = 3

EULER_GAMMA = 0.5772156649015329
# (mean, standard deviation) of each raw error law
ERROR_MOMENTS = {
    "gaussian": (0.0, 1.0),
    "gumbel": (EULER_GAMMA, math.pi / math.sqrt(6.0)),
    "laplace": (0.0, math.sqrt(2.0)),
    "t3": (0.0, math.sqrt(3.0)),
}

# Bias/variance protocol
BIAS_VARIANCE_TAU = 40.0
BIAS_VARIANCE_N_TRAIN = 3000
BIAS_VARIANCE_POINTS = 2000
BIAS_VARIANCE_PAIRS_PER_EVENT = 7

# High-dimensional sweep and the largest K each baseline is run at
HIGH_DIM_SWEEP = [0, 10, 50, 100, 300, 500, 700, 1000]
HIGH_DIM_CUTOFFS = {"saft": 300, "paft": 700}

# Network
ACTIVATIONS = ["relu", "linear"]
SIMULATION_WIDTHS = [128, 32, 16]
REALDATA_WIDTHS = [128] * 5 + [64] * 2 + [32] * 2
ARCHITECTURES = ["simulation", "realdata"]
OPTIMIZERS = ["sgd", "adam"]

DEFAULT_MOMENTUM = 0.90
DEFAULT_NESTEROV = True
DEFAULT_DECAY = 0.00001
DEFAULT_BATCH_SIZE = 50
DEFAULT_EPOCHS = 500
DEFAULT_L2_PENALTY = 0.01
DEFAULT_ACTIVITY_PENALTY = 0.01
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-7

# Learning rates by (sample size band, error law); "small" covers n < LARGE_SAMPLE_THRESHOLD
LEARNING_RATES = {
    ("small", "gumbel"): 0.003,
    ("large", "gumbel"): 0.002,
    ("small", "other"): 0.0003,
    ("large", "other"): 0.0001,
}
LARGE_SAMPLE_THRESHOLD = 5000

# Pairs drawn per event subject
PAIRS_PER_EVENT = {1000: 5, 3000: 7, 5000: 10}
DEFAULT_PAIRS_PER_EVENT = 5

# Real-data presets (optimizer, learning rate, batch size, epochs, s)
REALDATA_PRESETS = {
    "flchain": {"optimizer": "adam", "learning_rate": 0.00001, "batch_size": 2, "epochs": 125, "pairs_per_event": 400},
    "nwtco": {"optimizer": "adam", "learning_rate": 0.00002, "batch_size": 4, "epochs": 125, "pairs_per_event": 400},
}
DEFAULT_TRAIN_FRACTION = 2.0 / 3.0
MAX_SPLIT_ATTEMPTS = 10

# Baselines
PAFT_MAX_ITER = 100
PAFT_GRAD_TOL = 1e-8
SAFT_MAX_ITER = 200
SAFT_STEP_TOL = 1e-7
SAFT_ROOT_TOL = 1e-4
BANDWIDTHS = ["quadratic", "sqrt"]

METHODS = ["deepr_aft", "paft", "saft"]
CENTERING_METHODS = ["event_mean", "kaplan_meier"]

# Benchmark
BENCH_SIZES = [1000, 2000, 4000, 8000]
BENCH_REPETITIONS = 3

# Model container
MODEL_MAGIC = b"DEEPRAFT"
MODEL_FORMAT_VERSION = 1

# User preferences stored in the config file
OUTPUT_FORMATS = ["csv", "text"]
DEFAULT_CONFIG = {
    "seed": 0,
    "replicates": 1,
    "output_format": "csv",
    "results_dir": ".",
    "centering": "event_mean",
    "bandwidth": "quadratic",
}
