"""
Configuration for the tensor-train Fokker-Planck solver
Benchmark defaults, output paths and report layout
"""

from pathlib import Path

# Paths
BASE_DIR = Path(__file__).resolve().parent
DATA_DIR = BASE_DIR / "data"
RESULTS_DIR = DATA_DIR / "results"
CONFIGS_DIR = DATA_DIR / "configs"
EVALUATION_PATH = DATA_DIR / "evaluation_benchmarks.json"

# Logging
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

# Largest tensor (number of entries) we agree to hold densely
DENSE_SIZE_LIMIT = 2 ** 26

# Slice size used when scanning a TT-tensor for its minimum
MIN_SCAN_CHUNK = 2 ** 20

# ===== CROSS APPROXIMATION DEFAULTS =====
CROSS_DEFAULTS = {
    'kick_rank': 2,
    'max_sweeps': 50,
    'maxvol_delta': 0.01,
    'max_rank': 64,
}

MAXVOL_MAX_ITERS = 100

# ===== BENCHMARK PROBLEMS =====
# Grid points are per spatial dimension; time points include t=0
PROBLEM_DEFAULTS = {
    'oup1d': {
        'dim': 1,
        'grid_points': 50,
        'time_points': 1000,
        'eps': 1e-6,
        't_final': 10.0,
        'bounds': (-5.0, 5.0),
    },
    'oup3d': {
        'dim': 3,
        'grid_points': 30,
        'time_points': 100,
        'eps': 1e-4,
        't_final': 5.0,
        'bounds': (-5.0, 5.0),
    },
    'oup5d': {
        'dim': 5,
        'grid_points': 30,
        'time_points': 100,
        'eps': 1e-4,
        't_final': 5.0,
        'bounds': (-5.0, 5.0),
    },
    'dumbbell': {
        'dim': 3,
        'grid_points': 60,
        'time_points': 100,
        'eps': 1e-5,
        't_final': 10.0,
        'bounds': (-10.0, 10.0),
    },
}

PROBLEM_NAMES = tuple(PROBLEM_DEFAULTS)

DEFAULT_SEED = 42

# Initial Gaussian variance for every benchmark
INITIAL_VARIANCE = 1.0

# ===== REPORT LAYOUT =====
CSV_COLUMNS = [
    'step',
    't',
    'erank',
    'err_analytic',
    'err_stationary',
    'psi',
    'eta',
    'mass',
    'min_nodal',
    'wall_seconds',
]

# Accuracy used to build reference tensors for the error columns
REFERENCE_EPS = 1e-10

# ===== PUBLISHED VALUES =====
REFERENCE_VALUES = {
    'oup1d': {'err_analytic': 5e-5, 'err_stationary': 5e-5},
    'oup3d': {'err_stationary': 3e-3, 'erank_max': 8.0},
    'oup5d': {'err_stationary': 3e-3, 'erank_final': (3.0, 6.0)},
    'dumbbell': {
        'psi': 2.071143,
        'eta': 1.0328125,
        'psi_published': 2.0707,
        'eta_published': 1.0318,
        'tolerance': 1e-2,
        'tolerance_scaled': 3e-2,
        'erank_max': 12.0,
    },
}

# Reduced dumbbell run when N=60 does not fit the machine
DUMBBELL_SCALED = {'grid_points': 40, 'time_points': 100}

MASS_TOLERANCE = 1e-2
