"""
Configuration file for the Killing Geometry Toolkit
"""

import os

# Data Storage Paths
BASE_DIR = os.path.dirname(os.path.abspath(__file__))
DATA_DIR = os.path.join(BASE_DIR, "data")
OUTPUT_DIR = os.path.join(DATA_DIR, "output")
LOGS_DIR = os.path.join(DATA_DIR, "logs")
LOG_FILE = os.path.join(LOGS_DIR, "killing_geometry.log")

# Model Construction
SIMPSON_NODES = 257  # nodes of the composite Simpson rule for eta
POSITIVITY_OVERSAMPLING = 4
PERIODICITY_TOLERANCE = 1e-10
ORTHONORMALITY_TOLERANCE = 1e-12

# Horizontal Lifts
LIFT_TOLERANCE = 1e-10
LIFT_SAMPLES_PER_PIECE = 129
CLOSED_CURVE_TOLERANCE = 1e-12

# Minimal Surface Solver
SOLVER_TOLERANCE = 1e-8
MAX_ITERATIONS = 500
LINEAR_TOLERANCE = 1e-12
ARMIJO_C = 1e-4
BACKTRACK_FACTOR = 0.5
MIN_STEP = 1e-10
OBSTRUCTION_TOLERANCE = 1e-10

# Calabi Duality
CURL_TOLERANCE = 1e-6
PATH_TOLERANCE = 1e-6
CLOSURE_GRID_FACTOR = 2.0  # slack per h^2 * max third derivative for sampled forms

# Vertical Cylinders
CYLINDER_TOLERANCE = 1e-10
CYLINDER_SAMPLES = 513

# Area Minimality Trials
PERTURBATION_MODES = 8
PERTURBATION_AMPLITUDE = 0.1
MINIMALITY_TRIALS = 20
DEFAULT_SEED = 0

# Output
FLOAT_FORMAT = "%.17g"


# Parallelism cap for independent trials
def _threads(value):
    try:
        return max(1, int(value))
    except (TypeError, ValueError):
        return 1


THREADS = _threads(os.environ.get("KILLING_GEO_THREADS", "1"))

# Create necessary directories
os.makedirs(DATA_DIR, exist_ok=True)
os.makedirs(OUTPUT_DIR, exist_ok=True)
os.makedirs(LOGS_DIR, exist_ok=True)
