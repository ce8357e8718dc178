import os

# --- Regime / pole handling ---
EPS_REGIME = 1e-9               # |gamma - 2| below this is treated as critical damping
APERIODIC_OMEGA_SQ = 1e-8       # |omega^2| below this uses the lambda1 -> lambda2 limit forms
SERIES_Z_CUTOFF = 1e-3          # |omega^2 t^2 / 4| below this uses the Taylor forms of the susceptibilities
POLE_GUARD_WIDTH = 1e-6
NEAR_POLE_FACTOR = 10.0         # points within NEAR_POLE_FACTOR * guard_width are flagged near-pole

# --- Series / quadrature defaults ---
DEFAULT_N_MAX = 10_000_000
DEFAULT_SERIES_REL_TOL = 1e-10
DEFAULT_QUAD_ABS_TOL = 1e-14
DEFAULT_QUAD_REL_TOL = 1e-10
DEFAULT_QUAD_MAX_DEPTH = 40
DEFAULT_T_MIN = 1e-3
GAUSS_ORDER = 10
SERIES_FIRST_CHUNK = 64
SERIES_MAX_CHUNK = 1 << 20
SERIES_MAX_CELLS = 1 << 22      # cap on (time points x terms) held in memory per chunk
COT_SERIES_CUTOFF = 1e-2
MEMO_QUANTUM = 1e-12
RESONANCE_TOL = 5e-5           # lambda/nu this close to an integer: a Matsubara frequency sits on a decay rate
RESONANCE_SHIFT = 1e-4         # relative nu offset of the two evaluations averaged there

# --- Default quantum run parameters ---
DEFAULT_GAMMA = 1.0
DEFAULT_TEMPERATURE = 0.053
DEFAULT_NU = 1e7
DRUDE_FACTOR = 10.0             # default omega_D = DRUDE_FACTOR * nu

# --- Grid / output ---
DEFAULT_T_MAX = 10.0
DEFAULT_N_POINTS = 200
CSV_FLOAT_FORMAT = "%.17e"
OUTPUT_DIR = os.getenv("QBM_OUTPUT_DIR", ".")

# --- Monte Carlo ---
DEFAULT_SEED = 20240601
DEFAULT_N_PATHS = 100_000
DEFAULT_DT = 1e-3
PATH_BLOCK_SIZE = 4096

# --- Workers ---
def worker_count() -> int:
    # QBM_THREADS caps the joblib pool; unset means one worker per core.
    raw = os.getenv("QBM_THREADS")
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1

# Path to a key=value run config used by the HTTP layer when a request omits parameters.
CONFIG_PATH = os.getenv("QBM_CONFIG")
