"""
Central configuration for fts-sentinel.

Keep runtime-safe (no secrets). Experiment-specific values live in the JSON
configs under input/; these are the defaults they fall back to.
"""

# Discretization grid G_N (rho << sigma_mesh)
DEFAULT_RHO = 0.1
DEFAULT_SIGMA_MESH = 0.4
GRID_COUNT_CONSTANT = 8.0
MAX_GRID_POINTS = 4096  # decay experiment refuses larger grids
DECAY_FLOOR_CLOUDS = 8  # exact Gaussian clouds per N estimating the sampling floor of D

# Line truncation [-L, L] standing in for the real line (gen --densities)
DEFAULT_LINE_HALF_WIDTH = 3.0

# Long-run variance / Brownian simulation
JITTER_LADDER = (1e-12, 1e-10, 1e-8)  # multiples of trace/dim added to the diagonal
PSD_TOLERANCE = 1e-10  # relative to trace
QUANTILE_RESOLUTION = 512
QUANTILE_BATCH = 128  # paths simulated per batch in sup_samples

# Monitoring
HORIZON_FACTOR = 5.0
GAMMA_HISTORY_CAP = 10**6

# Reconstruction
NW_DENOMINATOR_FLOOR = 1e-12
DENSITY_NORMALIZATION_TOL = 1e-6
BANDWIDTH_EXPONENT = 0.2  # h = size^(-1/5)

# Metrics
ATOM_CAP = 512
W2_NEGATIVE_TOLERANCE = 1e-6  # relative to tr(S1) + tr(S2)

# UI
PREVIEW_ROWS = 50
UI_MAX_REPLICATIONS = 500
