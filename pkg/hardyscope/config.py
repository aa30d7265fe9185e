"""

This module defines the configuration settings for hardyscope.


It includes output and log folders, the worker-pool size and the numerical
defaults (grid, dilation parameter, fit thresholds, time grids) shared by the
services and the experiment runners.
"""

import os


class Config:  # pylint: disable=R0903
    """

    Configuration settings for hardyscope.


    Attributes:
        OUTPUT_FOLDER (str): Directory where reports and CSV tables are written.
        LOG_FOLDER (str): Directory for the rotating log file.
        THREADS (int): Upper bound on worker threads (HARDYSCOPE_THREADS).
        GRID_HALF_WIDTH (float): Default half width L of the computational domain.
        GRID_POINTS (int): Default (odd) number of grid points.
        CORE_FRACTION (float): Default core window fraction rho.
        BETA (float): Default dilation parameter of the cube family.
    """

    BASE_DIR = os.path.abspath(os.path.dirname(__file__))

    OUTPUT_FOLDER = os.getenv(
        "HARDYSCOPE_OUTPUT_FOLDER", os.path.join(os.path.dirname(BASE_DIR), "output")
    )
    LOG_FOLDER = os.getenv(
        "HARDYSCOPE_LOG_FOLDER", os.path.join(os.path.dirname(BASE_DIR), "logs")
    )
    LOG_LEVEL = os.getenv("HARDYSCOPE_LOG_LEVEL", "INFO")
    THREADS = max(1, int(os.getenv("HARDYSCOPE_THREADS", str(os.cpu_count() or 1))))

    # Grid
    GRID_HALF_WIDTH = 16.0
    GRID_POINTS = 2049
    CORE_FRACTION = 0.5

    # Cube families
    BETA = 0.125
    FAMILY_RULE = "CZ"

    # Reliable time range is [RELIABLE_TIME_CELLS * h^2, L^2 / RELIABLE_TIME_DIVISOR]
    RELIABLE_TIME_CELLS = 64.0
    RELIABLE_TIME_DIVISOR = 16.0

    # Maximal-function time grid t = 2^-k, k = T_GRID_K_MIN..T_GRID_K_MAX
    T_GRID_K_MIN = -2
    T_GRID_K_MAX = 20

    # Dyadic epsilon grid eps = 2^-m, m = 1..EPS_GRID_M_MAX
    EPS_GRID_M_MAX = 12

    # Verdict thresholds
    EPSILON_MIN = 0.05
    DELTA_MIN = 0.05
    RESIDUAL_MAX = 0.2
    REFINEMENT_MAX = 0.10
    SUPERPOLYNOMIAL_SLOPE = 4.0
    SUPERPOLYNOMIAL_TAIL = 3
    MASS_RESOLUTION = 1e-12
    RATIO_SPREAD_MAX = 50.0
    ATOM_SPREAD_MAX = 20.0

    # Condition (K) time samples t = 2^-m d(Q)^2, m = 0..K_TIME_POINTS-1
    K_TIME_POINTS = 11

    # Sups over y in Q* and over cubes are exhaustive below this size
    SAMPLING_CAP = 64

    # Cubes per family on which the kernel lemmas are measured (seeded sample)
    LEMMA_CUBES = 4

    # Numerical tolerances
    DOMINATION_TOLERANCE = 1e-6
    POSITIVITY_TOLERANCE = 1e-8
    EXP_OVERFLOW_LIMIT = 700.0

    for folder in [OUTPUT_FOLDER, LOG_FOLDER]:
        os.makedirs(folder, exist_ok=True)
