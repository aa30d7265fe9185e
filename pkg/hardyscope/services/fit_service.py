"""

This module fits power laws in log-log space and summarizes the stability of
estimated constants.
"""

import logging
import math

import numpy as np

from hardyscope.config import Config
from hardyscope.errors import DegenerateInputError

logger = logging.getLogger(__name__)

VALUE_FLOOR = 1e-300


def power_law_fit(x, y, tail_fraction=1.0):
    """

    Least-squares fit of log y = slope * log x + intercept.


    Args:
        x (array-like): Positive abscissae, increasing.
        y (array-like): Positive values (floored at 1e-300).
        tail_fraction (float): Fraction of the largest x to fit on.

    Returns:
        dict: slope, intercept, constant = exp(intercept), residual (RMS in log
        space) and the number of points used.

    Raises:
        DegenerateInputError: If fewer than two points remain.
    """
    x = np.asarray(x, dtype=float)
    y = np.maximum(np.asarray(y, dtype=float), VALUE_FLOOR)
    count = max(2, int(math.ceil(tail_fraction * x.size)))
    if x.size < 2:
        raise DegenerateInputError(
            f"a power-law fit needs at least 2 points, got {x.size}"
        )
    log_x = np.log(x[-count:])
    log_y = np.log(y[-count:])
    slope, intercept = np.polyfit(log_x, log_y, 1)
    residual = float(np.sqrt(np.mean((log_y - (slope * log_x + intercept)) ** 2)))
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "constant": float(np.exp(intercept)),
        "residual": residual,
        "points": count,
    }


def local_slopes(x, y):
    """Slopes of consecutive log-log segments."""
    log_x = np.log(np.asarray(x, dtype=float))
    log_y = np.log(np.maximum(np.asarray(y, dtype=float), VALUE_FLOOR))
    return np.diff(log_y) / np.diff(log_x)


def is_superpolynomial(
    x,
    y,
    slope_limit=Config.SUPERPOLYNOMIAL_SLOPE,
    tail=Config.SUPERPOLYNOMIAL_TAIL,
    resolution=Config.MASS_RESOLUTION,
):
    """

    Decide whether y decays faster than any power of x.


    The last `tail` log-log slopes must steepen strictly and the last one must
    lie below -slope_limit. Values below `resolution * y[0]` are roundoff: the
    sequence is cut there, and a cut that leaves fewer than three values counts
    as superpolynomial.

    Args:
        x (array-like): Positive abscissae, increasing.
        y (array-like): Positive values.
        slope_limit (float): Bound on the last slope.
        tail (int): Number of trailing slopes that must steepen.
        resolution (float): Relative level below which values are roundoff.

    Returns:
        bool: True for superpolynomial decay.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size < 3 or y[0] <= 0:
        return False
    resolved = y > resolution * y[0]
    if not resolved.all():
        cut = int(np.argmin(resolved))
        if cut < 3:
            return True
        x, y = x[:cut], y[:cut]
    slopes = local_slopes(x, y)
    steepening = slopes[-max(2, tail) :]
    return bool(np.all(np.diff(steepening) < 0) and slopes[-1] < -slope_limit)


def relative_delta(coarse, fine):
    """|coarse - fine| / max(|coarse|, |fine|), 0 when both vanish."""
    scale = max(abs(coarse), abs(fine))
    if scale == 0:
        return 0.0
    return float(abs(coarse - fine) / scale)


def spread(values):
    """

    Summary statistics of a positive sample.


    Returns:
        dict: min, max, median, max / median and max / min.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DegenerateInputError("cannot summarize an empty sample")
    minimum, maximum = float(values.min()), float(values.max())
    median = float(np.median(values))
    return {
        "min": minimum,
        "max": maximum,
        "median": median,
        "max_over_median": maximum / median if median > 0 else math.inf,
        "max_over_min": maximum / minimum if minimum > 0 else math.inf,
    }
