"""

This module certifies the decay conditions (D) and (K) on family cubes by
estimation.


(D): m(n) = sup_{y in Q*} int_core T_{2^n d(Q)^2}(x, y) dx decays like n^(-1-eps).
(K): k(t) = sup_core int_0^{2t} (1_{Q***} V) * P_s ds is at most C (t / d(Q)^2)^delta.
"""

import logging
import math

import numpy as np
from numpy.polynomial import legendre

from hardyscope.config import Config
from hardyscope.errors import DomainError, PreconditionError, RangeError
from hardyscope.models import GridFunction, Report
from hardyscope.services import (
    decomposition_service,
    fit_service,
    grid_service,
    semigroup_service,
)

logger = logging.getLogger(__name__)


def _star_mask(grid, cube, beta):
    left, right = decomposition_service.dilate(cube, 1, beta)
    left = max(left, -grid.half_width)
    right = min(right, grid.half_width)
    return grid_service.window_mask(grid, (left, right))


def max_doubling(grid, cube):
    """Largest n with 2^n d(Q)^2 inside the reliable time range (0 if none)."""
    t_max = semigroup_service.reliable_time_range(grid)[1]
    ratio = t_max / cube.diameter**2
    return max(0, math.floor(math.log2(ratio) + 1e-12)) if ratio >= 1 else 0


def check_condition_D(op, family, cube, n_max=None, thresholds=None):
    """

    Estimate the decay exponent of condition (D) on one cube.


    Args:
        op (SpectralOperator): The operator.
        family (CubeFamily): Family holding the cube (gives beta).
        cube (DyadicInterval): Q.
        n_max (int, optional): Largest n. Defaults to the largest reliable one.
        thresholds (Thresholds, optional): Verdict thresholds.

    Returns:
        Report: Table "mass" of (n, t, m), fitted eps and C, superpolynomial flag.

    Raises:
        RangeError: If 2^n_max d(Q)^2 exceeds L^2 / 16 or fewer than 3 times fit.
    """
    grid = op.grid
    limit = max_doubling(grid, cube)
    n_max = limit if n_max is None else int(n_max)
    t_max = semigroup_service.reliable_time_range(grid)[1]
    if n_max > limit:
        raise RangeError(
            f"2^{n_max} d(Q)^2 = {2**n_max * cube.diameter**2:g} "
            f"exceeds L^2/16 = {t_max:g}"
        )
    if n_max < 3:
        raise RangeError(
            f"cube {cube} is too large for condition (D) on this domain "
            f"(n_max = {n_max})"
        )

    epsilon_min = thresholds.epsilon_min if thresholds else Config.EPSILON_MIN
    residual_max = thresholds.residual_max if thresholds else Config.RESIDUAL_MAX
    mask = _star_mask(grid, cube, family.beta)
    rows = []
    for n in range(1, n_max + 1):
        t = 2.0**n * cube.diameter**2
        profile = semigroup_service.mass_profile(op, t).values
        rows.append({"n": n, "t": t, "m": float(np.max(profile[mask]))})

    report = Report(name="condition_D")
    table = report.add_table("mass", rows)
    fit = fit_service.power_law_fit(table["n"], table["m"], tail_fraction=0.5)
    superpolynomial = fit_service.is_superpolynomial(table["n"], table["m"])
    epsilon_hat = -fit["slope"] - 1.0
    report.constants.update(
        {
            "cube_j": cube.level,
            "cube_k": cube.index,
            "epsilon_hat": epsilon_hat,
            "C_hat": fit["constant"],
            "fit_residual": fit["residual"],
            "superpolynomial": superpolynomial,
        }
    )
    report.verdicts["condition_D"] = bool(
        superpolynomial
        or (epsilon_hat > epsilon_min and fit["residual"] < residual_max)
    )
    logger.debug(
        "Condition (D) on %s: eps=%.3g residual=%.3g superpolynomial=%s",
        cube,
        epsilon_hat,
        fit["residual"],
        superpolynomial,
    )
    return report


def default_k_times(cube, points=Config.K_TIME_POINTS):
    """t = 2^-m d(Q)^2 for m = 0..points-1, increasing."""
    return [2.0 ** (-m) * cube.diameter**2 for m in reversed(range(points))]


def truncated_potential(potential, cube, beta):
    """1_{Q***} V on the potential's grid (dual-cell indicator)."""
    window = decomposition_service.dilate(cube, 3, beta)
    mask = grid_service.indicator(potential.grid, window).values
    return GridFunction(potential.grid, mask * potential.values)


def absorbed_heat(g, tau, method="closed_form", nodes=48):
    """

    x -> int_0^tau (g * P_s)(x) ds.


    "closed_form" convolves with the cell average of int_0^tau P_s;
    "quadrature" integrates in u = sqrt(s) by Gauss-Legendre with cell-averaged
    Gaussians.
    """
    grid = g.grid
    h = grid.spacing
    if method == "closed_form":
        return grid_service.convolve_with_kernel(
            g,
            lambda offsets: grid_service.cell_average_integrated_free_kernel(
                tau, offsets, h
            ),
        )
    if method != "quadrature":
        raise DomainError(f"unknown method '{method}'")
    abscissae, weights = legendre.leggauss(nodes)
    root = math.sqrt(tau)
    total = np.zeros(grid.n_points)
    for node, weight in zip(abscissae, weights):
        u = 0.5 * root * (node + 1.0)
        convolved = grid_service.convolve_with_kernel(
            g,
            lambda offsets, s=u * u: grid_service.cell_average_free_kernel(
                s, offsets, h
            ),
        )
        total += 0.5 * root * weight * 2.0 * u * convolved.values
    return GridFunction(grid, total)


def check_condition_K(
    potential, cube, beta, t_grid=None, method="closed_form", thresholds=None
):
    """

    Estimate the exponent delta of condition (K) on one cube.


    Args:
        potential (Potential): Sampled potential.
        cube (DyadicInterval): Q.
        beta (float): Dilation parameter.
        t_grid (list, optional): Times t <= d(Q)^2. Defaults to default_k_times().
        method (str): "closed_form" or "quadrature".
        thresholds (Thresholds, optional): Verdict thresholds.

    Returns:
        Report: Table "absorption" of (t, t / d^2, k), fitted delta and C.

    Raises:
        PreconditionError: If some t exceeds d(Q)^2 or is not positive.
    """
    t_grid = sorted(float(t) for t in (t_grid or default_k_times(cube)))
    diameter_squared = cube.diameter**2
    for t in t_grid:
        if not 0 < t <= diameter_squared * (1 + 1e-12):
            raise PreconditionError(
                f"t = {t} must lie in (0, d(Q)^2 = {diameter_squared}]"
            )
    delta_min = thresholds.delta_min if thresholds else Config.DELTA_MIN
    residual_max = thresholds.residual_max if thresholds else Config.RESIDUAL_MAX

    g = truncated_potential(potential, cube, beta)
    core = potential.grid.core_mask
    rows = []
    for t in t_grid:
        values = absorbed_heat(g, 2.0 * t, method=method).values
        rows.append(
            {
                "t": t,
                "t_over_d2": t / diameter_squared,
                "k": float(np.max(values[core])),
            }
        )

    report = Report(name="condition_K")
    table = report.add_table("absorption", rows)
    report.constants.update({"cube_j": cube.level, "cube_k": cube.index})
    if np.all(table["k"] <= 0):
        report.constants.update({"delta_hat": None, "C_hat": 0.0, "fit_residual": 0.0})
        report.verdicts["condition_K"] = True
        report.notices.append("1_{Q***} V vanishes; (K) holds trivially")
        return report

    fit = fit_service.power_law_fit(table["t_over_d2"], table["k"])
    report.constants.update(
        {
            "delta_hat": fit["slope"],
            "C_hat": fit["constant"],
            "fit_residual": fit["residual"],
        }
    )
    report.verdicts["condition_K"] = bool(
        fit["slope"] > delta_min and fit["residual"] < residual_max
    )
    logger.debug(
        "Condition (K) on %s: delta=%.3g residual=%.3g",
        cube,
        fit["slope"],
        fit["residual"],
    )
    return report
