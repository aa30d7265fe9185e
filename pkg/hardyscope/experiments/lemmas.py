"""

This module runs the kernel lemma suite on the config's operator and family:
the weighted derivative bounds, the far-kernel envelope and its stability under
a finer eps grid, the near and far fields of the perturbation kernel, the
convergence of W^eps, the pairing bound of R, the commutator and far-field
sums, the Duhamel residual and the global absorption.


Constants are sups over a seeded sample of cubes; with `refine` the same cubes
and functions are evaluated at h / 2 and the relative deltas recorded.
"""

import logging
import math

import numpy as np

from hardyscope.config import Config
from hardyscope.errors import HardyscopeException, RangeError
from hardyscope.experiments import common
from hardyscope.models import GridFunction
from hardyscope.services import (
    decomposition_service,
    fit_service,
    grid_service,
    hardy_service,
    lemma_service,
    semigroup_service,
)

logger = logging.getLogger(__name__)

DUHAMEL_TIME = 1.0
DUHAMEL_STEPS = 256
DUHAMEL_EXACT_TOLERANCE = 1e-6
PAIRING_WIDTHS = (0.5, 1.0, 2.0)


def duhamel_converges(midpoint, doubled, exact):
    """Exact residual at roundoff and the midpoint residual halving with 2N steps."""
    if exact > DUHAMEL_EXACT_TOLERANCE:
        return False
    return doubled <= 0.5 * midpoint or doubled <= DUHAMEL_EXACT_TOLERANCE


def lemma_times(grid):
    """Dyadic times 2^k inside the reliable range, capped at t = 1."""
    t_min, t_max = semigroup_service.reliable_time_range(grid)
    upper = min(t_max, 1.0)
    first = math.ceil(math.log2(t_min) - 1e-12)
    last = math.floor(math.log2(upper) + 1e-12)
    return [2.0**k for k in range(first, last + 1)]


def core_gaussian(grid, width=1.0):
    """exp(-x^2 / 2 width^2), the test function of the commutator and far-field sums."""
    return GridFunction(grid, np.exp(-0.5 * (grid.points / width) ** 2))


def _cube_function(family, cube, grid, seed):
    """Indicator atom on the cube, or a core Gaussian if the grid cannot resolve it."""
    try:
        return hardy_service.make_atom(family, cube, "indicator", seed, grid).function
    except HardyscopeException:
        return core_gaussian(grid)


def _lemma_constants(op, family, cubes, config):
    """Per-cube kernel lemma constants, one row per cube, and the cube functions."""
    grid = op.grid
    phis = decomposition_service.partition_of_unity(family, grid)
    m_max = config.eps_grid["m_max"]
    epsilon_grid = lemma_service.default_epsilon_grid(m_max)
    finer_epsilons = lemma_service.refined_epsilon_grid(m_max)
    seed = config.seeds["sampling"]
    rows, notices, cube_functions = [], [], []
    for cube in cubes:
        row = {"j": cube.level, "k": cube.index}
        row["lemma22"] = lemma_service.lemma22_check(
            op, family, cube, epsilon_grid, seed
        ).constants["constant"]
        finer = lemma_service.lemma22_check(op, family, cube, finer_epsilons, seed)
        row["lemma22_eps_delta"] = fit_service.relative_delta(
            row["lemma22"], finer.constants["constant"]
        )
        try:
            lemma23 = lemma_service.lemma23_check(op, family, cube, seed=seed)
            row.update(
                {
                    "lemma23_near": lemma23.constants["near"],
                    "lemma23_far": lemma23.constants["far"],
                    "lemma23_far_bound": lemma23.constants["far_bound"],
                    "lemma23_w_l1": lemma23.constants["w_l1"],
                    "lemma23_bound_holds": lemma23.passed,
                }
            )
        except RangeError as error:
            notices.append(f"lemma23 skipped on {cube}: {error}")
        f = _cube_function(family, cube, grid, seed)
        cube_functions.append(f)
        row["commutator"] = lemma_service.commutator_check(
            op, family, cube, f, phis
        ).constants["ratio"]
        try:
            w_epsilon = lemma_service.w_epsilon_convergence(
                op, family, cube, f, m_max, phis
            )
            row.update(
                {
                    "w_ratio": w_epsilon.constants["w_ratio"],
                    "w_last_distance": w_epsilon.constants["last_distance"],
                    "w_monotone": w_epsilon.verdicts["monotone"],
                }
            )
        except HardyscopeException as error:
            notices.append(f"w_epsilon skipped on {cube}: {error}")
        rows.append(row)
    return rows, notices, cube_functions


def _pairing(op, cube_functions):
    """Pairing bound of R over the cube functions against the smooth core Gaussians."""
    test_functions = [core_gaussian(op.grid, width) for width in PAIRING_WIDTHS]
    return lemma_service.pairing_bound_check(op, cube_functions, test_functions)


def _max_column(rows, column):
    values = [row[column] for row in rows if column in row]
    return max(values) if values else None


def run_lemma_suite(config, workers=None):
    """

    Measure every kernel-lemma constant for the config.


    Args:
        config (ExperimentConfig): The experiment.
        workers (int, optional): Worker threads for the far-field sum.

    Returns:
        Report: Sub-reports merged under "lemma21", per-cube constants in table
        "cubes" (with the eps-grid refinement delta and the W^eps columns), the
        pairing table, the sums and residuals, refinement deltas and verdicts.
    """
    stopwatch = common.Stopwatch()
    common.require_potential(config)
    report = common.new_report("lemmas", config)
    thresholds = config.thresholds
    op = common.build_operator(config)
    grid = op.grid
    family = common.build_family(config, op)
    cubes = common.sample_items(
        family.intervals, config.seeds["sampling"], Config.LEMMA_CUBES
    )
    logger.info("Lemma suite for %s on %d cubes", op.potential.name, len(cubes))

    try:
        report.merge(
            "lemma21",
            lemma_service.lemma21_check(
                op,
                lemma_times(grid),
                config.alpha,
                refine=config.refine,
                seed=config.seeds["sampling"],
                thresholds=thresholds,
            ),
        )
    except RangeError as error:
        report.verdicts["lemma21.finite"] = False
        report.notices.append(f"lemma21: {error}")

    rows, notices, cube_functions = _lemma_constants(op, family, cubes, config)
    report.notices.extend(notices)
    report.add_table("cubes", rows)
    names = (
        "lemma22",
        "lemma23_near",
        "lemma23_far",
        "lemma23_w_l1",
        "commutator",
        "w_ratio",
    )
    for name in names:
        report.constants[name] = _max_column(rows, name)
    report.verdicts["lemma23_bounds"] = all(
        row.get("lemma23_bound_holds", True) for row in rows
    )
    eps_delta = _max_column(rows, "lemma22_eps_delta")
    report.constants["lemma22_eps_delta"] = eps_delta
    report.refinement["lemma22.epsilon_grid"] = eps_delta
    report.verdicts["lemma22_epsilon_stable"] = eps_delta < thresholds.refinement_max
    report.constants["w_last_distance"] = _max_column(rows, "w_last_distance")
    report.verdicts["w_epsilon_monotone"] = all(
        row.get("w_monotone", True) for row in rows
    )

    pairing = _pairing(op, cube_functions)
    report.add_table("pairing", pairing.tables["pairing"])
    report.constants["pairing_constant"] = pairing.constants["constant"]
    report.verdicts["pairing.finite"] = pairing.verdicts["finite"]

    f = core_gaussian(grid)
    far_field = lemma_service.far_field_sum_check(op, family, f, workers=workers)
    report.add_table("far_field", far_field.tables["far_field"])
    report.constants["far_field_sum"] = far_field.constants["ratio"]

    midpoint = semigroup_service.duhamel_residual(op, DUHAMEL_TIME, DUHAMEL_STEPS)
    doubled = semigroup_service.duhamel_residual(op, DUHAMEL_TIME, 2 * DUHAMEL_STEPS)
    exact = semigroup_service.duhamel_residual(
        op, DUHAMEL_TIME, DUHAMEL_STEPS, method="exact"
    )
    report.add_table(
        "duhamel",
        [
            {"method": "midpoint", "s_steps": DUHAMEL_STEPS, "residual": midpoint},
            {"method": "midpoint", "s_steps": 2 * DUHAMEL_STEPS, "residual": doubled},
            {"method": "exact", "s_steps": 0, "residual": exact},
        ],
    )
    report.constants["duhamel_residual"] = midpoint
    report.constants["duhamel_residual_doubled"] = doubled
    report.constants["duhamel_residual_exact"] = exact
    report.verdicts["duhamel"] = duhamel_converges(midpoint, doubled, exact)

    absorption = semigroup_service.global_absorption(op, 0.0)
    report.constants["global_absorption"] = absorption
    checked = names + ("far_field_sum", "pairing_constant")
    report.verdicts["finite"] = all(
        value is None or np.isfinite(value)
        for value in (report.constants[name] for name in checked)
    ) and np.isfinite(absorption)

    if config.refine:
        fine_op = common.build_operator(config, refined=True)
        fine_family = common.transfer_family(family, fine_op.grid)
        fine_rows, _, _ = _lemma_constants(fine_op, fine_family, cubes, config)
        for name in names:
            coarse, fine = report.constants[name], _max_column(fine_rows, name)
            if coarse is not None and fine is not None:
                report.refinement[name] = fit_service.relative_delta(coarse, fine)
        fine_sum = lemma_service.far_field_sum_check(
            fine_op, fine_family, core_gaussian(fine_op.grid), workers=workers
        )
        report.refinement["far_field_sum"] = fit_service.relative_delta(
            report.constants["far_field_sum"], fine_sum.constants["ratio"]
        )
        moved = [grid_service.transfer(f, fine_op.grid) for f in cube_functions]
        report.refinement["pairing_constant"] = fit_service.relative_delta(
            report.constants["pairing_constant"],
            _pairing(fine_op, moved).constants["constant"],
        )
        report.refinement["global_absorption"] = lemma_service.refinement_check(
            lambda candidate: semigroup_service.global_absorption(candidate, 0.0),
            op,
            thresholds.refinement_max,
        )["delta"]
        report.verdicts["refinement_stable"] = (
            max(report.refinement.values()) < thresholds.refinement_max
        )

    logger.info("Lemma suite for %s: passed=%s", op.potential.name, report.passed)
    return stopwatch.stamp(report)
