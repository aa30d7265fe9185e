"""

This module runs the H^1 equivalence study: the ratio ||f||_H1 / (||f||_1 +
||R f||_1) over the test-function library, its interval and spread, its
stability under h -> h / 2 and under a doubled time grid, and the atom bound
suite.
"""

import logging
from dataclasses import replace

import numpy as np

from hardyscope.errors import DegenerateInputError
from hardyscope.experiments import common
from hardyscope.services import fit_service, hardy_service, worker_service

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 10
SCALING_FACTOR = 3.0


def _t_grid(config, grid, per_octave=1):
    return hardy_service.default_t_grid(
        grid, config.t_grid["k_min"], config.t_grid["k_max"], per_octave
    )


def _ratios(op, entries, t_grid, workers=None):
    def ratio(entry):
        try:
            return hardy_service.equivalence_ratio(op, entry.function, t_grid)
        except DegenerateInputError:
            return None

    return worker_service.map_ordered(ratio, entries, workers)


def _interval(values):
    finite = [value for value in values if value is not None]
    if not finite:
        raise DegenerateInputError("every test function is degenerate")
    return min(finite), max(finite)


def run_equivalence(config, workers=None):
    """

    Run the equivalence study for the config's potential.


    Args:
        config (ExperimentConfig): The experiment.
        workers (int, optional): Worker threads for the test matrix.

    Returns:
        Report: Table "ratios" per test function, table "histogram" of log10
        ratios, interval endpoints and spread, refinement and t-grid deltas,
        and the atom suite merged under "atoms".
    """
    stopwatch = common.Stopwatch()
    common.require_potential(config)
    report = common.new_report("equivalence", config)
    thresholds = config.thresholds
    op = common.build_operator(config)
    grid = op.grid
    family = common.build_family(config, op)
    t_grid = _t_grid(config, grid)
    seed = config.seeds["test_functions"]
    entries = hardy_service.test_function_library(
        grid, family, seed, config.n_test_functions
    )
    logger.info(
        "Equivalence study for %s: %d test functions", op.potential.name, len(entries)
    )

    ratios = _ratios(op, entries, t_grid, workers)
    scaled = [
        hardy_service.equivalence_ratio(op, entry.function * SCALING_FACTOR, t_grid)
        if value is not None
        else None
        for entry, value in zip(entries, ratios)
    ]
    rows = []
    for entry, value, scaled_value in zip(entries, ratios, scaled):
        if value is None:
            report.notices.append(
                f"test function {entry.label} is degenerate and was skipped"
            )
            continue
        rows.append({**entry.to_dict(), "ratio": value, "ratio_scaled": scaled_value})
    report.add_table("ratios", rows)
    r_min, r_max = _interval(ratios)

    logs = np.log10([row["ratio"] for row in rows])
    counts, edges = np.histogram(logs, bins=HISTOGRAM_BINS)
    report.add_table(
        "histogram",
        [
            {"log10_low": low, "log10_high": high, "count": int(count)}
            for low, high, count in zip(edges[:-1], edges[1:], counts)
        ],
    )
    report.constants.update(
        {
            "r_min": r_min,
            "r_max": r_max,
            "spread": r_max / r_min,
            "test_functions": len(rows),
            "scale_decades": hardy_service.scale_decades(entries),
            "t_grid_points": len(t_grid),
        }
    )
    report.verdicts["ratio_spread"] = r_max / r_min <= thresholds.ratio_spread_max
    report.verdicts["scaling_invariant"] = all(
        abs(row["ratio"] - row["ratio_scaled"]) <= 1e-9 * row["ratio"] for row in rows
    )

    doubled = _interval(
        _ratios(op, entries, _t_grid(config, grid, per_octave=2), workers)
    )
    report.refinement["t_grid.r_min"] = fit_service.relative_delta(r_min, doubled[0])
    report.refinement["t_grid.r_max"] = fit_service.relative_delta(r_max, doubled[1])

    if config.refine:
        fine_op = common.build_operator(config, refined=True)
        fine_family = common.transfer_family(family, fine_op.grid)
        fine_entries = hardy_service.test_function_library(
            fine_op.grid, fine_family, seed, config.n_test_functions
        )
        fine = _interval(
            _ratios(fine_op, fine_entries, _t_grid(config, fine_op.grid), workers)
        )
        report.refinement["h.r_min"] = fit_service.relative_delta(r_min, fine[0])
        report.refinement["h.r_max"] = fit_service.relative_delta(r_max, fine[1])
    report.verdicts["interval_stable"] = (
        max(report.refinement.values()) < thresholds.refinement_max
    )

    report.merge(
        "atoms",
        hardy_service.atom_bound_suite(
            op,
            family,
            config.n_atoms,
            config.seeds["atoms"],
            refine=config.refine,
            t_grid=t_grid,
            thresholds=thresholds,
            workers=workers,
        ),
    )
    logger.info(
        "Equivalence for %s: ratios in [%.4g, %.4g], passed=%s",
        op.potential.name,
        r_min,
        r_max,
        report.passed,
    )
    return stopwatch.stamp(report)


def run_equivalence_matrix(config, potentials, workers=None):
    """

    Run the equivalence study for several potentials and pool the intervals.


    Args:
        config (ExperimentConfig): Base experiment; its potential is replaced.
        potentials (list): PotentialSpec entries.

    Returns:
        Report: Every study merged under its family name and index, plus the
        pooled interval and spread.
    """
    report = common.new_report("equivalence_matrix", config)
    stopwatch = common.Stopwatch()
    pooled = []
    for index, spec in enumerate(potentials):
        study = run_equivalence(replace(config, potential=spec), workers)
        report.merge(f"{spec.family}{index}", study)
        pooled.extend([study.constants["r_min"], study.constants["r_max"]])
    r_min, r_max = min(pooled), max(pooled)
    report.constants.update({"r_min": r_min, "r_max": r_max, "spread": r_max / r_min})
    report.verdicts["pooled_spread"] = (
        r_max / r_min <= config.thresholds.ratio_spread_max
    )
    return stopwatch.stamp(report)
