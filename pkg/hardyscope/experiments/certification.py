"""

This module certifies a stopping-time family: the family axioms, the
partition of unity and the decay conditions (D) and (K) on every cube (or a
seeded sample of at most 64 cubes).
"""

import logging

import pandas as pd

from hardyscope.errors import (
    FamilyInvalidError,
    RangeError,
    RefinementNeededError,
)
from hardyscope.experiments import common
from hardyscope.services import (
    condition_service,
    decomposition_service,
    worker_service,
)

logger = logging.getLogger(__name__)


def _condition_D_item(op, family, cube, thresholds):
    try:
        report = condition_service.check_condition_D(
            op, family, cube, thresholds=thresholds
        )
        return report, None
    except RangeError as error:
        return None, f"condition (D) skipped on {cube}: {error}"


def _condition_K_item(op, family, cube, thresholds):
    return condition_service.check_condition_K(
        op.potential, cube, family.beta, thresholds=thresholds
    )


def _stack(reports, table_name):
    frames = []
    for report in reports:
        frame = report.tables[table_name].copy()
        frame.insert(0, "k_index", report.constants["cube_k"])
        frame.insert(0, "j", report.constants["cube_j"])
        frames.append(frame)
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def run_certification(config, workers=None):
    """

    Build the family of the config's potential and certify it.


    Args:
        config (ExperimentConfig): The experiment.
        workers (int, optional): Worker threads for the per-cube checks.

    Returns:
        Report: Family invariants, per-cube (D) and (K) summaries with their raw
        tables, and the aggregate verdicts. An invalid family yields a failed
        report rather than an exception.

    Raises:
        PotentialError: If the config names the free potential.
    """
    stopwatch = common.Stopwatch()
    common.require_potential(config)
    report = common.new_report("certification", config)
    op = common.build_operator(config)
    grid = op.grid
    logger.info("Certifying %s family for %s", config.rule, op.potential.name)

    try:
        family = common.build_family(config, op)
        phis = decomposition_service.partition_of_unity(family, grid)
    except (FamilyInvalidError, RefinementNeededError) as error:
        logger.warning("Family construction failed: %s", error)
        report.verdicts["family_valid"] = False
        report.notices.append(f"family invalid: {error}")
        return stopwatch.stamp(report)

    report.verdicts["family_valid"] = True
    report.merge(
        "family", decomposition_service.validate_family(family, grid, op.potential)
    )
    report.constants["gradient_constant"] = decomposition_service.gradient_constant(
        family, phis
    )

    cubes = common.sample_items(family.intervals, config.seeds["sampling"])
    if len(cubes) < len(family):
        report.notices.append(
            f"conditions checked on {len(cubes)} of {len(family)} cubes "
            f"(seed {config.seeds['sampling']})"
        )

    d_results = worker_service.map_ordered(
        lambda cube: _condition_D_item(op, family, cube, config.thresholds),
        cubes,
        workers,
    )
    d_reports = [result for result, _ in d_results if result is not None]
    report.notices.extend(notice for _, notice in d_results if notice)
    report.add_table(
        "condition_D",
        [
            {
                "j": item.constants["cube_j"],
                "k": item.constants["cube_k"],
                "epsilon_hat": item.constants["epsilon_hat"],
                "C_hat": item.constants["C_hat"],
                "fit_residual": item.constants["fit_residual"],
                "superpolynomial": item.constants["superpolynomial"],
                "passed": item.verdicts["condition_D"],
            }
            for item in d_reports
        ],
    )
    report.add_table("condition_D_mass", _stack(d_reports, "mass"))
    report.constants["condition_D_checked"] = len(d_reports)
    if d_reports:
        report.constants["epsilon_hat_min"] = min(
            item.constants["epsilon_hat"] for item in d_reports
        )
    else:
        report.notices.append(
            "no cube is small enough for condition (D) on this domain"
        )
    report.verdicts["condition_D"] = all(
        item.verdicts["condition_D"] for item in d_reports
    )

    k_reports = worker_service.map_ordered(
        lambda cube: _condition_K_item(op, family, cube, config.thresholds),
        cubes,
        workers,
    )
    report.add_table(
        "condition_K",
        [
            {
                "j": item.constants["cube_j"],
                "k": item.constants["cube_k"],
                "delta_hat": item.constants["delta_hat"],
                "C_hat": item.constants["C_hat"],
                "fit_residual": item.constants["fit_residual"],
                "passed": item.verdicts["condition_K"],
            }
            for item in k_reports
        ],
    )
    report.add_table("condition_K_absorption", _stack(k_reports, "absorption"))
    fitted = [item.constants["delta_hat"] for item in k_reports]
    fitted = [value for value in fitted if value is not None]
    if fitted:
        report.constants["delta_hat_min"] = min(fitted)
        report.constants["condition_K_residual_max"] = max(
            item.constants["fit_residual"] for item in k_reports
        )
    for item in k_reports:
        report.notices.extend(item.notices)
    report.verdicts["condition_K"] = all(
        item.verdicts["condition_K"] for item in k_reports
    )

    logger.info(
        "Certification of %s: %d cubes, passed=%s",
        op.potential.name,
        len(family),
        report.passed,
    )
    return stopwatch.stamp(report)
