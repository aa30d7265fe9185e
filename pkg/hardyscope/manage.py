"""

This script is the hardyscope command-line interface.


Each subcommand loads an experiment config (JSON, optional) with overrides,
runs one experiment or export, and writes its report to the output folder.
"""

import logging
import math
import os

import click
import numpy as np

from hardyscope.app import configure_logging
from hardyscope.errors import HardyscopeException
from hardyscope.experiments.certification import run_certification
from hardyscope.experiments.common import build_family, build_operator, new_report
from hardyscope.experiments.equivalence import run_equivalence, run_equivalence_matrix
from hardyscope.experiments.lemmas import run_lemma_suite
from hardyscope.models import GridFunction
from hardyscope.services import (
    config_service,
    decomposition_service,
    grid_service,
    report_service,
    riesz_service,
    semigroup_service,
)

logger = logging.getLogger(__name__)


def config_options(command):
    """Attach --config and the override options shared by every subcommand."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False),
            default=None,
            help="Experiment config (JSON).",
        ),
        click.option(
            "--potential",
            default=None,
            help="Potential family name or potential JSON file.",
        ),
        click.option(
            "--rule",
            type=click.Choice(decomposition_service.RULES),
            default=None,
            help="Stopping rule of the cube family.",
        ),
        click.option("--beta", type=float, default=None, help="Dilation parameter."),
        click.option(
            "--grid-n", type=int, default=None, help="Number of grid points (odd)."
        ),
        click.option(
            "--out",
            type=click.Path(file_okay=False),
            default=None,
            help="Output folder.",
        ),
        click.option(
            "--format",
            "output_format",
            type=click.Choice(report_service.FORMATS),
            default=None,
            help="Report format.",
        ),
        click.option(
            "--seed", type=int, default=None, help="Seed for every seeded step."
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _load(config_path, **overrides):
    overrides["format"] = overrides.pop("output_format", None)
    return config_service.load_config(config_path, overrides)


def _emit(report, config):
    paths = report_service.emit(report, config.output.directory, config.output.format)
    for path in paths:
        click.echo(path)
    verdict = "PASSED" if report.passed else "FAILED"
    click.echo(f"{report.name}: {verdict} ({report.wall_clock:.1f}s)")
    return paths


@click.group()
@click.option(
    "--log-level", default=None, help="Log level (default HARDYSCOPE_LOG_LEVEL)."
)
def cli(log_level):
    """Numerical checks for Hardy spaces of 1D Schrödinger operators."""
    configure_logging(level=log_level)


def _run(runner, config_path, overrides):
    try:
        config = _load(config_path, **overrides)
        _emit(runner(config), config)
    except HardyscopeException as error:
        logger.error("%s failed: %s", runner.__name__, error)
        raise click.ClickException(str(error)) from error


@cli.command()
@config_options
def certify(config_path, **overrides):
    """Build the cube family and certify conditions (D) and (K)."""
    _run(run_certification, config_path, overrides)


@cli.command()
@config_options
def lemmas(config_path, **overrides):
    """Measure the kernel lemma constants."""
    _run(run_lemma_suite, config_path, overrides)


@cli.command()
@config_options
@click.option(
    "--matrix",
    "matrix",
    multiple=True,
    help="Potential family or file; repeat to pool several studies.",
)
def equivalence(config_path, matrix, **overrides):
    """Run the H^1 equivalence study and the atom bound suite."""
    if not matrix:
        _run(run_equivalence, config_path, overrides)
        return

    def run_matrix(config):
        potentials = [config_service.parse_potential(value)[0] for value in matrix]
        return run_equivalence_matrix(config, potentials)

    _run(run_matrix, config_path, overrides)


@cli.command("heat-kernel")
@config_options
@click.option(
    "--t",
    "times",
    type=float,
    multiple=True,
    default=(0.5,),
    show_default=True,
    help="Times to export (repeatable).",
)
def heat_kernel(config_path, times, **overrides):
    """Export T_t on the core window and check Feynman-Kac domination."""
    try:
        config = _load(config_path, **overrides)
        op = build_operator(config)
        os.makedirs(config.output.directory, exist_ok=True)
        for t in times:
            path = os.path.join(config.output.directory, f"heat_kernel_t{t:g}.csv")
            semigroup_service.export_kernel_csv(
                semigroup_service.heat_kernel(op, t), path, op.grid.core_window
            )
            click.echo(path)
        report = new_report("heat_kernel", config)
        report.merge(
            "feynman_kac", semigroup_service.feynman_kac_check(op, list(times))
        )
        report.constants["ground_energy"] = op.ground_energy
        _emit(report, config)
    except HardyscopeException as error:
        raise click.ClickException(str(error)) from error


@cli.command()
@config_options
@click.option(
    "--epsilon", type=float, default=0.0, show_default=True, help="Lower time limit."
)
@click.option(
    "--upper", type=float, default=math.inf, help="Upper time limit (default inf)."
)
def riesz(config_path, epsilon, upper, **overrides):
    """Export the truncated Riesz kernel and its action on core Gaussians."""
    try:
        config = _load(config_path, **overrides)
        op = build_operator(config)
        kernel = riesz_service.riesz_truncated(op, epsilon, upper)
        os.makedirs(config.output.directory, exist_ok=True)
        path = os.path.join(config.output.directory, "riesz_kernel.csv")
        semigroup_service.export_kernel_csv(kernel, path, op.grid.core_window)
        click.echo(path)
        rows = []
        for width in (0.25, 0.5, 1.0, 2.0):
            f = GridFunction(op.grid, np.exp(-0.5 * (op.grid.points / width) ** 2))
            transformed = riesz_service.riesz_apply(op, f, epsilon, upper)
            rows.append(
                {
                    "width": width,
                    "l2_ratio": grid_service.l2_norm(transformed)
                    / grid_service.l2_norm(f),
                    "l1": grid_service.l1_norm(transformed, op.grid.core_window),
                }
            )
        report = new_report("riesz", config)
        report.add_table("gaussians", rows)
        report.constants.update(
            {"epsilon": epsilon, "upper": upper, "ground_energy": op.ground_energy}
        )
        _emit(report, config)
    except HardyscopeException as error:
        raise click.ClickException(str(error)) from error


@cli.command()
@config_options
def decompose(config_path, **overrides):
    """Build the stopping-time family, validate it and save it as JSON."""
    try:
        config = _load(config_path, **overrides)
        op = build_operator(config)
        family = build_family(config, op)
        os.makedirs(config.output.directory, exist_ok=True)
        path = os.path.join(
            config.output.directory, f"{config.experiment_id}.family.json"
        )
        decomposition_service.save_family(family, path)
        click.echo(path)
        report = new_report("decomposition", config)
        report.merge(
            "family",
            decomposition_service.validate_family(family, op.grid, op.potential),
        )
        _emit(report, config)
    except HardyscopeException as error:
        raise click.ClickException(str(error)) from error


if __name__ == "__main__":
    cli()  # pylint: disable=no-value-for-parameter
