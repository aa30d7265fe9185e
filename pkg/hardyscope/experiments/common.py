"""

Shared setup for the experiment runners: grids, operators, families and
sampling.
"""

import logging
import time

import numpy as np

from hardyscope.config import Config
from hardyscope.errors import PotentialError
from hardyscope.models import Report
from hardyscope.services import cache_service, decomposition_service, semigroup_service

logger = logging.getLogger(__name__)


def build_grid(config, refined=False):
    """The config's grid, or its h / 2 refinement."""
    grid = config.grid.build()
    return grid.refine() if refined else grid


def require_potential(config):
    """

    Refuse the free potential.


    Raises:
        PotentialError: If the config names V = 0.
    """
    if config.potential.family == "free":
        raise PotentialError("V ≢ 0 required: the free potential is only an oracle")


def build_operator(config, refined=False):
    """The cached spectral operator of the config's potential."""
    return semigroup_service.operator_for(config.potential, build_grid(config, refined))


def build_family(config, op):
    """

    The cached stopping-time family of the config's potential on the core window.


    Raises:
        RefinementNeededError: If the rule cannot be met at the finest level.
    """
    key = cache_service.cache_key(
        "family",
        op.grid.to_dict(),
        op.potential.spec(),
        config.rule,
        config.beta,
    )
    return cache_service.get_or_build(
        key,
        lambda: decomposition_service.stopping_time_decomposition(
            op.potential, rule=config.rule, beta=config.beta
        ),
    )


def transfer_family(family, grid):
    """The same cubes assembled on another grid."""
    return decomposition_service.family_from_dict(family.to_dict(), grid)


def sample_items(items, seed, cap=Config.SAMPLING_CAP):
    """

    All items below `cap`, otherwise a seeded uniform sample in input order.


    Returns:
        list: The selected items.
    """
    items = list(items)
    if len(items) <= cap:
        return items
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(items), size=cap, replace=False))
    logger.info("Sampling %d of %d items (seed %d)", cap, len(items), seed)
    return [items[i] for i in chosen]


def new_report(name, config):
    """An empty report carrying the config snapshot."""
    return Report(name=f"{config.experiment_id}.{name}", config=config.to_dict())


class Stopwatch:
    """Wall-clock timer for reports."""

    def __init__(self):
        self.start = time.perf_counter()

    def stamp(self, report):
        report.wall_clock = time.perf_counter() - self.start
        return report
