"""Pytest configuration and fixtures for the hardyscope test suite."""

import os
import sys

import pytest

# Add the repository root to the path so we can import hardyscope
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", ".."))

# pylint: disable=wrong-import-position
from hardyscope.models import (  # noqa: E402
    DyadicInterval,
    ExperimentConfig,
    Grid,
    GridSpec,
    OutputSpec,
    PotentialSpec,
)
from hardyscope.services import (  # noqa: E402
    cache_service,
    decomposition_service,
    potential_service,
    semigroup_service,
)


@pytest.fixture(autouse=True)
def clear_caches():
    """Start every test with empty operator and potential caches."""

    cache_service.clear_cache()
    potential_service.clear_cache()
    yield
    cache_service.clear_cache()
    potential_service.clear_cache()


@pytest.fixture
def grid():
    """L = 8, n = 513 (h = 1/32), core window [-4, 4]."""

    return Grid(8.0, 513, 0.5)


@pytest.fixture
def coarse_grid():
    """L = 8, n = 257 (h = 1/16), core window [-4, 4]."""

    return Grid(8.0, 257, 0.5)


@pytest.fixture
def constant_op(grid):
    """The operator of V = 1 on the small grid."""

    return semigroup_service.operator_for(
        {"family": "constant", "params": {"c": 1.0}}, grid
    )


@pytest.fixture
def free_op(grid):
    """The V = 0 operator on the small grid."""

    return semigroup_service.free_operator(grid)


@pytest.fixture
def constant_family(constant_op):
    """CZ family of V = 1 on the core window: 32 cubes of length 1/4."""

    return decomposition_service.stopping_time_decomposition(
        constant_op.potential, rule="CZ"
    )


@pytest.fixture
def center_cube():
    """The family cube [0, 1/4]."""

    return DyadicInterval(2, 0)


@pytest.fixture
def small_config(tmp_path):
    """A fast experiment config on the small grid with V = 1."""

    return ExperimentConfig(
        experiment_id="small",
        grid=GridSpec(8.0, 513, 0.5),
        potential=PotentialSpec("constant", {"c": 1.0}, 0),
        n_atoms=4,
        n_test_functions=8,
        refine=False,
        output=OutputSpec(str(tmp_path / "out"), "json"),
    )
