"""

Unit tests for potential_service.


This module checks every shipped potential family, the seeded realizations,
the rescaled recipes and loading recipes from JSON files.
"""

import json

import numpy as np
import pytest

from hardyscope.errors import PotentialError
from hardyscope.models import PotentialSpec
from hardyscope.services import potential_service


@pytest.mark.unit
class TestFamilies:
    """Test cases for the potential families."""

    def test_constant(self, grid):
        """Test V = c on every node."""

        potential = potential_service.make_potential(
            {"family": "constant", "params": {"c": 2.5}}, grid
        )

        np.testing.assert_array_equal(potential.values, 2.5)
        assert potential.name == "constant"
        assert not potential.is_free

    def test_step(self):
        """Test the step switches at `position`."""

        spec = PotentialSpec("step", {"low": 0.5, "high": 3.0, "position": 1.0})

        values = potential_service.potential_values(spec, np.array([0.0, 1.0, 2.0]))

        np.testing.assert_array_equal(values, [0.5, 3.0, 3.0])

    def test_harmonic(self):
        """Test V = scale * x^2."""

        values = potential_service.potential_values(
            {"family": "harmonic", "params": {"scale": 2.0}}, np.array([-1.0, 0.0, 3.0])
        )

        np.testing.assert_allclose(values, [2.0, 0.0, 18.0])

    def test_inverse_power_is_capped(self):
        """Test min(|x|^-a, cap), including x = 0."""

        values = potential_service.potential_values(
            {"family": "inverse_power", "params": {"a": 0.5, "cap": 10.0}},
            np.array([0.0, 0.0001, 4.0]),
        )

        np.testing.assert_allclose(values, [10.0, 10.0, 0.5])

    def test_spikes_are_seeded(self, grid):
        """Test that equal seeds give equal spikes on a zero background."""

        spec = {"family": "spikes", "params": {"count": 4}, "seed": 7}
        first = potential_service.make_potential(spec, grid)
        potential_service.clear_cache()
        second = potential_service.make_potential(spec, grid)
        other = potential_service.make_potential({**spec, "seed": 8}, grid)

        np.testing.assert_array_equal(first.values, second.values)
        assert not np.array_equal(first.values, other.values)
        assert first.values.min() == 0.0
        assert first.values.max() >= 1.0

    def test_spikes_floor(self, grid):
        """Test that an explicit floor lifts the background."""

        spec = {"family": "spikes", "params": {"count": 4, "floor": 0.25}, "seed": 7}
        bare = potential_service.make_potential({**spec, "params": {"count": 4}}, grid)

        lifted = potential_service.make_potential(spec, grid)

        np.testing.assert_allclose(lifted.values, bare.values + 0.25)

    def test_piecewise_constant_outside_value(self):
        """Test that the pieces cover [-span, span] and `outside` holds beyond."""

        spec = {
            "family": "piecewise_constant",
            "params": {
                "span": 2.0,
                "pieces": 4,
                "low": 1.0,
                "high": 2.0,
                "outside": 0.0,
            },
            "seed": 3,
        }

        values = potential_service.potential_values(
            spec, np.array([-3.0, -1.5, 0.5, 3.0])
        )

        assert values[0] == 0.0 and values[-1] == 0.0
        assert np.all((values[1:3] >= 1.0) & (values[1:3] <= 2.0))

    @pytest.mark.parametrize(
        "spec",
        [
            {"family": "constant", "params": {"c": -1.0}},
            {"family": "inverse_power", "params": {"a": 1.0}},
            {"family": "harmonic", "params": {"scale": 0.0}},
            {"family": "spikes", "params": {"count": 0}},
            {"family": "unknown"},
            {"params": {}},
        ],
    )
    def test_invalid_specs(self, grid, spec):
        """Test that invalid recipes raise PotentialError."""

        with pytest.raises(PotentialError):
            potential_service.make_potential(spec, grid)

    def test_vanishing_potential_needs_free_tag(self, grid):
        """Test that V = 0 is only accepted under the free family."""

        with pytest.raises(PotentialError):
            potential_service.make_potential(
                {"family": "constant", "params": {"c": 0.0}}, grid
            )

        assert potential_service.free_potential(grid).is_free


@pytest.mark.unit
class TestRescaling:
    """Test cases for the rescaled recipes t V(sqrt(t) x)."""

    def test_rescale_harmonic(self):
        """Test that t V(sqrt(t) x) = t^2 x^2 for V = x^2."""

        spec = potential_service.rescale_spec({"family": "harmonic"}, 4.0)
        x = np.array([0.5, 1.0])

        np.testing.assert_allclose(
            potential_service.potential_values(spec, x), 16.0 * x**2
        )

    def test_rescale_composes(self):
        """Test that rescaling twice multiplies the time scales."""

        spec = potential_service.rescale_spec(
            potential_service.rescale_spec({"family": "constant"}, 2.0), 3.0
        )

        assert spec.params["time_scale"] == pytest.approx(6.0)
        values = potential_service.potential_values(spec, np.array([1.0]))
        assert values[0] == pytest.approx(6.0)


@pytest.mark.unit
class TestLoadPotentialSpec:
    """Test cases for JSON potential recipes."""

    def test_load_with_grid_section(self, tmp_path):
        """Test loading a recipe with its own grid."""

        path = tmp_path / "potential.json"
        path.write_text(
            json.dumps(
                {
                    "family": "step",
                    "params": {"high": 2.0},
                    "seed": 1,
                    "grid": {"half_width": 8.0, "n_points": 257, "core_fraction": 0.5},
                }
            ),
            encoding="utf-8",
        )

        spec, grid_spec = potential_service.load_potential_spec(str(path))

        assert spec.family == "step" and spec.seed == 1
        assert grid_spec.n_points == 257

    def test_load_malformed_file(self, tmp_path):
        """Test that unreadable JSON raises PotentialError."""

        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")

        with pytest.raises(PotentialError):
            potential_service.load_potential_spec(str(path))
