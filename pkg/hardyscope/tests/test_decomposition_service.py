"""

Unit tests for decomposition_service.


The constant potential V = c has a closed-form family: the CZ rule
16 d^2 c <= 1 stops at one dyadic size everywhere. Non-constant potentials are
checked against the exhaustive dyadic-tree oracle.
"""

import json

import numpy as np
import pytest

from hardyscope.errors import (
    DomainError,
    FamilyInvalidError,
    RefinementNeededError,
    ReportIOError,
)
from hardyscope.models import DyadicInterval, Grid
from hardyscope.services import decomposition_service, potential_service


def make_potential(grid, family, **params):
    return potential_service.make_potential({"family": family, "params": params}, grid)


@pytest.mark.unit
class TestGeometry:
    """Test cases for dilates, level clamps and the stopping rules."""

    def test_dilate(self, center_cube):
        """Test Q* of [0, 1/4] at beta = 1/8."""

        left, right = decomposition_service.dilate(center_cube, 1, 0.125)

        assert left == pytest.approx(-0.015625)
        assert right == pytest.approx(0.265625)
        assert decomposition_service.dilate(center_cube, 0, 0.125) == center_cube.bounds

    @pytest.mark.parametrize("stars, beta", [(5, 0.125), (-1, 0.125), (1, 0.0)])
    def test_invalid_dilate(self, center_cube, stars, beta):
        """Test that star counts outside 0..4 and beta <= 0 raise DomainError."""

        with pytest.raises(DomainError):
            decomposition_service.dilate(center_cube, stars, beta)

    def test_level_clamps(self, grid, coarse_grid):
        """Test d(Q) in [4h, L/2]."""

        assert decomposition_service.level_clamps(grid) == (-2, 3)
        assert decomposition_service.level_clamps(coarse_grid) == (-2, 2)

    def test_rule_values(self, center_cube):
        """Test |Q| int_16Q V and |Q| int_Q V for V = 1."""

        integrator = decomposition_service.PotentialIntegrator(
            {"family": "constant", "params": {"c": 1.0}}, -10.0, 10.0, 1.0 / 128
        )

        cz = decomposition_service.rule_value(integrator, center_cube, "CZ")
        rh = decomposition_service.rule_value(integrator, center_cube, "RH")

        assert cz == pytest.approx(1.0)
        assert rh == pytest.approx(0.0625)
        assert decomposition_service.satisfies(integrator, center_cube, "CZ")
        with pytest.raises(DomainError):
            decomposition_service.rule_value(integrator, center_cube, "XY")

    def test_integrator_range(self):
        """Test that integrals leaving the tabulated range raise DomainError."""

        integrator = decomposition_service.PotentialIntegrator(
            {"family": "harmonic"}, -1.0, 1.0, 0.01
        )

        assert integrator.integral(0.0, 1.0) == pytest.approx(1.0 / 3.0, rel=1e-4)
        with pytest.raises(DomainError):
            integrator.integral(0.0, 2.0)


@pytest.mark.unit
class TestStoppingTimeDecomposition:
    """Test cases for the stopping-time families."""

    def test_constant_cz_family(self, constant_family):
        """Test that V = 1 gives 32 cubes of length 1/4 covering [-4, 4]."""

        assert len(constant_family) == 32
        assert {cube.diameter for cube in constant_family.intervals} == {0.25}
        assert constant_family.intervals[0].left == -4.0
        assert constant_family.intervals[-1].right == 4.0
        assert constant_family.comparability_constant == 1.0
        assert constant_family.overlap_count == 2
        assert not constant_family.clamp_hits

    def test_constant_rh_family(self, grid):
        """Test that the RH rule d^2 <= 1 gives cubes of length 1."""

        family = decomposition_service.stopping_time_decomposition(
            make_potential(grid, "constant", c=1.0), rule="RH"
        )

        assert len(family) == 8
        assert {cube.diameter for cube in family.intervals} == {1.0}

    def test_finer_constant_family(self, grid):
        """Test that V = 4 stops at the finest level d = 1/8."""

        family = decomposition_service.stopping_time_decomposition(
            make_potential(grid, "constant", c=4.0)
        )

        assert {cube.level for cube in family.intervals} == {3}
        assert len(family) == 64

    def test_refinement_needed(self, grid):
        """Test that V = 100 cannot be resolved above d = 4h."""

        with pytest.raises(RefinementNeededError):
            decomposition_service.stopping_time_decomposition(
                make_potential(grid, "constant", c=100.0)
            )

    def test_clamp_hits(self, grid):
        """Test that a tiny potential stops at the coarsest level and records it."""

        family = decomposition_service.stopping_time_decomposition(
            make_potential(grid, "constant", c=1e-4)
        )

        assert len(family) == 2
        assert len(family.clamp_hits) == 2

        report = decomposition_service.validate_family(family, grid)
        assert any("clamp" in notice for notice in report.notices)

    @pytest.mark.parametrize("rule, domain", [("CZ", (-1.0, 1.0)), ("RH", (-4.0, 4.0))])
    def test_matches_brute_force(self, grid, rule, domain):
        """Test the top-down descent against the exhaustive dyadic oracle."""

        potential = make_potential(grid, "harmonic")
        family = decomposition_service.stopping_time_decomposition(
            potential, rule=rule, domain=domain
        )

        expected = decomposition_service.brute_force_family(
            potential, rule, domain, family.j_min, family.j_max
        )

        assert list(family.intervals) == expected

    @pytest.mark.slow
    @pytest.mark.parametrize("rule", ["CZ", "RH"])
    @pytest.mark.parametrize("seed", range(10))
    def test_piecewise_constant_matches_brute_force(self, rule, seed):
        """Test seeded piecewise constant potentials on the full grid (h = 1/64)."""

        full_grid = Grid(16.0, 2049, 0.5)
        potential = potential_service.make_potential(
            {"family": "piecewise_constant", "seed": seed}, full_grid
        )
        family = decomposition_service.stopping_time_decomposition(
            potential, rule=rule
        )

        expected = decomposition_service.brute_force_family(
            potential, rule, full_grid.core_window, family.j_min, family.j_max
        )

        assert list(family.intervals) == expected
        assert family.j_max == 4

    def test_cubes_shrink_where_potential_grows(self, grid):
        """Test that the RH family of x^2 has d = 1 at 0 and d = 1/4 at the edge."""

        family = decomposition_service.stopping_time_decomposition(
            make_potential(grid, "harmonic"), rule="RH"
        )
        center = min(family.intervals, key=lambda cube: abs(cube.center))
        edge = family.intervals[-1]

        assert center.diameter == 1.0
        assert edge.diameter == 0.25

    @pytest.mark.parametrize(
        "kwargs",
        [{"rule": "XY"}, {"domain": (0.1, 1.0)}, {"domain": (1.0, 1.0)}],
    )
    def test_invalid_arguments(self, constant_op, kwargs):
        """Test unknown rules and domains off the finest dyadic lattice."""

        with pytest.raises(DomainError):
            decomposition_service.stopping_time_decomposition(
                constant_op.potential, **kwargs
            )

    def test_provenance(self, constant_family, grid):
        """Test that the family records the recipe and the grid."""

        assert constant_family.provenance["potential"]["family"] == "constant"
        assert constant_family.provenance["grid"] == grid.to_dict()


@pytest.mark.unit
class TestNeighbors:
    """Test cases for Q'(Q) and Q''(Q)."""

    def test_neighbors_of_center_cube(self, constant_family, center_cube):
        """Test that the triple dilates of equal cubes only reach adjacent cubes."""

        close, far = decomposition_service.neighbors(constant_family, center_cube)

        assert close == [DyadicInterval(2, -1), center_cube, DyadicInterval(2, 1)]
        assert len(far) == 29
        assert center_cube not in far

    def test_edge_cube_has_one_neighbor(self, constant_family):
        """Test the first cube of the family."""

        close, _ = decomposition_service.neighbors(
            constant_family, DyadicInterval(2, -16)
        )

        assert close == [DyadicInterval(2, -16), DyadicInterval(2, -15)]

    def test_single_cube_family(self, grid, center_cube):
        """Test the trivial family {Q}."""

        family = decomposition_service.single_cube_family(center_cube, grid)

        assert family.intervals == (center_cube,)
        assert decomposition_service.neighbors(family, center_cube) == (
            [center_cube],
            [],
        )


@pytest.mark.unit
class TestPartitionOfUnity:
    """Test cases for the smooth partition of unity."""

    def test_bump_profile(self, grid, center_cube):
        """Test that the bump is 1 inside Q, 1/2 at its endpoints and 0 away from it."""

        values = decomposition_service.bump(center_cube, grid, 0.125)

        def at(x):
            return values[grid.center_index + int(round(x * 32))]

        assert at(0.125) == 1.0
        assert at(0.0) == pytest.approx(0.5)
        assert at(0.25) == pytest.approx(0.5)
        assert at(-0.0625) == 0.0

    def test_partition_sums_to_one(self, constant_family, grid):
        """Test sum phi_Q = 1 on the domain and supp phi_Q inside Q*."""

        phis = decomposition_service.partition_of_unity(constant_family, grid)
        total = sum(phi.values for phi in phis)
        mask = grid.core_mask

        np.testing.assert_allclose(total[mask], 1.0, atol=1e-12)
        for cube, phi in zip(constant_family.intervals, phis):
            left, right = decomposition_service.dilate(cube, 1, constant_family.beta)
            outside = (grid.points < left) | (grid.points > right)
            assert np.all(phi.values[outside] == 0.0)

    def test_coverage_gap(self, grid, center_cube):
        """Test that a domain not covered by the cubes raises FamilyInvalidError."""

        family = decomposition_service.assemble_family(
            [center_cube],
            beta=0.125,
            domain=(0.0, 0.5),
            rule="CZ",
            j_min=2,
            j_max=2,
            grid=grid,
        )

        with pytest.raises(FamilyInvalidError):
            decomposition_service.partition_of_unity(family, grid)

    def test_gradient_constant(self, constant_family, grid):
        """Test that the gradient constant is finite and positive."""

        phis = decomposition_service.partition_of_unity(constant_family, grid)

        constant = decomposition_service.gradient_constant(constant_family, phis)

        assert 0.0 < constant < np.inf


@pytest.mark.unit
class TestValidateFamily:
    """Test cases for family validation."""

    def test_valid_family(self, constant_family, constant_op, grid):
        """Test that the constant family passes every check."""

        report = decomposition_service.validate_family(
            constant_family, grid, constant_op.potential
        )

        assert report.verdicts == {
            "coverage": True,
            "disjoint": True,
            "overlap": True,
            "maximality": True,
        }
        assert report.constants["cube_count"] == 32
        assert len(report.tables["cubes"]) == 32

    def test_missing_cube(self, constant_family, grid):
        """Test that dropping a cube breaks coverage and leaves a gap."""

        intervals = [
            cube for cube in constant_family.intervals if cube != DyadicInterval(2, 3)
        ]
        family = decomposition_service.assemble_family(
            intervals,
            beta=0.125,
            domain=constant_family.domain,
            rule="CZ",
            j_min=-2,
            j_max=3,
            grid=grid,
        )

        report = decomposition_service.validate_family(family, grid)

        assert not report.verdicts["coverage"]
        assert not report.verdicts["disjoint"]

    def test_non_maximal_family(self, constant_family, constant_op, grid):
        """Test that splitting every cube breaks maximality."""

        children = [
            child for cube in constant_family.intervals for child in cube.children()
        ]
        family = decomposition_service.assemble_family(
            children,
            beta=0.125,
            domain=constant_family.domain,
            rule="CZ",
            j_min=-2,
            j_max=3,
            grid=grid,
        )

        report = decomposition_service.validate_family(
            family, grid, constant_op.potential
        )

        assert report.verdicts["coverage"]
        assert not report.verdicts["maximality"]
        assert report.constants["maximality_defects"] == 64

    def test_large_beta_notice(self, center_cube, grid):
        """Test that (1 + beta)^3 >= 3 is flagged."""

        family = decomposition_service.single_cube_family(center_cube, grid, beta=0.5)

        assert not family.beta_admissible
        report = decomposition_service.validate_family(family, grid)
        assert any("fails" in notice for notice in report.notices)

    def test_empty_family(self, grid):
        """Test that a family needs at least one cube."""

        with pytest.raises(FamilyInvalidError):
            decomposition_service.assemble_family(
                [],
                beta=0.125,
                domain=(0.0, 1.0),
                rule="CZ",
                j_min=0,
                j_max=3,
                grid=grid,
            )


@pytest.mark.unit
class TestFamilyPersistence:
    """Test cases for the family JSON files."""

    def test_save_and_load(self, constant_family, grid, tmp_path):
        """Test that a saved family is rebuilt with the same cubes and constants."""

        path = decomposition_service.save_family(
            constant_family, str(tmp_path / "f.json")
        )

        loaded = decomposition_service.load_family(path, grid)

        assert loaded.intervals == constant_family.intervals
        assert loaded.neighbor_sets == constant_family.neighbor_sets
        assert loaded.to_dict() == constant_family.to_dict()

    def test_malformed_payload(self, grid, tmp_path):
        """Test that a payload without intervals raises FamilyInvalidError."""

        path = tmp_path / "f.json"
        path.write_text(json.dumps({"beta": 0.125}), encoding="utf-8")

        with pytest.raises(FamilyInvalidError):
            decomposition_service.load_family(str(path), grid)

    def test_missing_file(self, grid, tmp_path):
        """Test that an unreadable file raises ReportIOError."""

        with pytest.raises(ReportIOError):
            decomposition_service.load_family(str(tmp_path / "missing.json"), grid)
