"""

Unit tests for semigroup_service.


These tests compare the discretized operator with closed forms: the Dirichlet
spectrum of the free grid operator, the constant-potential shift, the
harmonic oscillator levels and the Mehler kernel. They also check the
structural identities (domination, Duhamel, mass decay, absorption, parabolic
scaling).
"""

import math

import numpy as np
import pandas as pd
import pytest

from hardyscope.errors import DomainError, PreconditionError
from hardyscope.models import Grid, GridFunction
from hardyscope.services import grid_service, semigroup_service


def mehler_kernel(t, x, y):
    """Heat kernel of -d^2/dx^2 + x^2."""

    sinh, cosh = math.sinh(2 * t), math.cosh(2 * t)
    exponent = -((x**2 + y**2) * cosh - 2 * x * y) / (2 * sinh)
    return np.exp(exponent) / np.sqrt(2 * np.pi * sinh)


@pytest.mark.unit
class TestDiscretization:
    """Test cases for the eigendecomposition."""

    def test_free_dirichlet_spectrum(self, grid, free_op):
        """Test the free spectrum against (4 / h^2) sin^2(k pi / 2(n - 1))."""

        k = np.arange(1, grid.n_points - 1)
        angles = k * np.pi / (2 * (grid.n_points - 1))
        expected = 4.0 / grid.spacing**2 * np.sin(angles) ** 2

        np.testing.assert_allclose(free_op.eigenvalues, expected, rtol=1e-9)

    def test_constant_potential_shifts_spectrum(self, constant_op, free_op):
        """Test that V = 1 shifts every eigenvalue by exactly 1."""

        np.testing.assert_allclose(
            constant_op.eigenvalues - free_op.eigenvalues, 1.0, atol=1e-8
        )

    def test_harmonic_levels(self, grid):
        """Test lambda_k = 2k + 1 for the harmonic oscillator, k <= 5."""

        op = semigroup_service.operator_for({"family": "harmonic"}, grid)

        np.testing.assert_allclose(op.eigenvalues[:6], 2 * np.arange(6) + 1, atol=1e-2)

    def test_boundary_rows_vanish(self, constant_op):
        """Test the Dirichlet rows and orthonormal columns."""

        assert np.all(constant_op.vectors[0] == 0)
        assert np.all(constant_op.vectors[-1] == 0)
        gram = constant_op.vectors.T @ constant_op.vectors
        np.testing.assert_allclose(gram, np.eye(gram.shape[0]), atol=1e-10)

    def test_discretize_matches_cached_operator(self, constant_op):
        """Test that discretize reproduces the spectrum of the cached operator."""

        op = semigroup_service.discretize(constant_op.potential)

        np.testing.assert_allclose(op.eigenvalues, constant_op.eigenvalues)

    def test_discretize_rejects_foreign_grid(self, constant_op, coarse_grid):
        """Test that a potential sampled on another grid is refused."""

        with pytest.raises(DomainError):
            semigroup_service.discretize(constant_op.potential, coarse_grid)

    def test_operator_cache(self, grid):
        """Test that the same recipe on the same grid shares one operator."""

        spec = {"family": "constant", "params": {"c": 1.0}}

        first = semigroup_service.operator_for(spec, grid)

        assert semigroup_service.operator_for(spec, grid) is first

    def test_reliable_time_range(self, grid):
        """Test [64 h^2, L^2 / 16]."""

        t_range = semigroup_service.reliable_time_range(grid)

        assert t_range == pytest.approx((0.0625, 4.0))


@pytest.mark.unit
class TestHeatKernel:
    """Test cases for T_t."""

    def test_constant_potential_oracle(self, constant_op, free_op):
        """Test T_t = exp(-t) P_t for V = 1."""

        for t in (0.1, 0.5, 1.0):
            kernel = semigroup_service.heat_kernel(constant_op, t).entries
            free = semigroup_service.heat_kernel(free_op, t).entries
            np.testing.assert_allclose(kernel, math.exp(-t) * free, atol=1e-8)

    def test_mehler_oracle(self, grid):
        """Test the harmonic heat kernel against Mehler on the core window."""

        op = semigroup_service.operator_for({"family": "harmonic"}, grid)
        kernel = semigroup_service.heat_kernel(op, 0.5).core()
        points = grid.points[grid.core_slice]
        expected = mehler_kernel(0.5, points[:, None], points[None, :])

        assert kernel[128, 128] == pytest.approx(0.36800, abs=2e-3)
        assert np.max(np.abs(kernel - expected)) <= 5e-3 * np.max(expected)

    def test_kernel_is_symmetric(self, constant_op):
        """Test the symmetry of the kernel density."""

        kernel = semigroup_service.heat_kernel(constant_op, 0.3)

        assert semigroup_service.symmetry_defect(kernel) < 1e-10

    def test_semigroup_property(self, constant_op, grid):
        """Test T_s T_t f = T_(s + t) f."""

        f = grid_service.sample(grid, lambda x: np.exp(-(x**2)))
        once = semigroup_service.heat_apply(constant_op, 0.7, f)
        twice = semigroup_service.heat_apply(
            constant_op, 0.4, semigroup_service.heat_apply(constant_op, 0.3, f)
        )

        np.testing.assert_allclose(once.values, twice.values, atol=1e-12)

    def test_heat_apply_at_zero(self, constant_op, grid):
        """Test that T_0 is the identity on functions vanishing at the boundary."""

        f = grid_service.sample(grid, lambda x: np.exp(-(x**2)))

        np.testing.assert_allclose(
            semigroup_service.heat_apply(constant_op, 0.0, f).values,
            f.values,
            atol=1e-12,
        )

    def test_heat_apply_matches_kernel(self, constant_op, grid):
        """Test that the matrix-free product equals the kernel times h."""

        f = grid_service.sample(grid, lambda x: np.exp(-(x**2)) * (x**2 < 16))
        kernel = semigroup_service.heat_kernel(constant_op, 0.2).entries

        expected = kernel @ f.values * grid.spacing
        applied = semigroup_service.heat_apply(constant_op, 0.2, f).values

        np.testing.assert_allclose(applied, expected, atol=1e-10)

    @pytest.mark.parametrize("t", [0.0, -0.5, math.inf])
    def test_invalid_time(self, constant_op, t):
        """Test that t <= 0 and infinite t raise DomainError."""

        with pytest.raises(DomainError):
            semigroup_service.heat_kernel(constant_op, t)

    def test_export_kernel_csv(self, constant_op, tmp_path):
        """Test that the exported core matrix has one row and column per core node."""

        path = tmp_path / "kernel.csv"
        kernel = semigroup_service.heat_kernel(constant_op, 0.5)

        semigroup_service.export_kernel_csv(
            kernel, str(path), constant_op.grid.core_window
        )

        frame = pd.read_csv(path, index_col=0)
        assert frame.shape == (257, 257)
        assert frame.to_numpy()[128, 128] == pytest.approx(
            kernel.core()[128, 128], rel=1e-12
        )


@pytest.mark.unit
class TestIdentities:
    """Test cases for the structural identities of the semigroup."""

    def test_feynman_kac_domination(self, constant_op):
        """Test 0 <= T_t <= P_t for V = 1."""

        report = semigroup_service.feynman_kac_check(constant_op, [0.1, 0.5, 1.0])

        assert report.verdicts == {"domination": True, "positivity": True}
        assert len(report.tables["domination"]) == 3
        assert report.constants["discretization_gap"] > 0
        assert report.constants["boundary_gap"] < report.constants["discretization_gap"]

    def test_boundary_gap_vanishes_away_from_wall(self, grid):
        """Test that the Dirichlet kernel matches the lattice kernel on the core."""

        gap = semigroup_service.boundary_gap(grid, 0.5)

        assert gap < 1e-6
        assert semigroup_service.discretization_gap(grid, 0.5) > gap

    def test_feynman_kac_needs_times(self, constant_op):
        """Test that an empty time set raises PreconditionError."""

        with pytest.raises(PreconditionError):
            semigroup_service.feynman_kac_check(constant_op, [])

    @pytest.mark.parametrize("potential", ["constant", "harmonic"])
    def test_duhamel_exact(self, grid, potential):
        """Test that the closed-form Duhamel residual vanishes to roundoff."""

        op = semigroup_service.operator_for({"family": potential}, grid)

        assert semigroup_service.duhamel_residual(op, 0.5, 8, method="exact") < 1e-7

    def test_duhamel_midpoint_converges(self, constant_op):
        """Test that the midpoint residual is small and shrinks as the steps double."""

        coarse = semigroup_service.duhamel_residual(constant_op, 1.0, 64)
        fine = semigroup_service.duhamel_residual(constant_op, 1.0, 128)

        assert coarse < 1e-3
        assert fine < coarse

    def test_duhamel_invalid_arguments(self, constant_op):
        """Test that too few steps or an unknown method raise PreconditionError."""

        with pytest.raises(PreconditionError):
            semigroup_service.duhamel_residual(constant_op, 1.0, 4)
        with pytest.raises(PreconditionError):
            semigroup_service.duhamel_residual(constant_op, 1.0, 64, method="simpson")

    def test_mass_decay(self, constant_op, free_op):
        """Test mass(t) = exp(-t) mass_free(t) for V = 1, with mass_free ~ 1 early."""

        for t in (0.1, 0.5):
            free_mass = semigroup_service.mass(free_op, t, 0.0)
            assert free_mass == pytest.approx(1.0, abs=1e-3)
            assert semigroup_service.mass(constant_op, t, 0.0) == pytest.approx(
                math.exp(-t) * free_mass, rel=1e-8
            )

    def test_mass_profile_with_window(self, constant_op):
        """Test that a narrower x-window gives less mass."""

        full = semigroup_service.mass_profile(constant_op, 0.5)
        narrow = semigroup_service.mass_profile(constant_op, 0.5, (-1.0, 1.0))

        assert np.all(narrow.values <= full.values + 1e-12)

    def test_node_index(self, grid):
        """Test node lookup and its failures."""

        assert semigroup_service.node_index(grid, 0.0) == grid.center_index
        with pytest.raises(DomainError):
            semigroup_service.node_index(grid, 0.01)
        with pytest.raises(DomainError):
            semigroup_service.node_index(grid, 6.0)

    def test_global_absorption_constant(self, constant_op):
        """Test that the absorption of V = 1 is 1 away from the boundary."""

        assert semigroup_service.global_absorption(constant_op, 0.0) == pytest.approx(
            1.0, abs=1e-2
        )

    def test_absorption_quadrature_agrees(self, grid):
        """Test the spectral closed form against the brute-force time integral."""

        op = semigroup_service.operator_for({"family": "harmonic"}, grid)

        spectral = semigroup_service.global_absorption(op, 0.5)
        brute = semigroup_service.absorption_quadrature(op, 0.5)

        assert brute == pytest.approx(spectral, rel=1e-3)

    def test_parabolic_scaling(self, grid):
        """Test T_t(x, y) = t^-1/2 T~_1(x / sqrt(t), y / sqrt(t)) for V = x^2."""

        op = semigroup_service.operator_for({"family": "harmonic"}, grid)

        report = semigroup_service.scaling_check(op, 0.25)

        assert report.verdicts["scaling"]

    def test_scaling_outside_range(self, constant_op):
        """Test that an unresolvable time raises DomainError."""

        with pytest.raises(DomainError):
            semigroup_service.scaling_check(constant_op, 10.0)

    def test_refined_operator(self, constant_op):
        """Test that refinement keeps the recipe and halves h."""

        fine = semigroup_service.refined_operator(constant_op)

        assert fine.grid.spacing == pytest.approx(constant_op.grid.spacing / 2)
        assert fine.potential.spec() == constant_op.potential.spec()
        assert fine.ground_energy == pytest.approx(constant_op.ground_energy, rel=1e-3)


@pytest.mark.unit
def test_heat_apply_keeps_grid(constant_op, grid):
    """Test that heat_apply returns a GridFunction on the operator grid."""

    f = GridFunction(grid, np.zeros(grid.n_points))

    assert semigroup_service.heat_apply(constant_op, 1.0, f).grid == grid


@pytest.fixture
def full_grid():
    """L = 16, n = 2049 (h = 1/64), core window [-8, 8]."""

    return Grid(16.0, 2049, 0.5)


@pytest.mark.slow
@pytest.mark.unit
class TestFullGridOracles:
    """Test cases pinning the kernel accuracy on the full grid."""

    @pytest.mark.parametrize("t, tolerance", [(0.05, 4e-4), (0.1, 2e-4)])
    def test_mehler_relative_error(self, full_grid, t, tolerance):
        """Test the harmonic kernel against Mehler on the whole core window."""

        op = semigroup_service.operator_for({"family": "harmonic"}, full_grid)
        kernel = semigroup_service.heat_kernel(op, t).core()
        points = full_grid.points[full_grid.core_slice]
        expected = mehler_kernel(t, points[:, None], points[None, :])

        assert np.max(np.abs(kernel - expected)) <= tolerance * np.max(expected)

    def test_mehler_center_value(self, full_grid):
        """Test T_0.5(0, 0) for V = x^2."""

        op = semigroup_service.operator_for({"family": "harmonic"}, full_grid)
        kernel = semigroup_service.heat_kernel(op, 0.5).core()
        center = kernel.shape[0] // 2

        assert kernel[center, center] == pytest.approx(0.368020, rel=1e-5)
        assert kernel[center, center] == pytest.approx(
            mehler_kernel(0.5, 0.0, 0.0), rel=1e-4
        )

    def test_constant_potential_against_gaussian(self, full_grid):
        """Test T_0.1 = exp(-0.1) P_0.1 for V = 1 with the continuum Gaussian."""

        op = semigroup_service.operator_for(
            {"family": "constant", "params": {"c": 1.0}}, full_grid
        )
        kernel = semigroup_service.heat_kernel(op, 0.1).core()
        points = full_grid.points[full_grid.core_slice]
        expected = math.exp(-0.1) * grid_service.free_kernel(
            0.1, points[:, None] - points[None, :]
        )

        assert np.max(np.abs(kernel - expected)) <= 2e-4 * np.max(expected)
