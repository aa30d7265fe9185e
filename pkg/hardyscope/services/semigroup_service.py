"""

This module discretizes L = -d^2/dx^2 + V with Dirichlet boundary at +-L and
exposes the heat semigroup T_t = exp(-tL) in spectral form.


It also checks the structural identities of the semigroup: domination by the
free semigroup, the Duhamel formula, mass decay, the global absorption bound
and parabolic scaling.

Kernels are continuum densities: matrix entry divided by h. The free reference
P_t of every identity check is the V = 0 operator on the same grid, so the
identities hold to roundoff. The gap between that grid kernel and the
Gaussian is reported separately.
"""

import logging

import numpy as np
import pandas as pd
from scipy import linalg

from hardyscope.config import Config
from hardyscope.errors import (
    DomainError,
    PreconditionError,
    ReportIOError,
    SingularOperatorError,
    SpectralSolverError,
)
from hardyscope.models import Grid, GridFunction, KernelMatrix, Report, SpectralOperator
from hardyscope.services import cache_service, grid_service, potential_service

logger = logging.getLogger(__name__)


def _check_time(t, allow_zero=False):
    if t < 0 or (t == 0 and not allow_zero) or not np.isfinite(t):
        kind = "nonnegative" if allow_zero else "positive"
        raise DomainError(f"time must be {kind}, got {t}")


def reliable_time_range(grid):
    """

    Times on which the grid semigroup tracks the continuum one.


    Below 64 h^2 the finite-difference kernel is under-resolved; above L^2 / 16
    the Dirichlet boundary is felt in the core.

    Returns:
        tuple: (t_min, t_max)
    """
    return (
        Config.RELIABLE_TIME_CELLS * grid.spacing**2,
        grid.half_width**2 / Config.RELIABLE_TIME_DIVISOR,
    )


def discretize(potential, grid=None):
    """

    Diagonalize the Dirichlet finite-difference Schrödinger operator.


    Args:
        potential (Potential): Sampled potential.
        grid (Grid, optional): Must match the potential's grid.

    Returns:
        SpectralOperator: Eigenvalues ascending, eigenvectors with zero boundary rows.

    Raises:
        DomainError: If the potential lives on a different grid.
        SpectralSolverError: If the eigensolver fails.
    """
    grid = grid or potential.grid
    if potential.grid != grid:
        raise DomainError("potential is sampled on a different grid")

    h = grid.spacing
    interior = potential.values[1:-1]
    diagonal = 2.0 / h**2 + interior
    off_diagonal = np.full(interior.size - 1, -1.0 / h**2)
    try:
        eigenvalues, interior_vectors = linalg.eigh_tridiagonal(diagonal, off_diagonal)
    except (linalg.LinAlgError, ValueError) as error:
        raise SpectralSolverError(
            f"eigh_tridiagonal failed for {potential.name} on n={grid.n_points}: "
            f"{error}; "
            f"diagonal range [{diagonal.min():.4g}, {diagonal.max():.4g}], "
            f"off-diagonal {-1.0 / h**2:.4g}"
        ) from error

    vectors = np.zeros((grid.n_points, eigenvalues.size))
    vectors[1:-1] = interior_vectors
    op = SpectralOperator(grid, potential, eigenvalues, vectors)
    logger.info(
        "Discretized %s on n=%d (h=%.4g): lambda_0=%.6g",
        potential.name,
        grid.n_points,
        h,
        op.ground_energy,
    )
    return op


def operator_for(spec, grid):
    """

    Build (or fetch from the cache) the operator of a potential recipe on a grid.


    Args:
        spec (PotentialSpec or dict): The recipe.
        grid (Grid): The grid.

    Returns:
        SpectralOperator: The shared operator.
    """
    spec = potential_service.as_spec(spec)
    key = cache_service.cache_key(
        "operator",
        grid.to_dict(),
        {"family": spec.family, "params": spec.params, "seed": spec.seed},
    )
    return cache_service.get_or_build(
        key, lambda: discretize(potential_service.make_potential(spec, grid), grid)
    )


def free_operator(grid):
    """The V = 0 operator on the same grid, shared through the cache."""
    return operator_for({"family": "free"}, grid)


def refined_operator(op):
    """The same potential recipe discretized at spacing h / 2."""
    return operator_for(op.potential.spec(), grid_service.refine(op.grid))


def heat_kernel(op, t):
    """

    Heat kernel T_t(x, y) on the whole grid.


    Args:
        op (SpectralOperator): The operator.
        t (float): Time, must be positive.

    Returns:
        KernelMatrix: Continuum kernel density, row index = x.
    """
    _check_time(t)
    vectors = op.vectors
    entries = (vectors * np.exp(-t * op.eigenvalues)) @ vectors.T / op.grid.spacing
    return KernelMatrix(op.grid, (float(t),), entries)


def _kernel_columns(op, t, columns):
    """T_t(., y) for the node indices in `columns` (rows = all x)."""
    vectors = op.vectors
    decay = vectors * np.exp(-t * op.eigenvalues)
    return decay @ vectors[columns].T / op.grid.spacing


def heat_apply(op, t, f):
    """

    Apply T_t to a grid function without forming the kernel.


    t = 0 returns the projection of f on the eigenbasis, i.e. f with its two
    boundary values set to zero.
    """
    _check_time(t, allow_zero=True)
    coefficients = op.vectors.T @ f.values
    return GridFunction(
        op.grid, op.vectors @ (np.exp(-t * op.eigenvalues) * coefficients)
    )


def symmetry_defect(kernel):
    """max |K(x, y) - K(y, x)|."""
    return float(np.max(np.abs(kernel.entries - kernel.entries.T)))


def _free_core_kernel(grid, t):
    core = grid.core_slice
    columns = np.arange(grid.n_points)[core]
    offsets = grid.points[core][:, None] - grid.points[core][None, :]
    return _kernel_columns(free_operator(grid), t, columns)[core], offsets


def discretization_gap(grid, t):
    """

    Sup distance on the core between the grid free kernel and the Gaussian P_t.


    Returns:
        float: max over core x, y of |P_t^grid(x, y) - P_t(x - y)|.
    """
    grid_kernel, offsets = _free_core_kernel(grid, t)
    return float(np.max(np.abs(grid_kernel - grid_service.free_kernel(t, offsets))))


def boundary_gap(grid, t):
    """Sup distance on the core between the grid free kernel and the lattice kernel."""
    grid_kernel, offsets = _free_core_kernel(grid, t)
    lattice = grid_service.lattice_free_kernel(t, offsets, grid.spacing)
    return float(np.max(np.abs(grid_kernel - lattice)))


def feynman_kac_check(op, t_set, reference=None):
    """

    Check 0 <= T_t(x, y) <= P_t(x - y) on the core for every t in t_set.


    Args:
        op (SpectralOperator): The operator.
        t_set (list): Positive times.
        reference (SpectralOperator, optional): Free operator. Defaults to the
            grid free operator.

    Returns:
        Report: Table "domination" with per-t maxima of T - P and of -T.
    """
    t_set = [float(t) for t in t_set]
    if not t_set:
        raise PreconditionError("t_set must be nonempty")
    for t in t_set:
        _check_time(t)
    reference = reference or free_operator(op.grid)
    core = op.grid.core_slice
    columns = np.arange(op.grid.n_points)[core]

    rows = []
    for t in t_set:
        kernel = _kernel_columns(op, t, columns)[core]
        free = _kernel_columns(reference, t, columns)[core]
        rows.append(
            {
                "t": t,
                "max_excess": float(np.max(kernel - free)),
                "max_negative": float(np.max(-kernel)),
                "discretization_gap": discretization_gap(op.grid, t),
                "boundary_gap": boundary_gap(op.grid, t),
            }
        )
        logger.debug("Feynman-Kac t=%g excess=%.3g", t, rows[-1]["max_excess"])

    report = Report(name="feynman_kac")
    table = report.add_table("domination", rows)
    report.constants["max_excess"] = float(table["max_excess"].max())
    report.constants["max_negative"] = float(table["max_negative"].max())
    report.constants["discretization_gap"] = float(table["discretization_gap"].max())
    report.constants["boundary_gap"] = float(table["boundary_gap"].max())
    report.verdicts["domination"] = (
        report.constants["max_excess"] <= Config.DOMINATION_TOLERANCE
    )
    report.verdicts["positivity"] = (
        report.constants["max_negative"] <= Config.POSITIVITY_TOLERANCE
    )
    return report


def _exact_time_weights(t, reference_eigenvalues, eigenvalues):
    """W_ab = int_0^t exp(-(t - s) mu_a - s lambda_b) ds in closed form."""
    mu = reference_eigenvalues[:, None]
    lam = eigenvalues[None, :]
    low = np.minimum(mu, lam)
    gap = np.abs(mu - lam)
    scaled = t * gap
    ratio = np.where(
        scaled > 1e-12, -np.expm1(-scaled) / np.where(gap > 0, gap, 1.0), t
    )
    return np.exp(-t * low) * ratio


def duhamel_residual(op, t, s_steps, reference=None, method="midpoint"):
    """

    Sup-norm residual of T_t - P_t + int_0^t P_(t-s) V T_s ds on core x core.


    The s-integral runs in the eigenbases of both operators: with
    M = Phi_0^T diag(V) Phi it equals Phi_0 (W o M) Phi^T, where W holds the
    time integrals of the mode products. "midpoint" evaluates W by the
    composite midpoint rule with `s_steps` nodes; "exact" uses the closed form.

    Args:
        op (SpectralOperator): The operator.
        t (float): Time, must be positive.
        s_steps (int): Midpoint nodes, at least 8.
        reference (SpectralOperator, optional): Free operator.
        method (str): "midpoint" or "exact".

    Returns:
        float: The residual.
    """
    _check_time(t)
    if s_steps < 8:
        raise PreconditionError(f"s_steps must be at least 8, got {s_steps}")
    if method not in ("midpoint", "exact"):
        raise PreconditionError(f"unknown Duhamel method '{method}'")
    reference = reference or free_operator(op.grid)
    grid = op.grid
    core = grid.core_slice

    if method == "midpoint":
        step = t / s_steps
        nodes = (np.arange(s_steps) + 0.5) * step
        reference_factors = step * np.exp(-np.outer(t - nodes, reference.eigenvalues))
        factors = np.exp(-np.outer(nodes, op.eigenvalues))
        weights = reference_factors.T @ factors
    else:
        weights = _exact_time_weights(t, reference.eigenvalues, op.eigenvalues)

    coupling = reference.vectors.T @ (op.potential.values[:, None] * op.vectors)
    left = reference.vectors[core]
    right = op.vectors[core]
    integral = left @ (weights * coupling) @ right.T
    semigroup = (right * np.exp(-t * op.eigenvalues)) @ right.T
    free = (left * np.exp(-t * reference.eigenvalues)) @ left.T
    residual = np.max(np.abs(semigroup - free + integral)) / grid.spacing
    logger.debug(
        "Duhamel residual t=%g steps=%d (%s): %.3g", t, s_steps, method, residual
    )
    return float(residual)


def mass_profile(op, t, window=None):
    """

    Mass y -> int_window T_t(x, y) dx for every node y at once.


    Args:
        op (SpectralOperator): The operator.
        t (float): Time, must be positive.
        window (tuple, optional): x-window. Defaults to the core window.

    Returns:
        GridFunction: The mass as a function of y.
    """
    _check_time(t)
    weights = grid_service.quadrature_weights(op.grid, window or op.grid.core_window)
    projected = (weights @ op.vectors) * np.exp(-t * op.eigenvalues)
    return GridFunction(op.grid, op.vectors @ projected / op.grid.spacing)


def node_index(grid, y, window=None):
    """

    Index of the node at y.


    Raises:
        DomainError: If y is not a node or lies outside `window` (default: core).
    """
    left, right = window or grid.core_window
    slack = 1e-9 * grid.spacing
    if y < left - slack or y > right + slack:
        raise DomainError(f"y = {y} lies outside the window [{left}, {right}]")
    index = int(round(y / grid.spacing)) + grid.center_index
    if abs(grid.points[index] - y) > 1e-6 * grid.spacing:
        raise DomainError(f"y = {y} is not a grid node (h = {grid.spacing})")
    return index


def mass(op, t, y):
    """int_core T_t(x, y) dx for a core node y."""
    return float(mass_profile(op, t).values[node_index(op.grid, y)])


def _require_positive_spectrum(op):
    if op.ground_energy <= 0:
        raise SingularOperatorError(
            f"lambda_0 = {op.ground_energy:.3g} is not positive; L^-1 is undefined"
        )


def absorption_profile(op):
    """y -> int V(z) (L^-1 delta_y)(z) dz for every node, i.e. L^-1 V."""
    _require_positive_spectrum(op)
    coefficients = (op.vectors.T @ op.potential.values) / op.eigenvalues
    return GridFunction(op.grid, op.vectors @ coefficients)


def global_absorption(op, y):
    """

    Total absorption int_0^inf int V(z) T_s(z, y) dz ds at a core node y.


    Spectral closed form sum_k lambda_k^-1 u_k(y) <V, u_k>.

    Raises:
        SingularOperatorError: If lambda_0 <= 0.
    """
    return float(absorption_profile(op).values[node_index(op.grid, y)])


def absorption_quadrature(op, y, t_max=None, steps=2048, s_min=1e-9):
    """

    Brute-force time quadrature of the absorption at a core node y.


    s = e^u substitution with the midpoint rule on [s_min, t_max]; the piece
    [0, s_min] contributes s_min V(y).
    """
    _require_positive_spectrum(op)
    index = node_index(op.grid, y)
    t_max = t_max or 50.0 / op.ground_energy
    bounds = np.log([s_min, t_max])
    step = (bounds[1] - bounds[0]) / steps
    times = np.exp(bounds[0] + (np.arange(steps) + 0.5) * step)
    projected = op.vectors.T @ op.potential.values
    decay = np.exp(-np.outer(times, op.eigenvalues))
    integrand = decay @ (projected * op.vectors[index])
    return float(np.sum(integrand * times) * step + s_min * op.potential.values[index])


def scaling_check(op, t, tolerance=1e-8):
    """

    Compare T_t(x, y) with t^-1/2 T~_1(x / sqrt(t), y / sqrt(t)) on the core.


    The companion operator lives on the grid of half width L / sqrt(t) with the
    same number of points and the rescaled recipe t V(sqrt(t) .).

    Raises:
        DomainError: If t is outside the reliable time range.
    """
    _check_time(t)
    t_min, t_max = reliable_time_range(op.grid)
    if not t_min <= t <= t_max:
        raise DomainError(
            f"t = {t} is outside the reliable range [{t_min:.4g}, {t_max:.4g}]; "
            "the rescaled grid cannot resolve time 1"
        )
    grid = op.grid
    companion = Grid(grid.half_width / np.sqrt(t), grid.n_points, grid.core_fraction)
    companion_op = discretize(
        potential_service.make_potential(
            potential_service.rescale_spec(op.potential.spec(), t), companion
        ),
        companion,
    )
    core = grid.core_slice
    columns = np.arange(grid.n_points)[core]
    original = _kernel_columns(op, t, columns)[core]
    rescaled = _kernel_columns(companion_op, 1.0, columns)[core] / np.sqrt(t)
    discrepancy = float(np.max(np.abs(original - rescaled)))
    relative = discrepancy / float(np.max(np.abs(original)))

    report = Report(name="scaling")
    report.add_table(
        "scaling",
        [{"t": float(t), "discrepancy": discrepancy, "relative_discrepancy": relative}],
    )
    report.constants["discrepancy"] = discrepancy
    report.verdicts["scaling"] = relative <= tolerance
    return report


def export_kernel_csv(kernel, path, window=None):
    """

    Write a kernel as a CSV matrix (row = x node, column = y node).


    Args:
        kernel (KernelMatrix or RieszKernel): The kernel.
        path (str): Output file.
        window (tuple, optional): Restrict rows and columns to this window.

    Raises:
        ReportIOError: If the file cannot be written.
    """
    grid = kernel.grid
    mask = grid_service.window_mask(grid, window)
    points = grid.points[mask]
    frame = pd.DataFrame(
        kernel.entries[np.ix_(mask, mask)],
        index=pd.Index(points, name="x"),
        columns=[repr(float(y)) for y in points],
    )
    try:
        frame.to_csv(path, float_format="%.17g", lineterminator="\n")
    except OSError as error:
        raise ReportIOError(f"cannot write kernel CSV {path}: {error}") from error
    logger.info("Exported %dx%d kernel to %s", points.size, points.size, path)
    return path
