"""

This module measures the constants in the kernel and commutator estimates
behind the Riesz-transform characterization of H^1_L.


Each check returns a Report with the raw sup tables and the recorded constant.
Existence of a constant is certified by refinement stability: the same
functional evaluated at h and h/2 must change by less than the configured
relative delta.
"""

import logging
import math

import numpy as np
from numpy.polynomial import legendre

from hardyscope.config import Config
from hardyscope.errors import DegenerateInputError, PreconditionError, RangeError
from hardyscope.models import GridFunction, Report
from hardyscope.services import (
    decomposition_service,
    fit_service,
    grid_service,
    riesz_service,
    semigroup_service,
    worker_service,
)

logger = logging.getLogger(__name__)

# Exponential weights are applied up to |x - y| <= WEIGHT_REACH sqrt(t)
WEIGHT_REACH = 20.0
QUADRATURE_SLACK = 1e-2


def refinement_check(functional, op, threshold=Config.REFINEMENT_MAX):
    """

    Evaluate a scalar functional at h and h/2.


    Args:
        functional (callable): Maps a SpectralOperator to a float.
        op (SpectralOperator): The coarse operator.
        threshold (float): Largest accepted relative delta.

    Returns:
        dict: coarse, fine, delta and stable.
    """
    coarse = float(functional(op))
    fine = float(functional(semigroup_service.refined_operator(op)))
    delta = fit_service.relative_delta(coarse, fine)
    return {"coarse": coarse, "fine": fine, "delta": delta, "stable": delta < threshold}


def sample_nodes(mask, seed=0, cap=Config.SAMPLING_CAP):
    """Indices where `mask` holds: all below `cap`, a seeded sorted sample above."""
    indices = np.flatnonzero(mask)
    if indices.size <= cap:
        return indices
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(indices, size=cap, replace=False))


def suggested_alpha(limit=Config.EXP_OVERFLOW_LIMIT):
    """Largest alpha with alpha (4 alpha + 12) <= limit."""
    return (-12.0 + math.sqrt(144.0 + 16.0 * limit)) / 8.0


def lemma21_functionals(op, t, alpha, columns):
    """

    A_2(t, y) and A_1(t, y) for the node indices `columns`.


    A_2 = t^(3/2) int |d/dx T_t(x, y)|^2 exp(alpha |x - y| / sqrt(t)) dx and
    A_1 = t^(1/2) int |d/dx T_t(x, y)| exp(alpha |x - y| / sqrt(t)) dx, both
    over |x - y| <= (4 alpha + 12) sqrt(t).

    Returns:
        tuple: (A_2 array, A_1 array), one entry per column.
    """
    width = 4.0 * alpha + 12.0
    if alpha * width > Config.EXP_OVERFLOW_LIMIT:
        raise RangeError(
            f"alpha = {alpha} overflows the weighted integrand; use alpha <= "
            f"{suggested_alpha():.3f}"
        )
    grid = op.grid
    h = grid.spacing
    points = grid.points
    decay = op.gradients * np.exp(-t * op.eigenvalues)
    derivative = decay @ op.vectors[columns].T / h
    distance = np.abs(points[:, None] - points[columns][None, :]) / math.sqrt(t)
    weight = np.where(
        distance <= width, h * np.exp(alpha * np.minimum(distance, width)), 0.0
    )
    second = t**1.5 * np.sum(derivative**2 * weight, axis=0)
    first = math.sqrt(t) * np.sum(np.abs(derivative) * weight, axis=0)
    return second, first


def lemma21_check(op, t_set, alpha, refine=True, seed=0, thresholds=None):
    """

    Weighted L^2 and L^1 bounds on d/dx T_t(., y), sup over core y and t.


    Args:
        op (SpectralOperator): The operator.
        t_set (list): Times inside the reliable range.
        alpha (float): Exponential weight, >= 0.
        refine (bool): Also evaluate at h/2 and record the deltas.
        seed (int): Seed for sampling core nodes.
        thresholds (Thresholds, optional): Verdict thresholds.

    Returns:
        Report: Table "lemma21" with per-t sups, constants A2 and A1.

    Raises:
        RangeError: If alpha overflows or a time leaves the reliable range.
    """
    if alpha < 0:
        raise PreconditionError(f"alpha must be nonnegative, got {alpha}")
    t_min, t_max = semigroup_service.reliable_time_range(op.grid)
    for t in t_set:
        if not t_min <= t <= t_max:
            raise RangeError(
                f"t = {t} is outside the reliable range [{t_min:.4g}, {t_max:.4g}]"
            )
    refinement_max = thresholds.refinement_max if thresholds else Config.REFINEMENT_MAX

    def sups(operator):
        columns = sample_nodes(operator.grid.core_mask, seed)
        rows = []
        for t in t_set:
            second, first = lemma21_functionals(operator, t, alpha, columns)
            rows.append(
                {
                    "t": float(t),
                    "A2_sup": float(second.max()),
                    "A2_min": float(second.min()),
                    "A1_sup": float(first.max()),
                    "A1_min": float(first.min()),
                }
            )
        return rows

    report = Report(name="lemma21")
    table = report.add_table("lemma21", sups(op))
    report.constants.update(
        {
            "alpha": alpha,
            "A2": float(table["A2_sup"].max()),
            "A1": float(table["A1_sup"].max()),
        }
    )
    report.verdicts["finite"] = bool(
        np.isfinite(report.constants["A2"]) and np.isfinite(report.constants["A1"])
    )
    if refine:
        fine = semigroup_service.refined_operator(op)
        fine_table = report.add_table("lemma21_refined", sups(fine))
        for name in ("A2", "A1"):
            delta = fit_service.relative_delta(
                report.constants[name], float(fine_table[f"{name}_sup"].max())
            )
            report.refinement[name] = delta
        report.verdicts["refinement_stable"] = (
            max(report.refinement.values()) < refinement_max
        )
    return report


def default_epsilon_grid(m_max=Config.EPS_GRID_M_MAX):
    """eps = 2^-m, m = 1..m_max."""
    return [2.0**-m for m in range(1, m_max + 1)]


def refined_epsilon_grid(m_max=Config.EPS_GRID_M_MAX):
    """eps = 2^-m/2 between 2^-1 and 2^-m_max, a superset of the default grid."""
    return [2.0 ** (-m / 2) for m in range(2, 2 * m_max + 1)]


def neighbor_star_mask(family, cube, grid):
    """Nodes of the union of Q'* over Q' in Q'(Q)."""
    close, _far = decomposition_service.neighbors(family, cube)
    mask = np.zeros(grid.n_points, dtype=bool)
    for neighbor in close:
        left, right = decomposition_service.dilate(neighbor, 1, family.beta)
        mask |= grid_service.window_mask(
            grid, (max(left, -grid.half_width), min(right, grid.half_width))
        )
    return mask


def lemma22_check(op, family, cube, epsilon_grid=None, seed=0):
    """

    sup_y int_core max_eps |R_far^eps(x, y)| dx over y in the union of Q'*.


    Returns:
        Report: Table "lemma22" of the x-integral per sampled y, table
        "per_epsilon" of the single-eps values, constant "constant".
    """
    epsilon_grid = sorted(epsilon_grid or default_epsilon_grid())
    for epsilon in epsilon_grid:
        if not 0 < epsilon < 1:
            raise PreconditionError(f"epsilon grid must lie in (0, 1), got {epsilon}")
    grid = op.grid
    columns = sample_nodes(neighbor_star_mask(family, cube, grid), seed)
    weights = grid_service.quadrature_weights(grid, grid.core_window)

    envelope = np.zeros((grid.n_points, columns.size))
    per_epsilon = []
    for epsilon in epsilon_grid:
        _local, far = riesz_service.split_windows(cube, epsilon)
        if far is None:
            kernel = np.zeros_like(envelope)
        else:
            spectral = riesz_service.riesz_weights(op.eigenvalues, *far)
            kernel = (op.gradients * spectral) @ op.vectors[columns].T / grid.spacing
        magnitude = np.abs(kernel)
        per_epsilon.append(
            {"epsilon": epsilon, "sup_l1": float(np.max(weights @ magnitude))}
        )
        envelope = np.maximum(envelope, magnitude)

    integrals = weights @ envelope
    report = Report(name="lemma22")
    report.add_table(
        "lemma22",
        [
            {"y": float(grid.points[c]), "l1": float(v)}
            for c, v in zip(columns, integrals)
        ],
    )
    report.add_table("per_epsilon", per_epsilon)
    report.constants.update(
        {"cube_j": cube.level, "cube_k": cube.index, "constant": float(integrals.max())}
    )
    report.verdicts["finite"] = bool(np.isfinite(report.constants["constant"]))
    return report


def lemma23_check(op, family, cube, t_steps=48, reference=None, seed=0):
    """

    Near and far parts of int J_Q(x, y) dx with
    J_Q(x, y) = int_0^{d(Q)^2} |d/dx (T_t - P_t)(x, y)| dt / sqrt(t).


    The near field integrates over Q**, the far field over the core outside
    Q**. The far field is compared with the Cauchy-Schwarz bound with weight
    exp(2 |x - y| / sqrt(t)), evaluated with the same trapezoid weights so that
    it holds exactly on the grid. Beyond |x - y| = 20 sqrt(t) the far integrand
    enters the bound directly.
    Also records sup_y int |W_Q(x, y)| dx. Sup over y in Q* (sampled).

    Returns:
        Report: Table "lemma23" per sampled y; constants near, far, far_bound, w_l1.
    """
    grid = op.grid
    h = grid.spacing
    t_max = semigroup_service.reliable_time_range(grid)[1]
    if cube.diameter**2 > t_max:
        raise RangeError(
            f"d(Q)^2 = {cube.diameter**2:g} exceeds the reliable time range"
        )
    reference = reference or semigroup_service.free_operator(grid)
    star = decomposition_service.dilate(cube, 1, family.beta)
    double_star = decomposition_service.dilate(cube, 2, family.beta)
    star_clipped = (max(star[0], -grid.half_width), min(star[1], grid.half_width))
    columns = sample_nodes(grid_service.window_mask(grid, star_clipped), seed)
    points = grid.points
    core_weights = grid_service.quadrature_weights(grid, grid.core_window)
    near_mask = grid_service.window_mask(
        grid,
        (
            max(double_star[0], -grid.half_width),
            min(double_star[1], grid.half_width),
        ),
    )
    far_weights = core_weights * ~near_mask

    abscissae, weights = legendre.leggauss(t_steps)
    root_tau = cube.diameter
    u_nodes = 0.5 * root_tau * (abscissae + 1.0)
    u_weights = 0.5 * root_tau * weights

    j_values = np.zeros((grid.n_points, columns.size))
    bound = np.zeros(columns.size)
    distance = np.abs(points[:, None] - points[columns][None, :])
    for u, weight in zip(u_nodes, u_weights):
        t = u * u
        difference = (
            (op.gradients * np.exp(-t * op.eigenvalues)) @ op.vectors[columns].T
            - (reference.gradients * np.exp(-t * reference.eigenvalues))
            @ reference.vectors[columns].T
        ) / h
        j_values += 2.0 * weight * np.abs(difference)
        reach = distance / u <= WEIGHT_REACH
        scaled = np.where(reach, distance / u, 0.0)
        weighted = core_weights @ (difference**2 * np.exp(2.0 * scaled) * reach)
        tails = far_weights @ (np.exp(-2.0 * scaled) * reach)
        beyond = far_weights @ (np.abs(difference) * ~reach)
        bound += 2.0 * weight * (np.sqrt(weighted * tails) + beyond)

    near = (core_weights * near_mask) @ j_values
    far = far_weights @ j_values
    weights_op, weights_free = riesz_service.w_weights(
        op, reference, 0.0, cube.diameter**2
    )
    w_columns = (
        (op.gradients * weights_op) @ op.vectors[columns].T
        - (reference.gradients * weights_free) @ reference.vectors[columns].T
    ) / h
    w_l1 = core_weights @ np.abs(w_columns)

    report = Report(name="lemma23")
    report.add_table(
        "lemma23",
        [
            {
                "y": float(points[c]),
                "near": float(n),
                "far": float(f),
                "far_bound": float(b),
                "w_l1": float(w),
            }
            for c, n, f, b, w in zip(columns, near, far, bound, w_l1)
        ],
    )
    report.constants.update(
        {
            "cube_j": cube.level,
            "cube_k": cube.index,
            "near": float(near.max()),
            "far": float(far.max()),
            "far_bound": float(bound.max()),
            "w_l1": float(w_l1.max()),
        }
    )
    report.verdicts["far_bound_holds"] = bool(np.all(far <= bound * (1 + 1e-6) + 1e-12))
    report.verdicts["w_dominated"] = bool(
        np.all(w_l1 <= (near + far) * (1 + QUADRATURE_SLACK) + 1e-12)
    )
    return report


def _local_support(family, cube, grid):
    return neighbor_star_mask(family, cube, grid).astype(float)


def commutator_check(op, family, cube, f, phis=None):
    """

    ||R(phi_Q f) - phi_Q R f||_L1(core) / ||f||_L1(Q~) with f masked to
    Q~ = union of Q'* over Q' in Q'(Q).

    Raises:
        DegenerateInputError: If f vanishes on Q~.
    """
    grid = op.grid
    phis = phis or decomposition_service.partition_of_unity(family, grid)
    phi = phis[family.index_of(cube)]
    masked = f * _local_support(family, cube, grid)
    norm = grid_service.l1_norm(masked)
    if norm == 0:
        raise DegenerateInputError(f"f vanishes on the neighborhood of {cube}")
    inner = riesz_service.riesz_apply(op, phi * masked)
    commutator = inner - phi * riesz_service.riesz_apply(op, masked)
    ratio = grid_service.l1_norm(commutator, grid.core_window) / norm

    report = Report(name="commutator")
    report.add_table("commutator", [{"j": cube.level, "k": cube.index, "ratio": ratio}])
    report.constants["ratio"] = ratio
    report.verdicts["finite"] = bool(np.isfinite(ratio))
    return report


def far_field_sum_check(op, family, f, phis=None, workers=None):
    """

    sum_Q ||1_{Q***} R(sum_{Q'' in Q''(Q)} phi_Q'' f)||_L1 / ||f||_L1.


    Raises:
        DegenerateInputError: If f vanishes.
    """
    grid = op.grid
    norm = grid_service.l1_norm(f)
    if norm == 0:
        raise DegenerateInputError("far_field_sum_check needs f != 0")
    phis = phis or decomposition_service.partition_of_unity(family, grid)
    stack = np.array([phi.values for phi in phis])
    total = stack.sum(axis=0)

    def term(position):
        cube = family.intervals[position]
        near = stack[list(family.neighbor_sets[position])].sum(axis=0)
        far_part = GridFunction(grid, f.values * (total - near))
        triple = decomposition_service.dilate(cube, 3, family.beta)
        window = (max(triple[0], -grid.half_width), min(triple[1], grid.half_width))
        return grid_service.l1_norm(riesz_service.riesz_apply(op, far_part), window)

    terms = worker_service.map_ordered(term, range(len(family)), workers)
    ratio = float(sum(terms)) / norm

    report = Report(name="far_field_sum")
    report.add_table(
        "far_field",
        [
            {"j": cube.level, "k": cube.index, "l1": float(value)}
            for cube, value in zip(family.intervals, terms)
        ],
    )
    report.constants["ratio"] = ratio
    report.verdicts["finite"] = bool(np.isfinite(ratio))
    return report


def pairing_bound_check(op, functions, test_functions):
    """

    Worst constant C in |<R f, phi>| <= C ||f||_1 (||phi||_2 + ||phi'||_inf).


    Args:
        op (SpectralOperator): The operator.
        functions (list): GridFunctions f.
        test_functions (list): Smooth GridFunctions phi.

    Returns:
        Report: Table "pairing" per (f, phi) pair, constant "constant".
    """
    rows = []
    for f_index, f in enumerate(functions):
        norm = grid_service.l1_norm(f)
        if norm == 0:
            continue
        transformed = riesz_service.riesz_apply(op, f)
        for phi_index, phi in enumerate(test_functions):
            pairing = abs(grid_service.integrate(transformed * phi))
            scale = grid_service.l2_norm(phi) + float(
                np.max(np.abs(grid_service.derivative(phi).values))
            )
            rows.append(
                {
                    "f": f_index,
                    "phi": phi_index,
                    "pairing": pairing,
                    "ratio": pairing / (norm * scale),
                }
            )
    if not rows:
        raise DegenerateInputError("pairing_bound_check needs a nonzero f")
    report = Report(name="pairing")
    table = report.add_table("pairing", rows)
    report.constants["constant"] = float(table["ratio"].max())
    report.verdicts["finite"] = bool(np.isfinite(report.constants["constant"]))
    return report


def w_epsilon_convergence(
    op, family, cube, f, m_max=Config.EPS_GRID_M_MAX, phis=None, reference=None
):
    """

    ||W^eps(phi_Q f) - W(phi_Q f)||_L1(core) along eps = 2^-m d(Q)^2.


    Returns:
        Report: Table "w_epsilon" of (m, eps, distance); constant "w_ratio" =
        ||W(phi_Q f)||_1 / ||phi_Q f||_1; verdict "monotone".
    """
    grid = op.grid
    phis = phis or decomposition_service.partition_of_unity(family, grid)
    localized = phis[family.index_of(cube)] * f
    norm = grid_service.l1_norm(localized)
    if norm == 0:
        raise DegenerateInputError(f"phi_Q f vanishes for {cube}")
    reference = reference or semigroup_service.free_operator(grid)
    limit = riesz_service.w_apply(op, cube, localized, reference=reference)
    rows = []
    for m in range(1, m_max + 1):
        epsilon = 2.0**-m * cube.diameter**2
        approximation = riesz_service.w_apply(op, cube, localized, epsilon, reference)
        rows.append(
            {
                "m": m,
                "epsilon": epsilon,
                "distance": grid_service.l1_norm(
                    approximation - limit, grid.core_window
                ),
            }
        )
    report = Report(name="w_epsilon")
    table = report.add_table("w_epsilon", rows)
    distances = table["distance"].to_numpy()
    report.constants["w_ratio"] = grid_service.l1_norm(limit, grid.core_window) / norm
    report.constants["last_distance"] = float(distances[-1])
    report.verdicts["monotone"] = bool(
        np.all(np.diff(distances) <= 1e-12 + 1e-9 * distances[:-1])
    )
    return report
