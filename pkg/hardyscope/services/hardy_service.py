"""

This module computes the heat maximal function, the H^1_L norm, Riesz norms
and their ratio, and generates the atoms and test functions they are tested
with.


The supremum over t > 0 is taken over a dyadic time grid clipped to the
reliable range, together with |f| for the t -> 0 limit.
"""

import json
import logging
import math

import numpy as np

from hardyscope.config import Config
from hardyscope.errors import (
    DegenerateInputError,
    DomainError,
    PreconditionError,
    ReportIOError,
    ResolutionError,
)
from hardyscope.models import (
    Atom,
    DyadicInterval,
    GridFunction,
    LibraryFunction,
    Report,
)
from hardyscope.services import (
    decomposition_service,
    fit_service,
    grid_service,
    riesz_service,
    semigroup_service,
    worker_service,
)

logger = logging.getLogger(__name__)

KINDS = ("indicator", "cancellative")
PROFILES = ("haar", "odd_bump", "random")
SUPPORT_MIN_CELLS = 4
NODE_SLACK = 1e-9
RANDOM_MODES = 8


def default_t_grid(
    grid, k_min=Config.T_GRID_K_MIN, k_max=Config.T_GRID_K_MAX, per_octave=1
):
    """

    Dyadic times t = 2^(-k / per_octave) clipped to the reliable range.


    Args:
        grid (Grid): The grid.
        k_min (int): Largest time exponent (t = 2^-k_min is the longest time).
        k_max (int): Smallest time exponent.
        per_octave (int): Nodes per factor of two; 2 doubles the resolution.

    Returns:
        list: Increasing times.
    """
    t_min, t_max = semigroup_service.reliable_time_range(grid)
    times = [
        2.0 ** (-k / per_octave)
        for k in range(k_min * per_octave, k_max * per_octave + 1)
    ]
    clipped = sorted(t for t in times if t_min <= t <= t_max)
    if not clipped:
        raise DomainError(
            f"no dyadic time in [{t_min:.4g}, {t_max:.4g}] for k in {k_min}..{k_max}"
        )
    return clipped


def maximal_function(op, f, t_grid):
    """

    M f(x) = max(|f(x)|, max over t_grid of |T_t f(x)|).


    Args:
        op (SpectralOperator): The operator.
        f (GridFunction): The function.
        t_grid (list): Nonempty list of positive times.

    Returns:
        GridFunction: The maximal function.

    Raises:
        PreconditionError: If t_grid is empty.
    """
    if not t_grid:
        raise PreconditionError("maximal_function needs a nonempty t_grid")
    coefficients = op.vectors.T @ f.values
    decay = np.exp(-np.outer(op.eigenvalues, np.asarray(t_grid, dtype=float)))
    smoothed = op.vectors @ (decay * coefficients[:, None])
    values = np.maximum(np.abs(f.values), np.max(np.abs(smoothed), axis=1))
    return GridFunction(op.grid, values)


def h1_norm(op, f, t_grid=None):
    """||M f||_L1 over the core window."""
    t_grid = t_grid or default_t_grid(op.grid)
    return grid_service.l1_norm(maximal_function(op, f, t_grid), op.grid.core_window)


def riesz_norm(op, f):
    """||f||_1 + ||R f||_1, both over the core window."""
    window = op.grid.core_window
    return grid_service.l1_norm(f, window) + grid_service.l1_norm(
        riesz_service.riesz_apply(op, f), window
    )


def equivalence_ratio(op, f, t_grid=None):
    """

    h1_norm(f) / riesz_norm(f).


    Raises:
        DegenerateInputError: If f vanishes.
    """
    if grid_service.l1_norm(f) == 0:
        raise DegenerateInputError("equivalence_ratio needs f != 0")
    return h1_norm(op, f, t_grid) / riesz_norm(op, f)


def _snap(grid, window):
    """Largest node-aligned window inside `window`, clipped to the domain."""
    h = grid.spacing
    left = max(window[0], -grid.half_width)
    right = min(window[1], grid.half_width)
    first = math.ceil((left + grid.half_width) / h - NODE_SLACK)
    last = math.floor((right + grid.half_width) / h + NODE_SLACK)
    return (first * h - grid.half_width, last * h - grid.half_width)


def _random_support(rng, star, grid):
    """Seeded sub-interval of Q* at least 4 cells wide."""
    floor = SUPPORT_MIN_CELLS * grid.spacing
    length = star[1] - star[0]
    width = max(floor, rng.uniform(0.25, 1.0) * length)
    left = rng.uniform(star[0], max(star[0], star[1] - width))
    return (left, min(left + width, star[1]))


def _profile_values(profile, s, rng):
    """Raw profile on normalized coordinates s in [0, 1]."""
    if profile == "haar":
        return np.where(s < 0.5, 1.0, -1.0)
    if profile == "odd_bump":
        inside = (s > 0) & (s < 1)
        safe = np.where(inside, s, 0.5)
        envelope = np.where(inside, np.exp(-1.0 / (4.0 * safe * (1.0 - safe))), 0.0)
        return (2.0 * s - 1.0) * envelope
    if profile == "random":
        modes = np.arange(1, RANDOM_MODES + 1)
        coefficients = rng.standard_normal(RANDOM_MODES) / modes
        return np.sin(np.pi * np.outer(s, modes)) @ coefficients
    raise DomainError(f"unknown atom profile '{profile}', expected one of {PROFILES}")


def make_atom(family, cube, kind, seed, grid, profile=None, support="full"):
    """

    Sample an H^1 atom on a family cube.


    Indicator atoms are |Q|^-1 1_Q (dual-cell indicator). Cancellative atoms
    live on a node-aligned Q' inside Q*, have zero trapezoid integral and
    height exactly |Q'|^-1.

    Args:
        family (CubeFamily): Family containing the cube.
        cube (DyadicInterval): Q.
        kind (str): "indicator" or "cancellative".
        seed (int): Seed of the profile and support draws.
        grid (Grid): Grid to sample on.
        profile (str, optional): "haar", "odd_bump" or "random". Drawn from the
            seed when omitted.
        support (str or tuple): "full" (Q' = Q*), "random" or an explicit (a, b).

    Returns:
        Atom: The atom.

    Raises:
        DomainError: If the cube is not in the family or kind/profile is unknown.
        PreconditionError: If an explicit support leaves Q*.
        ResolutionError: If Q' is narrower than 4h.
    """
    family.index_of(cube)
    if kind not in KINDS:
        raise DomainError(f"unknown atom kind '{kind}', expected one of {KINDS}")
    profile_rng, support_rng, value_rng = (
        np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(3)
    )
    h = grid.spacing

    if kind == "indicator":
        if cube.diameter < SUPPORT_MIN_CELLS * h * (1 - NODE_SLACK):
            raise ResolutionError(
                f"{cube} is narrower than {SUPPORT_MIN_CELLS}h = {4 * h:g}"
            )
        values = grid_service.indicator(grid, cube.bounds).values / cube.diameter
        return Atom(
            cube, kind, "indicator", cube.bounds, int(seed), GridFunction(grid, values)
        )

    profile = profile or PROFILES[int(profile_rng.integers(len(PROFILES)))]
    star = decomposition_service.dilate(cube, 1, family.beta)
    if support == "full":
        window = star
    elif support == "random":
        window = _random_support(support_rng, star, grid)
    else:
        window = (float(support[0]), float(support[1]))
        if window[0] < star[0] - NODE_SLACK or window[1] > star[1] + NODE_SLACK:
            raise PreconditionError(f"support {window} is not inside Q* = {star}")
    window = _snap(grid, window)
    width = window[1] - window[0]
    if width < SUPPORT_MIN_CELLS * h * (1 - NODE_SLACK):
        raise ResolutionError(
            f"support {window} of {cube} is narrower than "
            f"{SUPPORT_MIN_CELLS}h = {4 * h:g}"
        )

    mask = grid_service.window_mask(grid, window)
    s = (grid.points[mask] - window[0]) / width
    raw = _profile_values(profile, s, value_rng)
    weights = grid_service.quadrature_weights(grid)[mask]
    raw = raw - (weights @ raw) / weights.sum()
    peak = np.max(np.abs(raw))
    if peak == 0:
        raise DegenerateInputError(f"{profile} profile vanishes on {window}")
    values = np.zeros(grid.n_points)
    values[mask] = raw / (peak * width)
    return Atom(cube, kind, profile, window, int(seed), GridFunction(grid, values))


def validate_atom(atom, tolerance=1e-12):
    """

    Check the defining constraints of an atom at grid precision.


    Returns:
        dict: "support" and "height" for every atom, plus "normalization" for
        indicator atoms and "cancellation" for cancellative ones.
    """
    grid = atom.function.grid
    values = atom.values
    width = atom.support[1] - atom.support[0]
    outside = ~grid_service.window_mask(grid, atom.support)
    height = 1.0 / width
    checks = {
        "support": bool(np.all(values[outside] == 0)),
        "height": bool(np.max(np.abs(values)) <= height * (1 + tolerance)),
    }
    if atom.kind == "indicator":
        mass = grid_service.l1_norm(atom.function)
        checks["normalization"] = abs(mass - 1.0) <= 1e-9
    else:
        integral = grid_service.integrate(atom.function)
        checks["cancellation"] = abs(integral) <= tolerance * max(1.0, height)
    return checks


def atom_library(family, grid, n_atoms, seed=0):
    """

    Seeded atoms on random family cubes, alternating kinds and supports.


    Cubes the grid cannot resolve are skipped.
    """
    if n_atoms < 1:
        raise PreconditionError(f"n_atoms must be >= 1, got {n_atoms}")
    rng = np.random.default_rng(seed)
    atoms = []
    attempts = 0
    while len(atoms) < n_atoms and attempts < 10 * n_atoms:
        attempts += 1
        cube = family.intervals[int(rng.integers(len(family)))]
        kind = KINDS[int(rng.integers(len(KINDS)))]
        support = "random" if rng.random() < 0.5 else "full"
        atom_seed = int(rng.integers(2**31 - 1))
        try:
            atoms.append(
                make_atom(family, cube, kind, atom_seed, grid, support=support)
            )
        except ResolutionError as error:
            logger.warning("Skipping atom on %s: %s", cube, error)
    if len(atoms) < n_atoms:
        logger.warning(
            "Atom library holds %d of %d requested atoms", len(atoms), n_atoms
        )
    return atoms


def atoms_to_dict(atoms):
    """JSON form of an atom library (seeds and cube ids only)."""
    return {"atoms": [atom.to_dict() for atom in atoms]}


def atoms_from_dict(payload, family, grid):
    """Regenerate atoms from atoms_to_dict() output."""
    atoms = []
    for item in payload["atoms"]:
        cube = DyadicInterval(int(item["cube"]["j"]), int(item["cube"]["k"]))
        support = "full" if item["kind"] == "indicator" else tuple(item["support"])
        profile = None if item["kind"] == "indicator" else item["profile"]
        atoms.append(
            make_atom(
                family, cube, item["kind"], int(item["seed"]), grid, profile, support
            )
        )
    return atoms


def save_atoms(atoms, path):
    """Write an atom library as JSON."""
    try:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(atoms_to_dict(atoms), handle, sort_keys=True, indent=2)
    except OSError as error:
        raise ReportIOError(f"cannot write atom library {path}: {error}") from error
    return path


def load_atoms(path, family, grid):
    """Read an atom library written by save_atoms()."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as error:
        raise ReportIOError(f"cannot read atom library {path}: {error}") from error
    return atoms_from_dict(payload, family, grid)


def _atom_norms(op, atoms, t_grid, workers=None):
    def norms(atom):
        riesz = grid_service.l1_norm(
            riesz_service.riesz_apply(op, atom.function), op.grid.core_window
        )
        return riesz, h1_norm(op, atom.function, t_grid)

    return worker_service.map_ordered(norms, atoms, workers)


def atom_bound_suite(
    op, family, n_atoms, seed=0, refine=True, t_grid=None, thresholds=None, workers=None
):
    """

    ||R a||_1 and ||a||_H1 over a seeded atom library.


    Args:
        op (SpectralOperator): The operator.
        family (CubeFamily): Family the atoms are bound to.
        n_atoms (int): Library size, >= 1.
        seed (int): Library seed.
        refine (bool): Re-evaluate the same library at h / 2.
        t_grid (list, optional): Maximal-function times.
        thresholds (Thresholds, optional): Verdict thresholds.
        workers (int, optional): Worker threads.

    Returns:
        Report: Table "atoms", spreads of both norms, verdict "atom_spread".
    """
    spread_max = thresholds.atom_spread_max if thresholds else Config.ATOM_SPREAD_MAX
    refinement_max = thresholds.refinement_max if thresholds else Config.REFINEMENT_MAX
    atoms = atom_library(family, op.grid, n_atoms, seed)
    if not atoms:
        raise DegenerateInputError("no atom could be resolved on this grid")
    t_grid = t_grid or default_t_grid(op.grid)
    values = _atom_norms(op, atoms, t_grid, workers)

    report = Report(name="atom_bounds")
    report.add_table(
        "atoms",
        [
            {
                "j": atom.cube.level,
                "k": atom.cube.index,
                "kind": atom.kind,
                "profile": atom.profile,
                "seed": atom.seed,
                "riesz_l1": riesz,
                "h1": h1,
            }
            for atom, (riesz, h1) in zip(atoms, values)
        ],
    )
    riesz_spread = fit_service.spread([riesz for riesz, _ in values])
    h1_spread = fit_service.spread([h1 for _, h1 in values])
    report.constants.update(
        {
            "n_atoms": len(atoms),
            "riesz_max": riesz_spread["max"],
            "riesz_median": riesz_spread["median"],
            "riesz_max_over_median": riesz_spread["max_over_median"],
            "h1_max": h1_spread["max"],
            "h1_median": h1_spread["median"],
            "h1_max_over_median": h1_spread["max_over_median"],
        }
    )
    report.verdicts["atom_spread"] = riesz_spread["max_over_median"] <= spread_max
    if len(atoms) < n_atoms:
        report.notices.append(f"{n_atoms - len(atoms)} atoms skipped as unresolvable")

    if refine:
        fine_op = semigroup_service.refined_operator(op)
        fine_atoms = atoms_from_dict(atoms_to_dict(atoms), family, fine_op.grid)
        fine_values = _atom_norms(
            fine_op, fine_atoms, default_t_grid(fine_op.grid), workers
        )
        report.refinement["riesz_max"] = fit_service.relative_delta(
            riesz_spread["max"], max(riesz for riesz, _ in fine_values)
        )
        report.refinement["h1_max"] = fit_service.relative_delta(
            h1_spread["max"], max(h1 for _, h1 in fine_values)
        )
        report.verdicts["refinement_stable"] = (
            max(report.refinement.values()) < refinement_max
        )
    logger.info(
        "Atom suite: %d atoms, max ||Ra||_1 = %.4g, max/median = %.3g",
        len(atoms),
        riesz_spread["max"],
        riesz_spread["max_over_median"],
    )
    return report


def library_scales(grid):
    """Geometric scales spanning [4h, L/4]."""
    return SUPPORT_MIN_CELLS * grid.spacing, grid.half_width / 4.0


def _gaussian(grid, center, scale):
    return np.exp(-0.5 * ((grid.points - center) / (scale / 4.0)) ** 2)


def _smooth_bump(grid, center, scale):
    r = (grid.points - center) / scale
    inside = np.abs(r) < 1
    safe = np.where(inside, r, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe**2)), 0.0)


def test_function_library(grid, family, seed=0, n_functions=40):
    """

    The equivalence study library.


    Four kinds share the budget: atoms of both kinds on family cubes, Gaussians
    with width `scale` at random core centers, differences of shifted Gaussians
    and sums of seeded smooth bumps. Scales are geometric in [4h, L/4]. The
    draws do not depend on the grid spacing, so the same seed gives the same
    library on a refined grid.

    Returns:
        list: LibraryFunction entries in a fixed order.
    """
    rng = np.random.default_rng(seed)
    low, high = library_scales(grid)
    core_edge = grid.core_window[1]
    quota = [n_functions // 4 + (1 if i < n_functions % 4 else 0) for i in range(4)]
    entries = []

    cubes = family.intervals
    for index in range(quota[0]):
        cube = cubes[int(rng.integers(len(cubes)))]
        kind = KINDS[index % 2]
        atom_seed = int(rng.integers(2**31 - 1))
        try:
            atom = make_atom(family, cube, kind, atom_seed, grid)
        except ResolutionError as error:
            logger.warning("Skipping library atom on %s: %s", cube, error)
            continue
        entries.append(
            LibraryFunction(
                f"atom-{index}", f"atom_{kind}", cube.diameter, atom.function
            )
        )

    def draw(count):
        scales = np.geomspace(low, high, max(count, 1))[:count]
        return [
            (scale, rng.uniform(-(core_edge - scale), core_edge - scale))
            for scale in scales
        ]

    for index, (scale, center) in enumerate(draw(quota[1])):
        entries.append(
            LibraryFunction(
                f"gaussian-{index}",
                "gaussian",
                scale,
                GridFunction(grid, _gaussian(grid, center, scale)),
            )
        )
    for index, (scale, center) in enumerate(draw(quota[2])):
        shift = scale / 4.0
        values = _gaussian(grid, center - shift / 2, scale) - _gaussian(
            grid, center + shift / 2, scale
        )
        entries.append(
            LibraryFunction(
                f"difference-{index}",
                "gaussian_difference",
                scale,
                GridFunction(grid, values),
            )
        )
    for index, (scale, center) in enumerate(draw(quota[3])):
        values = np.zeros(grid.n_points)
        for _ in range(3):
            offset = rng.uniform(-0.5, 0.5) * scale
            values += rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.0) * _smooth_bump(
                grid, center + offset, scale / 2.0
            )
        entries.append(
            LibraryFunction(
                f"bump-{index}", "smooth_bump", scale, GridFunction(grid, values)
            )
        )
    logger.debug("Test-function library with %d entries", len(entries))
    return entries


def scale_decades(entries):
    """log10 of the ratio between the largest and smallest library scale."""
    scales = [entry.scale for entry in entries]
    return math.log10(max(scales) / min(scales)) if scales else 0.0
