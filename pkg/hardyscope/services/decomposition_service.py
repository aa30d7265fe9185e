"""

This module builds stopping-time families of dyadic intervals, their dilates,
neighbor structure and smooth partitions of unity.


Stopping rules (d = |Q| in one dimension):
- CZ: |Q| * int_{16Q} V <= 1
- RH: |Q| * int_Q V <= 1

Both rule values grow when Q grows, so a top-down descent from the coarsest
admissible level yields exactly the maximal dyadic intervals satisfying the
rule. Levels are clamped to d(Q) in [4h, L/2].
"""

import json
import logging
import math

import numpy as np
from scipy import integrate as sp_integrate

from hardyscope.config import Config
from hardyscope.errors import (
    DomainError,
    FamilyInvalidError,
    RefinementNeededError,
    ReportIOError,
)
from hardyscope.models import CubeFamily, DyadicInterval, GridFunction, Report
from hardyscope.services import grid_service, potential_service

logger = logging.getLogger(__name__)

RULES = ("CZ", "RH")
CZ_DILATION = 16.0
RULE_TOLERANCE = 1e-9


def dilate(cube, stars, beta):
    """

    The dilate Q^(*...*) with the same center and diameter (1 + beta)^stars d(Q).


    Args:
        cube (DyadicInterval): Q.
        stars (int): Number of stars, 0..4.
        beta (float): Dilation parameter, must be positive.

    Returns:
        tuple: (left, right)
    """
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if not 0 <= stars <= 4:
        raise DomainError(f"stars must be in 0..4, got {stars}")
    half = 0.5 * (1.0 + beta) ** stars * cube.diameter
    return (cube.center - half, cube.center + half)


def level_clamps(grid):
    """

    Levels allowed for family cubes: d(Q) = 2^-j in [4h, L/2].


    Returns:
        tuple: (j_min, j_max)
    """
    j_min = -math.floor(math.log2(grid.half_width / 2.0) + 1e-12)
    j_max = math.floor(math.log2(1.0 / (4.0 * grid.spacing)) + 1e-12)
    if j_min > j_max:
        raise DomainError(
            f"grid is too coarse for dyadic families (h = {grid.spacing})"
        )
    return j_min, j_max


class PotentialIntegrator:
    """

    Antiderivative of V on an extended range, for fast int_a^b V.


    The potential recipe is evaluated at points of spacing `spacing` and
    integrated by the cumulative trapezoid rule; integrals between arbitrary
    points interpolate the antiderivative linearly.
    """

    def __init__(self, spec, left, right, spacing):
        self.spec = potential_service.as_spec(spec)
        count = int(math.ceil((right - left) / spacing)) + 1
        self.points = np.linspace(left, right, count)
        values = potential_service.potential_values(self.spec, self.points)
        self.antiderivative = sp_integrate.cumulative_trapezoid(
            values, self.points, initial=0.0
        )

    @classmethod
    def for_domain(cls, potential, domain, j_min):
        """Integrator covering 16Q for each dyadic Q in `domain`, level >= j_min - 1."""
        margin = CZ_DILATION * math.ldexp(1.0, -j_min) + 1.0
        spacing = potential.grid.spacing / 4.0
        return cls(potential.spec(), domain[0] - margin, domain[1] + margin, spacing)

    def integral(self, left, right):
        """int_left^right V."""
        if left < self.points[0] - 1e-9 or right > self.points[-1] + 1e-9:
            raise DomainError(
                f"[{left}, {right}] leaves the integration range "
                f"[{self.points[0]}, {self.points[-1]}]"
            )
        values = np.interp([left, right], self.points, self.antiderivative)
        return float(values[1] - values[0])


def rule_value(integrator, cube, rule):
    """

    Left side of the stopping inequality for Q.


    Args:
        integrator (PotentialIntegrator): Antiderivative of V.
        cube (DyadicInterval): Q.
        rule (str): "CZ" or "RH".

    Returns:
        float: |Q| int_{16Q} V (CZ) or |Q| int_Q V (RH).
    """
    if rule == "CZ":
        half = 0.5 * CZ_DILATION * cube.diameter
        return cube.diameter * integrator.integral(
            cube.center - half, cube.center + half
        )
    if rule == "RH":
        return cube.diameter * integrator.integral(cube.left, cube.right)
    raise DomainError(f"unknown stopping rule '{rule}', expected one of {RULES}")


def satisfies(integrator, cube, rule):
    """True when Q satisfies the stopping inequality (up to quadrature roundoff)."""
    return rule_value(integrator, cube, rule) <= 1.0 + RULE_TOLERANCE


def _check_domain(domain, j_max):
    left, right = domain
    unit = math.ldexp(1.0, -j_max)
    for endpoint in domain:
        if abs(endpoint / unit - round(endpoint / unit)) > 1e-9:
            raise DomainError(
                f"domain endpoint {endpoint} is not a multiple of 2^-{j_max}"
            )
    if right <= left:
        raise DomainError(f"domain ({left}, {right}) is empty")


def _inside(cube, domain):
    return cube.left >= domain[0] - 1e-12 and cube.right <= domain[1] + 1e-12


def _top_cubes(domain, j_min):
    diameter = math.ldexp(1.0, -j_min)
    first = math.floor(domain[0] / diameter)
    last = math.ceil(domain[1] / diameter)
    return [DyadicInterval(j_min, index) for index in range(first, last)]


def stopping_time_decomposition(
    potential,
    rule=Config.FAMILY_RULE,
    domain=None,
    beta=Config.BETA,
    j_min=None,
    j_max=None,
):
    """

    Maximal dyadic intervals inside `domain` satisfying the stopping rule.


    Args:
        potential (Potential): Sampled potential; its recipe is integrated beyond
            the grid.
        rule (str): "CZ" or "RH".
        domain (tuple, optional): Region to cover. Defaults to the core window.
        beta (float): Dilation parameter of the family.
        j_min (int, optional): Coarsest level. Defaults to d(Q) <= L/2.
        j_max (int, optional): Finest level. Defaults to d(Q) >= 4h.

    Returns:
        CubeFamily: The family, with clamp hits and neighbor sets recorded.

    Raises:
        RefinementNeededError: If some finest-level interval still violates the rule.
    """
    if rule not in RULES:
        raise DomainError(f"unknown stopping rule '{rule}', expected one of {RULES}")
    grid = potential.grid
    default_min, default_max = level_clamps(grid)
    j_min = default_min if j_min is None else j_min
    j_max = default_max if j_max is None else j_max
    domain = tuple(domain or grid.core_window)
    _check_domain(domain, j_max)
    integrator = PotentialIntegrator.for_domain(potential, domain, j_min)

    accepted, clamp_hits = [], []
    pending = _top_cubes(domain, j_min)
    while pending:
        cube = pending.pop()
        if cube.right <= domain[0] + 1e-12 or cube.left >= domain[1] - 1e-12:
            continue
        if not _inside(cube, domain):
            pending.extend(cube.children())
            continue
        if satisfies(integrator, cube, rule):
            accepted.append(cube)
            if cube.level == j_min and satisfies(integrator, cube.parent(), rule):
                clamp_hits.append(cube)
            continue
        if cube.level >= j_max:
            raise RefinementNeededError(
                f"{rule} rule fails on {cube} at the finest level j_max={j_max} "
                f"(value {rule_value(integrator, cube, rule):.4g}); refine the grid"
            )
        pending.extend(cube.children())

    if clamp_hits:
        logger.warning(
            "%d cubes hit the coarsest level clamp j_min=%d", len(clamp_hits), j_min
        )
    family = assemble_family(
        accepted,
        beta=beta,
        domain=domain,
        rule=rule,
        j_min=j_min,
        j_max=j_max,
        grid=grid,
        clamp_hits=clamp_hits,
        provenance={"potential": potential.spec(), "grid": grid.to_dict()},
    )
    logger.info(
        "Built %s family with %d cubes on [%g, %g] (beta=%g)",
        rule,
        len(family),
        domain[0],
        domain[1],
        beta,
    )
    return family


def _dilate_bounds(intervals, stars, beta):
    centers = np.array([cube.center for cube in intervals])
    diameters = np.array([cube.diameter for cube in intervals])
    halves = 0.5 * (1.0 + beta) ** stars * diameters
    return centers - halves, centers + halves


def _intersections(intervals, stars, beta):
    """Boolean matrix of closed intersections of the `stars` dilates."""
    lefts, rights = _dilate_bounds(intervals, stars, beta)
    return (lefts[:, None] <= rights[None, :]) & (lefts[None, :] <= rights[:, None])


def assemble_family(
    intervals,
    beta,
    domain,
    rule,
    j_min,
    j_max,
    grid,
    clamp_hits=(),
    provenance=None,
):
    """

    Sort the intervals and precompute neighbor sets and family constants.


    Returns:
        CubeFamily: The assembled family.
    """
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    intervals = tuple(sorted(intervals, key=lambda cube: (cube.left, cube.level)))
    if not intervals:
        raise FamilyInvalidError("a cube family needs at least one interval")

    triple = _intersections(intervals, 3, beta)
    neighbor_sets = tuple(tuple(np.flatnonzero(row).tolist()) for row in triple)

    quadruple = _intersections(intervals, 4, beta)
    diameters = np.array([cube.diameter for cube in intervals])
    ratios = np.where(quadruple, diameters[:, None] / diameters[None, :], 0.0)
    comparability = float(ratios.max())

    lefts, rights = _dilate_bounds(intervals, 4, beta)
    points = grid.points
    counts = np.searchsorted(np.sort(lefts), points, side="right") - np.searchsorted(
        np.sort(rights), points, side="left"
    )
    overlap = int(counts.max())

    admissible = (1.0 + beta) ** 3 < 3.0
    if not admissible:
        logger.warning("beta=%g is too large: (1 + beta)^3 >= 3", beta)

    return CubeFamily(
        intervals=intervals,
        beta=float(beta),
        domain=(float(domain[0]), float(domain[1])),
        rule=rule,
        j_min=int(j_min),
        j_max=int(j_max),
        neighbor_sets=neighbor_sets,
        comparability_constant=comparability,
        overlap_count=overlap,
        clamp_hits=tuple(sorted(clamp_hits, key=lambda cube: cube.left)),
        beta_admissible=admissible,
        provenance=dict(provenance or {}),
    )


def single_cube_family(cube, grid, beta=Config.BETA):
    """The family {Q} covering Q itself (oracle for trivial cases)."""
    return assemble_family(
        [cube],
        beta=beta,
        domain=cube.bounds,
        rule="single",
        j_min=cube.level,
        j_max=cube.level,
        grid=grid,
    )


def neighbors(family, cube):
    """

    Split the family into Q'(Q) and Q''(Q).


    Q'(Q) holds the cubes whose triple dilates meet Q***; Q''(Q) is the rest.

    Returns:
        tuple: (list of DyadicInterval, list of DyadicInterval)
    """
    position = family.index_of(cube)
    near = set(family.neighbor_sets[position])
    close = [family.intervals[i] for i in sorted(near)]
    far = [q for i, q in enumerate(family.intervals) if i not in near]
    return close, far


def _smooth_step(s):
    """0 for s <= 0, 1 for s >= 1, C-infinity between with step(s) + step(1 - s) = 1."""
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < 1)
    safe = np.where(inside, s, 0.5)
    with np.errstate(over="ignore"):
        middle = 1.0 / (1.0 + np.exp(1.0 / safe - 1.0 / (1.0 - safe)))
    return np.where(s >= 1, 1.0, np.where(inside, middle, 0.0))


def bump(cube, grid, beta):
    """Smooth 1_Q: 1 on [a + r, b - r], 0 off (a - r, b + r), r = beta d/4."""
    radius = beta * cube.diameter / 4.0
    x = grid.points
    rising = _smooth_step((x - cube.left + radius) / (2.0 * radius))
    falling = _smooth_step((cube.right + radius - x) / (2.0 * radius))
    return rising * falling


def partition_of_unity(family, grid):
    """

    Smooth partition of unity {phi_Q} subordinate to {Q*}.


    Each phi_Q is a bump at scale beta d(Q) / 4 divided by the sum of all bumps.

    Args:
        family (CubeFamily): The family.
        grid (Grid): The grid.

    Returns:
        list: One GridFunction per family cube, in family order.

    Raises:
        FamilyInvalidError: If the bumps leave a gap inside the family domain.
    """
    bumps = np.array([bump(cube, grid, family.beta) for cube in family.intervals])
    total = bumps.sum(axis=0)
    inside = grid_service.window_mask(grid, family.domain)
    if np.any(total[inside] <= 0):
        gap = grid.points[inside][total[inside] <= 0][0]
        raise FamilyInvalidError(
            f"partition of unity has a coverage gap at x = {gap:g}"
        )
    safe = np.where(total > 0, total, 1.0)
    phis = np.where(total > 0, bumps / safe, 0.0)
    logger.debug("Partition of unity with %d functions", len(phis))
    return [GridFunction(grid, phi) for phi in phis]


def gradient_constant(family, phis):
    """max over Q of max |phi_Q'| d(Q)."""
    return float(
        max(
            np.max(np.abs(grid_service.derivative(phi).values)) * cube.diameter
            for cube, phi in zip(family.intervals, phis)
        )
    )


def maximality_defects(family, integrator):
    """

    Cubes that break stopping maximality.


    A cube is a defect when it violates the rule, or when its parent lies inside
    the domain, at or below the coarsest level, and satisfies the rule.

    Returns:
        list: Offending DyadicIntervals.
    """
    defects = []
    for cube in family.intervals:
        if not satisfies(integrator, cube, family.rule):
            defects.append(cube)
            continue
        parent = cube.parent()
        if (
            cube.level > family.j_min
            and _inside(parent, family.domain)
            and satisfies(integrator, parent, family.rule)
        ):
            defects.append(cube)
    return defects


def brute_force_family(potential, rule, domain, j_min, j_max):
    """

    Exhaustive dyadic-tree oracle for stopping_time_decomposition.


    Evaluates the rule on every dyadic interval inside the domain at every
    level and keeps those satisfying it with no satisfying ancestor.

    Returns:
        list: Sorted DyadicIntervals.
    """
    integrator = PotentialIntegrator.for_domain(potential, domain, j_min)
    satisfied = {}
    kept = []
    for level in range(j_min, j_max + 1):
        diameter = math.ldexp(1.0, -level)
        first = math.floor(domain[0] / diameter + 1e-9)
        last = math.ceil(domain[1] / diameter - 1e-9)
        for index in range(first, last):
            cube = DyadicInterval(level, index)
            if not _inside(cube, domain):
                continue
            good = satisfies(integrator, cube, rule)
            satisfied[cube] = good
            ancestor, covered = cube, False
            while ancestor.level > j_min:
                ancestor = ancestor.parent()
                if satisfied.get(ancestor, False):
                    covered = True
                    break
            if good and not covered:
                kept.append(cube)
            elif not good and not covered and level == j_max:
                raise RefinementNeededError(
                    f"{rule} rule fails on {cube} at j_max={j_max}"
                )
    return sorted(kept, key=lambda cube: cube.left)


def validate_family(family, grid, potential=None):
    """

    Check coverage, disjointness, bounded overlap and (optionally) maximality.


    Args:
        family (CubeFamily): The family.
        grid (Grid): Grid used for the overlap count.
        potential (Potential, optional): When given, maximality is checked too.

    Returns:
        Report: Verdicts "coverage", "disjoint", "overlap" and "maximality".
    """
    report = Report(name="family")
    intervals = family.intervals
    covered = sum(cube.diameter for cube in intervals)
    length = family.domain[1] - family.domain[0]
    gaps = [
        (first.right, second.left)
        for first, second in zip(intervals, intervals[1:])
        if abs(first.right - second.left) > 1e-12
    ]
    report.add_table(
        "cubes",
        [
            {
                "j": cube.level,
                "k": cube.index,
                "left": cube.left,
                "right": cube.right,
                "diameter": cube.diameter,
                "neighbors": len(family.neighbor_sets[i]),
            }
            for i, cube in enumerate(intervals)
        ],
    )
    report.constants.update(
        {
            "cube_count": len(intervals),
            "covered_length": covered,
            "domain_length": length,
            "comparability_constant": family.comparability_constant,
            "overlap_count": family.overlap_count,
            "overlap_bound": family.overlap_bound,
            "clamp_hits": len(family.clamp_hits),
            "beta": family.beta,
        }
    )
    report.verdicts["coverage"] = abs(covered - length) <= grid.spacing
    report.verdicts["disjoint"] = not gaps
    report.verdicts["overlap"] = family.overlap_count <= family.overlap_bound
    if not family.beta_admissible:
        report.notices.append(f"beta={family.beta} fails (1 + beta)^3 < 3")
    if family.clamp_hits:
        report.notices.append(
            f"{len(family.clamp_hits)} cubes hit the coarsest level clamp "
            f"j={family.j_min}"
        )
    report.notices.append(f"beta={family.beta} is a chosen dilation parameter")
    if potential is not None and family.rule in RULES:
        integrator = PotentialIntegrator.for_domain(
            potential, family.domain, family.j_min
        )
        defects = maximality_defects(family, integrator)
        report.constants["maximality_defects"] = len(defects)
        report.verdicts["maximality"] = not defects
    return report


def family_to_dict(family):
    """JSON form of a family."""
    return family.to_dict()


def family_from_dict(payload, grid):
    """

    Rebuild a family from its JSON form.


    Args:
        payload (dict): Output of family_to_dict().
        grid (Grid): Grid for the overlap count.

    Returns:
        CubeFamily: The family with neighbor sets recomputed.
    """
    try:
        intervals = [
            DyadicInterval(int(item["j"]), int(item["k"]))
            for item in payload["intervals"]
        ]
        clamp_hits = [
            DyadicInterval(int(item["j"]), int(item["k"]))
            for item in payload.get("clamp_hits", [])
        ]
        return assemble_family(
            intervals,
            beta=float(payload["beta"]),
            domain=tuple(payload["domain"]),
            rule=payload.get("rule", "CZ"),
            j_min=int(payload["clamps"]["j_min"]),
            j_max=int(payload["clamps"]["j_max"]),
            grid=grid,
            clamp_hits=clamp_hits,
            provenance=payload.get("provenance", {}),
        )
    except (KeyError, TypeError, ValueError) as error:
        raise FamilyInvalidError(f"malformed family payload: {error}") from error


def save_family(family, path):
    """Write a family as JSON."""
    try:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(family_to_dict(family), handle, sort_keys=True, indent=2)
    except OSError as error:
        raise ReportIOError(f"cannot write family {path}: {error}") from error
    return path


def load_family(path, grid):
    """Read a family written by save_family()."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as error:
        raise ReportIOError(f"cannot read family {path}: {error}") from error
    return family_from_dict(payload, grid)
