"""

This module builds the nonnegative potentials V shipped with hardyscope.


Each family is a seeded recipe {family, params, seed}. A recipe is first
realized (random draws fixed by the seed, cached) and can then be evaluated at
arbitrary points, which is needed for integrals over 16Q beyond the grid, for
rescaled companion grids and for grid refinement.

Families:
- constant: V = c
- step: V = low left of `position`, high right of it
- spikes: seeded smooth bumps with random heights and widths on a `floor` (0 by default)
- inverse_power: min(|x|^-a, cap) with a < 1
- harmonic: scale * x^2
- piecewise_constant: seeded constant pieces on [-span, span], `outside` beyond
- free: V = 0, oracle only
"""

import copy
import json
import logging

import numpy as np

from hardyscope.errors import PotentialError
from hardyscope.models import GridSpec, Potential, PotentialSpec

logger = logging.getLogger(__name__)

# Global cache of realized recipes, keyed by (family, params, seed)
_realization_cache = {}


def _constant(params, _rng):
    level = float(params.get("c", 1.0))
    if level < 0:
        raise PotentialError(f"constant potential needs c >= 0, got {level}")
    return lambda x: np.full_like(x, level)


def _free(_params, _rng):
    return np.zeros_like


def _step(params, _rng):
    low = float(params.get("low", 0.0))
    high = float(params.get("high", 1.0))
    position = float(params.get("position", 0.0))
    if min(low, high) < 0:
        raise PotentialError("step potential levels must be nonnegative")
    return lambda x: np.where(x >= position, high, low)


def _smooth_bump(x, center, width):
    """C-infinity bump, peak 1 at `center`, support (center - width, center + width)."""
    squared = np.square((x - center) / width)
    inside = squared < 1
    gap = np.where(inside, 1.0 - squared, 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / gap), 0.0)


def _spikes(params, rng):
    count = int(params.get("count", 6))
    span = float(params.get("span", 6.0))
    floor = float(params.get("floor", 0.0))
    height_low, height_high = params.get("heights", [1.0, 20.0])
    width_low, width_high = params.get("widths", [0.05, 0.3])
    if count < 1 or span <= 0 or floor < 0 or height_low < 0:
        raise PotentialError(f"invalid spike parameters {params}")
    centers = rng.uniform(-span, span, size=count)
    heights = rng.uniform(height_low, height_high, size=count)
    widths = rng.uniform(width_low, width_high, size=count)

    def values(x):
        total = np.full_like(x, floor)
        for center, height, width in zip(centers, heights, widths):
            total += height * _smooth_bump(x, center, width)
        return total

    return values


def _inverse_power(params, _rng):
    exponent = float(params.get("a", 0.5))
    cap = float(params.get("cap", 100.0))
    if not 0 < exponent < 1:
        raise PotentialError(
            f"inverse_power needs 0 < a < 1 (local integrability), got {exponent}"
        )
    if cap <= 0:
        raise PotentialError(f"inverse_power needs cap > 0, got {cap}")

    def values(x):
        with np.errstate(divide="ignore"):
            return np.minimum(np.abs(x) ** -exponent, cap)

    return values


def _harmonic(params, _rng):
    scale = float(params.get("scale", 1.0))
    if scale <= 0:
        raise PotentialError(f"harmonic potential needs scale > 0, got {scale}")
    return lambda x: scale * np.square(x)


def _piecewise_constant(params, rng):
    span = float(params.get("span", 8.0))
    pieces = int(params.get("pieces", 16))
    low = float(params.get("low", 0.25))
    high = float(params.get("high", 4.0))
    outside = float(params.get("outside", 0.0))
    if pieces < 1 or span <= 0 or low < 0 or high < low or outside < 0:
        raise PotentialError(f"invalid piecewise_constant parameters {params}")
    levels = rng.uniform(low, high, size=pieces)
    edges = np.linspace(-span, span, pieces + 1)

    def values(x):
        index = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, pieces - 1)
        inside = (x >= -span) & (x < span)
        return np.where(inside, levels[index], outside)

    return values


FAMILIES = {
    "constant": _constant,
    "free": _free,
    "step": _step,
    "spikes": _spikes,
    "inverse_power": _inverse_power,
    "harmonic": _harmonic,
    "piecewise_constant": _piecewise_constant,
}


def as_spec(spec):
    """Normalize a dict or PotentialSpec into a PotentialSpec."""
    if isinstance(spec, PotentialSpec):
        return spec
    if not isinstance(spec, dict) or "family" not in spec:
        raise PotentialError(f"potential spec must name a family, got {spec!r}")
    try:
        return PotentialSpec(
            family=str(spec["family"]),
            params=dict(spec.get("params") or {}),
            seed=int(spec.get("seed", 0)),
        )
    except (TypeError, ValueError) as error:
        raise PotentialError(f"invalid potential spec {spec!r}: {error}") from error


def _realize(spec):
    params = {key: value for key, value in spec.params.items() if key != "time_scale"}
    key = (spec.family, json.dumps(params, sort_keys=True), spec.seed)
    if key in _realization_cache:
        return _realization_cache[key]
    if spec.family not in FAMILIES:
        raise PotentialError(
            f"unknown potential family '{spec.family}', "
            f"expected one of {sorted(FAMILIES)}"
        )
    realized = FAMILIES[spec.family](params, np.random.default_rng(spec.seed))
    _realization_cache[key] = realized
    logger.debug("Realized potential %s seed=%d", spec.family, spec.seed)
    return realized


def clear_cache():
    """Forget all realized recipes."""
    _realization_cache.clear()


def potential_values(spec, x):
    """

    Evaluate a potential recipe at arbitrary points.


    A `time_scale` parameter s evaluates the rescaled potential s * V(sqrt(s) x).

    Args:
        spec (PotentialSpec or dict): The recipe.
        x (np.ndarray): Points.

    Returns:
        np.ndarray: V(x).

    Raises:
        PotentialError: If the recipe is invalid or produces negative values.
    """
    spec = as_spec(spec)
    x = np.asarray(x, dtype=float)
    scale = float(spec.params.get("time_scale", 1.0))
    values = scale * _realize(spec)(np.sqrt(scale) * x)
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise PotentialError(f"potential {spec.family} is not finite and nonnegative")
    return values


def rescale_spec(spec, t):
    """The recipe of x -> t V(sqrt(t) x)."""
    spec = as_spec(spec)
    params = copy.deepcopy(spec.params)
    params["time_scale"] = float(params.get("time_scale", 1.0)) * t
    return PotentialSpec(spec.family, params, spec.seed)


def make_potential(spec, grid, name=None):
    """

    Sample a potential recipe on a grid.


    Args:
        spec (PotentialSpec or dict): The recipe.
        grid (Grid): The grid.
        name (str, optional): Tag for reports. Defaults to the family name.

    Returns:
        Potential: The sampled potential.

    Raises:
        PotentialError: If V vanishes identically without the "free" tag.
    """
    spec = as_spec(spec)
    values = potential_values(spec, grid.points)
    if spec.family != "free" and not np.any(values > 0):
        raise PotentialError(
            f"potential {spec.family} vanishes on the grid; "
            "V = 0 is allowed only as 'free'"
        )
    logger.info(
        "Sampled potential %s (seed %d) on %d points, max %.4g",
        spec.family,
        spec.seed,
        grid.n_points,
        float(values.max()),
    )
    return Potential(
        family=spec.family,
        params=dict(spec.params),
        seed=spec.seed,
        grid=grid,
        values=values,
        name=name or spec.family,
    )


def free_potential(grid):
    """The V = 0 oracle potential on a grid."""
    return make_potential(PotentialSpec("free"), grid)


def load_potential_spec(path):
    """

    Load a potential recipe from a JSON file.


    The file holds {family, params, seed} and optionally a grid section
    {half_width, n_points, core_fraction}.

    Args:
        path (str): Path of the JSON file.

    Returns:
        tuple: (PotentialSpec, GridSpec or None)

    Raises:
        PotentialError: If the file cannot be read or parsed.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as error:
        raise PotentialError(f"cannot read potential spec {path}: {error}") from error

    grid_spec = None
    if "grid" in payload:
        try:
            grid_spec = GridSpec(**payload["grid"])
        except TypeError as error:
            raise PotentialError(f"invalid grid section in {path}: {error}") from error
    spec = as_spec(payload)
    _realize(spec)
    return spec, grid_spec
