"""

This module loads experiment configurations from JSON and applies command-line
overrides.


The schema is documented in CONFIG_SCHEMA.md. Unknown keys are rejected so that
a typo never silently falls back to a default.
"""

import json
import logging
import os
from dataclasses import fields, replace

from hardyscope.errors import ConfigError, HardyscopeException
from hardyscope.models import (
    ExperimentConfig,
    GridSpec,
    OutputSpec,
    PotentialSpec,
    Thresholds,
)
from hardyscope.services import (
    decomposition_service,
    potential_service,
    report_service,
)

logger = logging.getLogger(__name__)

SEED_KEYS = ("atoms", "sampling", "test_functions")
T_GRID_KEYS = ("k_min", "k_max")
EPS_GRID_KEYS = ("m_max",)


def _field_names(cls):
    return {item.name for item in fields(cls)}


def _check_keys(section, payload, allowed):
    if not isinstance(payload, dict):
        raise ConfigError(
            f"section '{section}' must be an object, got {type(payload).__name__}"
        )
    unknown = sorted(set(payload) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {', '.join(unknown)}")


def _integer(section, key, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
    return value


def _positive(section, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{section}.{key} must be a positive number, got {value!r}")
    return float(value)


def _grid(payload):
    _check_keys("grid", payload, _field_names(GridSpec))
    spec = GridSpec(
        half_width=_positive(
            "grid", "half_width", payload.get("half_width", GridSpec.half_width)
        ),
        n_points=_integer(
            "grid", "n_points", payload.get("n_points", GridSpec.n_points)
        ),
        core_fraction=_positive(
            "grid",
            "core_fraction",
            payload.get("core_fraction", GridSpec.core_fraction),
        ),
    )
    try:
        spec.build()
    except HardyscopeException as error:
        raise ConfigError(f"invalid grid: {error}") from error
    return spec


def _potential(payload):
    _check_keys("potential", payload, ("family", "params", "seed"))
    _integer("potential", "seed", payload.get("seed", 0))
    if payload.get("family") not in potential_service.FAMILIES:
        raise ConfigError(
            f"potential.family must be one of {sorted(potential_service.FAMILIES)}, "
            f"got {payload.get('family')!r}"
        )
    try:
        return potential_service.as_spec(payload)
    except HardyscopeException as error:
        raise ConfigError(str(error)) from error


def _thresholds(payload):
    _check_keys("thresholds", payload, _field_names(Thresholds))
    return Thresholds(
        **{key: _positive("thresholds", key, value) for key, value in payload.items()}
    )


def _int_section(section, payload, allowed, defaults):
    _check_keys(section, payload, allowed)
    merged = dict(defaults)
    merged.update(
        {key: _integer(section, key, value) for key, value in payload.items()}
    )
    return merged


def _output(payload):
    _check_keys("output", payload, _field_names(OutputSpec))
    spec = OutputSpec(**payload)
    if spec.format not in report_service.FORMATS:
        raise ConfigError(
            f"output.format must be one of {report_service.FORMATS}, "
            f"got {spec.format!r}"
        )
    return spec


def config_from_dict(payload):
    """

    Build an ExperimentConfig from a parsed JSON object.


    Args:
        payload (dict): Config object; every section is optional.

    Returns:
        ExperimentConfig: The validated config.

    Raises:
        ConfigError: On unknown keys, wrong types, non-positive thresholds,
            non-integer seeds or unresolvable specs.
    """
    _check_keys("config", payload, _field_names(ExperimentConfig))
    defaults = ExperimentConfig()
    values = {}
    if "experiment_id" in payload:
        values["experiment_id"] = str(payload["experiment_id"])
    if "grid" in payload:
        values["grid"] = _grid(payload["grid"])
    if "potential" in payload:
        values["potential"] = _potential(payload["potential"])
    if "rule" in payload:
        if payload["rule"] not in decomposition_service.RULES:
            raise ConfigError(
                f"rule must be one of {decomposition_service.RULES}, "
                f"got {payload['rule']!r}"
            )
        values["rule"] = payload["rule"]
    if "beta" in payload:
        values["beta"] = _positive("config", "beta", payload["beta"])
    if "t_grid" in payload:
        values["t_grid"] = _int_section(
            "t_grid", payload["t_grid"], T_GRID_KEYS, defaults.t_grid
        )
        if values["t_grid"]["k_min"] > values["t_grid"]["k_max"]:
            raise ConfigError("t_grid.k_min must not exceed t_grid.k_max")
    if "eps_grid" in payload:
        values["eps_grid"] = _int_section(
            "eps_grid", payload["eps_grid"], EPS_GRID_KEYS, defaults.eps_grid
        )
    if "thresholds" in payload:
        values["thresholds"] = _thresholds(payload["thresholds"])
    if "seeds" in payload:
        values["seeds"] = _int_section(
            "seeds", payload["seeds"], SEED_KEYS, defaults.seeds
        )
    for key in ("n_atoms", "n_test_functions"):
        if key in payload:
            values[key] = _integer("config", key, payload[key])
            if values[key] < 1:
                raise ConfigError(f"{key} must be at least 1")
    if "alpha" in payload:
        alpha = payload["alpha"]
        if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or alpha < 0:
            raise ConfigError(f"alpha must be a nonnegative number, got {alpha!r}")
        values["alpha"] = float(alpha)
    if "refine" in payload:
        if not isinstance(payload["refine"], bool):
            raise ConfigError(
                f"refine must be true or false, got {payload['refine']!r}"
            )
        values["refine"] = payload["refine"]
    if "output" in payload:
        values["output"] = _output(payload["output"])
    return replace(defaults, **values)


def parse_potential(value):
    """

    Resolve a family name or the path of a potential JSON file.


    Returns:
        tuple: The PotentialSpec and the file's GridSpec (None for a family name).
    """
    if value in potential_service.FAMILIES:
        return PotentialSpec(family=value), None
    if os.path.isfile(value):
        return potential_service.load_potential_spec(value)
    raise ConfigError(
        f"potential must be a family {sorted(potential_service.FAMILIES)} "
        f"or a JSON file, got {value!r}"
    )


def apply_overrides(config, overrides):
    """

    Apply CLI overrides on top of a config.


    Recognized keys: potential, rule, beta, grid_n, out, format, seed. None values
    are ignored. `seed` replaces the potential seed and every seed of the run.
    """
    overrides = {
        key: value
        for key, value in (overrides or {}).items()
        if value is not None
    }
    values = {}
    if "potential" in overrides:
        spec, grid_spec = parse_potential(overrides["potential"])
        values["potential"] = spec
        if grid_spec is not None:
            values["grid"] = grid_spec
    if "rule" in overrides:
        if overrides["rule"] not in decomposition_service.RULES:
            raise ConfigError(f"--rule must be one of {decomposition_service.RULES}")
        values["rule"] = overrides["rule"]
    if "beta" in overrides:
        values["beta"] = _positive("overrides", "beta", overrides["beta"])
    if "grid_n" in overrides:
        grid = values.get("grid", config.grid)
        values["grid"] = _grid(
            {
                "half_width": grid.half_width,
                "n_points": overrides["grid_n"],
                "core_fraction": grid.core_fraction,
            }
        )
    if "out" in overrides or "format" in overrides:
        values["output"] = _output(
            {
                "directory": overrides.get("out", config.output.directory),
                "format": overrides.get("format", config.output.format),
            }
        )
    if "seed" in overrides:
        seed = _integer("overrides", "seed", overrides["seed"])
        potential = values.get("potential", config.potential)
        values["potential"] = PotentialSpec(
            potential.family, dict(potential.params), seed
        )
        values["seeds"] = {key: seed for key in SEED_KEYS}
    if values:
        logger.debug("Config overrides: %s", sorted(values))
    return replace(config, **values)


def load_config(path=None, overrides=None):
    """

    Load an experiment config file and apply overrides.


    Args:
        path (str, optional): JSON config file. Defaults are used when omitted.
        overrides (dict, optional): CLI overrides, see apply_overrides().

    Returns:
        ExperimentConfig: The validated config.

    Raises:
        ConfigError: If the file cannot be read or is invalid.
    """
    payload = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                payload = json.load(handle)
        except (OSError, json.JSONDecodeError) as error:
            raise ConfigError(f"cannot read config {path}: {error}") from error
    config = apply_overrides(config_from_dict(payload), overrides)
    logger.info(
        "Loaded config %s: %s potential, %s rule, n=%d",
        config.experiment_id,
        config.potential.family,
        config.rule,
        config.grid.n_points,
    )
    return config
