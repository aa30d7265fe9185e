"""

This module defines the domain types of hardyscope.


Types include:
- Grid, GridFunction (sampled functions on a uniform 1D grid)
- Potential, SpectralOperator, KernelMatrix (the discretized Schrödinger operator)
- RieszKernel (truncated Riesz kernels)
- DyadicInterval, CubeFamily (stopping-time families)
- Atom, LibraryFunction (H^1 atoms and the equivalence test library)
- Report (structured check results)
- GridSpec, PotentialSpec, Thresholds, OutputSpec, ExperimentConfig (run configuration)
"""
# pylint: disable=C0103,R0902,R0903,R0913

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from hardyscope.config import Config
from hardyscope.errors import DomainError

Interval = Tuple[float, float]


def _readonly(values) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_i = -L + i h on [-L, L] with core window [-rho L, rho L]."""

    half_width: float
    n_points: int
    core_fraction: float = Config.CORE_FRACTION

    def __post_init__(self):
        if self.half_width <= 0:
            raise DomainError(f"half_width must be positive, got {self.half_width}")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise DomainError(f"n_points must be odd and >= 3, got {self.n_points}")
        if not 0 < self.core_fraction <= 1:
            raise DomainError(
                f"core_fraction must lie in (0, 1], got {self.core_fraction}"
            )
        offset = self.core_fraction * (self.n_points - 1) / 2
        if abs(offset - round(offset)) > 1e-9:
            raise DomainError(
                f"core window {self.core_fraction}*L does not land on a grid point "
                f"(n_points={self.n_points})"
            )

    @property
    def spacing(self) -> float:
        """Grid spacing h = 2L / (n - 1)."""
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def center_index(self) -> int:
        """Index of the node x = 0."""
        return (self.n_points - 1) // 2

    @property
    def core_half_points(self) -> int:
        """Number of grid cells between 0 and the core edge."""
        return int(round(self.core_fraction * (self.n_points - 1) / 2))

    @cached_property
    def points(self) -> np.ndarray:
        """Grid nodes, symmetric with x at the center index exactly 0."""
        offsets = np.arange(self.n_points) - self.center_index
        return _readonly(offsets * self.spacing)

    @property
    def core_window(self) -> Interval:
        """The core window [-rho L, rho L] as node coordinates."""
        edge = self.core_half_points * self.spacing
        return (-edge, edge)

    @property
    def core_slice(self) -> slice:
        """Index slice of the core window (both edges included)."""
        return slice(
            self.center_index - self.core_half_points,
            self.center_index + self.core_half_points + 1,
        )

    @cached_property
    def core_mask(self) -> np.ndarray:
        """Boolean mask of the core nodes."""
        mask = np.zeros(self.n_points, dtype=bool)
        mask[self.core_slice] = True
        mask.flags.writeable = False
        return mask

    def refine(self) -> "Grid":
        """The grid with half the spacing on the same domain."""
        return Grid(self.half_width, 2 * self.n_points - 1, self.core_fraction)

    def to_dict(self) -> Dict[str, Any]:
        """Convert the Grid to a dictionary."""
        return {
            "half_width": self.half_width,
            "n_points": self.n_points,
            "core_fraction": self.core_fraction,
        }


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real function sampled at the nodes of a grid. Values are read-only."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise DomainError(
                f"expected {self.grid.n_points} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("grid function values must be finite")
        object.__setattr__(self, "values", _readonly(values))

    def _combine(self, other, operation) -> "GridFunction":
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise DomainError("grid functions live on different grids")
            other = other.values
        return GridFunction(self.grid, operation(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))


@dataclass(frozen=True, eq=False)
class Potential:
    """Nonnegative potential sampled on a grid, with the spec that generated it."""

    family: str
    params: Dict[str, Any]
    seed: int
    grid: Grid
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        if not self.name:
            object.__setattr__(self, "name", self.family)

    @property
    def is_free(self) -> bool:
        """True for the V = 0 oracle potential."""
        return self.family == "free"

    def spec(self) -> Dict[str, Any]:
        """The JSON spec {family, params, seed} that regenerates this potential."""
        return {"family": self.family, "params": dict(self.params), "seed": self.seed}

    def to_dict(self) -> Dict[str, Any]:
        """Convert the Potential to a dictionary."""
        return {"name": self.name, "grid": self.grid.to_dict(), **self.spec()}


class SpectralOperator:
    """

    Eigendecomposition of the discretized operator -d^2/dx^2 + V with Dirichlet
    boundary at +-L.

    `vectors` has one column per eigenpair, one row per grid node; boundary rows
    are zero and columns are orthonormal in plain l^2, so that the kernel density
    of f(L) is vectors @ diag(f(lambda)) @ vectors.T / h.
    """

    def __init__(self, grid: Grid, potential: Potential, eigenvalues, vectors):
        self.grid = grid
        self.potential = potential
        self.eigenvalues = _readonly(eigenvalues)
        self.vectors = _readonly(vectors)

    @cached_property
    def gradients(self) -> np.ndarray:
        """Central-difference x-derivatives of the eigenvector columns."""
        gradients = np.gradient(self.vectors, self.grid.spacing, axis=0)
        gradients.flags.writeable = False
        return gradients

    @property
    def ground_energy(self) -> float:
        """Smallest eigenvalue lambda_0."""
        return float(self.eigenvalues[0])

    def to_dict(self) -> Dict[str, Any]:
        """Summary of the operator (no eigenvectors)."""
        return {
            "grid": self.grid.to_dict(),
            "potential": self.potential.to_dict(),
            "n_modes": int(self.eigenvalues.size),
            "lambda_0": self.ground_energy,
            "lambda_max": float(self.eigenvalues[-1]),
        }

    def __repr__(self):
        return (
            f"<SpectralOperator {self.potential.name} n={self.grid.n_points} "
            f"lambda_0={self.ground_energy:.6g}>"
        )


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Integral kernel K(x_i, y_j) stored as a continuum density (row = x index)."""

    grid: Grid
    times: Tuple[float, ...]
    entries: np.ndarray

    def core(self) -> np.ndarray:
        """The kernel restricted to core x core."""
        window = self.grid.core_slice
        return self.entries[window, window]


@dataclass(frozen=True, eq=False)
class RieszKernel:
    """Truncated Riesz kernel R(x, y) with time window [epsilon, M]."""

    grid: Grid
    epsilon: float
    upper: float
    entries: np.ndarray

    def core(self) -> np.ndarray:
        """The kernel restricted to core x core."""
        window = self.grid.core_slice
        return self.entries[window, window]


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """The dyadic interval [k 2^-j, (k+1) 2^-j]."""

    level: int
    index: int

    @property
    def diameter(self) -> float:
        """d(Q) = 2^-j."""
        return math.ldexp(1.0, -self.level)

    @property
    def left(self) -> float:
        """Left endpoint."""
        return self.index * self.diameter

    @property
    def right(self) -> float:
        """Right endpoint."""
        return (self.index + 1) * self.diameter

    @property
    def center(self) -> float:
        """Midpoint."""
        return (self.index + 0.5) * self.diameter

    @property
    def bounds(self) -> Interval:
        """(left, right)."""
        return (self.left, self.right)

    def parent(self) -> "DyadicInterval":
        """The dyadic interval one level up containing this one."""
        return DyadicInterval(self.level - 1, self.index // 2)

    def children(self) -> Tuple["DyadicInterval", "DyadicInterval"]:
        """The two halves one level down."""
        return (
            DyadicInterval(self.level + 1, 2 * self.index),
            DyadicInterval(self.level + 1, 2 * self.index + 1),
        )

    def contains(self, other: "DyadicInterval") -> bool:
        """True when `other` is nested in this interval."""
        if other.level < self.level:
            return False
        return other.index >> (other.level - self.level) == self.index

    def to_dict(self) -> Dict[str, int]:
        """Convert the interval to {j, k}."""
        return {"j": self.level, "k": self.index}

    def __str__(self):
        return f"[{self.left:g}, {self.right:g}]"


@dataclass(frozen=True, eq=False)
class CubeFamily:
    """

    Stopping-time family of dyadic intervals with disjoint interiors covering a
    domain, together with its precomputed neighbor structure.

    `neighbor_sets[i]` holds the indices of Q'(Q_i): cubes whose triple dilates
    meet the triple dilate of Q_i. Q''(Q_i) is the complement.
    """

    intervals: Tuple[DyadicInterval, ...]
    beta: float
    domain: Interval
    rule: str
    j_min: int
    j_max: int
    neighbor_sets: Tuple[Tuple[int, ...], ...]
    comparability_constant: float
    overlap_count: int
    clamp_hits: Tuple[DyadicInterval, ...] = ()
    beta_admissible: bool = True
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __len__(self):
        return len(self.intervals)

    def index_of(self, cube: DyadicInterval) -> int:
        """Position of `cube` in the family."""
        try:
            return self.intervals.index(cube)
        except ValueError as error:
            raise DomainError(f"cube {cube} is not in the family") from error

    @property
    def overlap_bound(self) -> int:
        """The overlap bound 2 + ceil(4 (1 + beta)^4) for 1D dyadic families."""
        return 2 + math.ceil(4 * (1 + self.beta) ** 4)

    def to_dict(self) -> Dict[str, Any]:
        """JSON form {beta, intervals, clamps, provenance}."""
        return {
            "beta": self.beta,
            "rule": self.rule,
            "domain": list(self.domain),
            "intervals": [cube.to_dict() for cube in self.intervals],
            "clamps": {"j_min": self.j_min, "j_max": self.j_max},
            "clamp_hits": [cube.to_dict() for cube in self.clamp_hits],
            "comparability_constant": self.comparability_constant,
            "overlap_count": self.overlap_count,
            "provenance": dict(self.provenance),
        }


@dataclass(frozen=True, eq=False)
class Atom:
    """H^1 atom bound to a family cube; `support` is Q' (Q itself for indicators)."""

    cube: DyadicInterval
    kind: str
    profile: str
    support: Interval
    seed: int
    function: GridFunction

    @property
    def values(self) -> np.ndarray:
        """Sampled atom values."""
        return self.function.values

    def to_dict(self) -> Dict[str, Any]:
        """Seeds and cube ids only; samples are regenerated on load."""
        return {
            "cube": self.cube.to_dict(),
            "kind": self.kind,
            "profile": self.profile,
            "support": list(self.support),
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class LibraryFunction:
    """Labelled member of the equivalence test library."""

    label: str
    kind: str
    scale: float
    function: GridFunction

    def to_dict(self) -> Dict[str, Any]:
        return {"label": self.label, "kind": self.kind, "scale": self.scale}


def _jsonable(value):
    """Canonical JSON-ready form: numpy scalars unwrapped, non-finite floats as text."""
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    return value


@dataclass
class Report:
    """

    Structured results of a check or experiment.

    Every verdict is derived from a table or constant stored in the same report.
    `wall_clock` is excluded from the serialized content so that equal configs
    give byte-identical files.
    """

    name: str
    config: Dict[str, Any] = field(default_factory=dict)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    constants: Dict[str, Any] = field(default_factory=dict)
    verdicts: Dict[str, bool] = field(default_factory=dict)
    refinement: Dict[str, float] = field(default_factory=dict)
    notices: List[str] = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        """True when every verdict passed."""
        return all(self.verdicts.values())

    def add_table(self, name: str, rows) -> pd.DataFrame:
        """Store a table given as a DataFrame or a list of row dicts."""
        table = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows)
        self.tables[name] = table.reset_index(drop=True)
        return self.tables[name]

    def merge(self, prefix: str, other: "Report") -> "Report":
        """Fold another report in, namespacing its entries with `prefix`."""
        for name, table in other.tables.items():
            self.tables[f"{prefix}.{name}"] = table
        for name, value in other.constants.items():
            self.constants[f"{prefix}.{name}"] = value
        for name, value in other.verdicts.items():
            self.verdicts[f"{prefix}.{name}"] = bool(value)
        for name, value in other.refinement.items():
            self.refinement[f"{prefix}.{name}"] = value
        self.notices.extend(f"{prefix}: {notice}" for notice in other.notices)
        return self

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        """Convert the Report to a JSON-ready dictionary."""
        content = {
            "name": self.name,
            "config": self.config,
            "tables": {
                name: {
                    "columns": [str(column) for column in table.columns],
                    "rows": table.to_numpy(dtype=object).tolist(),
                }
                for name, table in sorted(self.tables.items())
            },
            "constants": self.constants,
            "verdicts": self.verdicts,
            "refinement": self.refinement,
            "notices": list(self.notices),
            "passed": self.passed,
        }
        if include_timing:
            content["wall_clock"] = self.wall_clock
        return _jsonable(content)

    def content_hash(self) -> str:
        """SHA-256 of the canonical JSON content."""
        payload = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GridSpec:
    """Grid section of an experiment config."""

    half_width: float = Config.GRID_HALF_WIDTH
    n_points: int = Config.GRID_POINTS
    core_fraction: float = Config.CORE_FRACTION

    def build(self) -> Grid:
        """The Grid described by this spec."""
        return Grid(self.half_width, self.n_points, self.core_fraction)


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Potential section of an experiment config: {family, params, seed}."""

    family: str = "constant"
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0


@dataclass(frozen=True)
class Thresholds:
    """Verdict thresholds of an experiment config."""

    epsilon_min: float = Config.EPSILON_MIN
    delta_min: float = Config.DELTA_MIN
    residual_max: float = Config.RESIDUAL_MAX
    refinement_max: float = Config.REFINEMENT_MAX
    ratio_spread_max: float = Config.RATIO_SPREAD_MAX
    atom_spread_max: float = Config.ATOM_SPREAD_MAX


@dataclass(frozen=True)
class OutputSpec:
    """Output section of an experiment config."""

    directory: str = Config.OUTPUT_FOLDER
    format: str = "json"


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Complete, deterministic description of an experiment run."""

    experiment_id: str = "experiment"
    grid: GridSpec = field(default_factory=GridSpec)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    rule: str = Config.FAMILY_RULE
    beta: float = Config.BETA
    t_grid: Dict[str, int] = field(
        default_factory=lambda: {
            "k_min": Config.T_GRID_K_MIN,
            "k_max": Config.T_GRID_K_MAX,
        }
    )
    eps_grid: Dict[str, int] = field(
        default_factory=lambda: {"m_max": Config.EPS_GRID_M_MAX}
    )
    thresholds: Thresholds = field(default_factory=Thresholds)
    seeds: Dict[str, int] = field(
        default_factory=lambda: {"atoms": 0, "sampling": 0, "test_functions": 0}
    )
    n_atoms: int = 100
    n_test_functions: int = 40
    alpha: float = 2.0
    refine: bool = True
    output: OutputSpec = field(default_factory=OutputSpec)

    def to_dict(self) -> Dict[str, Any]:
        """Snapshot of the config (output paths excluded, they never affect results)."""
        snapshot = asdict(self)
        snapshot.pop("output")
        return _jsonable(snapshot)

    def operator_key(self, refined: bool = False) -> str:
        """Hash identifying the spectral operator this config builds."""
        grid = self.grid.build()
        if refined:
            grid = grid.refine()
        payload = {
            "grid": grid.to_dict(),
            "potential": {
                "family": self.potential.family,
                "params": self.potential.params,
                "seed": self.potential.seed,
            },
        }
        text = json.dumps(_jsonable(payload), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()
