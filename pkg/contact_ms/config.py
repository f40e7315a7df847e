"""
Configuration classes for contact-ms.

This module provides one dataclass per analysis concern and a
``RunConfig`` that bundles them with the model parameters. Config files are
flat ``key = value`` text with ``#`` comments; command-line flags override
their keys.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from dotenv import dotenv_values

from .model import (
    BASES,
    BASIS_CHEBYSHEV,
    DEFAULT_NODES,
    PARAM_KEYS,
    ConfigurationError,
    GridSpec,
    ModelParams,
)
from .spectrum import VARY_CHOICES
from .utils import (
    validate_non_negative_number,
    validate_positive_int,
    validate_positive_number,
)

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "CONTACT_MS_CONFIG"
MAX_CONFIG_BYTES = 1024 * 1024

INITIAL_CHOICES = ("mode", "cosine", "random")
WALL_CHOICES = ("lines", "circles", "line-circle", "circle-line")
SWEEPABLE = (*PARAM_KEYS, "omega_plus", "omega")

INT_KEYS = {
    "nodes",
    "modes",
    "count",
    "workers",
    "n_steps",
    "index",
    "seed",
    "nx",
    "ny",
    "oracle_modes",
    "eq_nodes",
}
FLOAT_KEYS = {"tol", "t_end", "radius1", "radius2", "separation"}
STRING_KEYS = {"basis", "vary", "bracket", "initial", "walls", "m_range"}
CONFIG_KEYS = frozenset({*PARAM_KEYS, "omega"} | INT_KEYS | FLOAT_KEYS | STRING_KEYS)


@dataclass
class GridConfig:
    """Configuration for the interface discretization."""

    nodes: int = DEFAULT_NODES
    """Number of collocation nodes."""

    basis: str = BASIS_CHEBYSHEV
    """Basis tag: 'chebyshev' or 'fd'."""

    modes: Optional[int] = None
    """Cosine-mode truncation K for the DtN coupling. None uses nodes - 1."""

    def __post_init__(self):
        validate_positive_int(self.nodes, "nodes")
        if self.nodes < 5:
            raise ValueError(f"nodes must be at least 5, got {self.nodes}")
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}, got '{self.basis}'")
        if self.modes is not None:
            validate_positive_int(self.modes, "modes")

    def spec(self) -> GridSpec:
        return GridSpec(n=self.nodes, basis=self.basis, K=self.modes)


@dataclass
class ThresholdConfig:
    """Configuration for threshold bisection."""

    vary: str = "omega_plus"
    """Parameter to bisect on: 'omega_plus', 'l' or 'kappa'."""

    bracket: Optional[tuple[float, float]] = None
    """Initial bracket (lo, hi). None uses the per-parameter default."""

    tol: float = 1e-6
    """Final bracket width."""

    def __post_init__(self):
        if self.vary not in VARY_CHOICES:
            raise ValueError(f"vary must be one of {VARY_CHOICES}, got '{self.vary}'")
        if self.bracket is not None:
            lo, hi = self.bracket
            if not lo < hi:
                raise ValueError(f"bracket must satisfy lo < hi, got {self.bracket}")
        validate_positive_number(self.tol, "tol")


@dataclass(frozen=True)
class SweepRange:
    """A linear sweep ``name:start:stop:count``."""

    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.name not in SWEEPABLE:
            raise ValueError(f"Cannot sweep over '{self.name}', expected one of {SWEEPABLE}")
        validate_positive_int(self.count, "sweep count")

    @classmethod
    def parse(cls, text: str) -> SweepRange:
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"Sweep range must look like name:start:stop:count, got '{text}'")
        name, start, stop, count = parts
        return cls(name=name.strip(), start=float(start), stop=float(stop), count=int(count))

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    def __str__(self) -> str:
        return f"{self.name}:{self.start!r}:{self.stop!r}:{self.count}"


@dataclass
class SweepConfig:
    """Configuration for phase-diagram sweeps."""

    range: Optional[SweepRange] = None
    """Parameter range to sweep. Required by the sweep command."""

    workers: int = 1
    """Thread-pool size; output order never depends on it."""

    def __post_init__(self):
        validate_positive_int(self.workers, "workers")


@dataclass
class EvolveConfig:
    """Configuration for linearized evolution."""

    t_end: float = 1.0
    """Final time."""

    n_steps: int = 100
    """Number of time steps; n_steps + 1 samples are written."""

    initial: str = "mode"
    """Initial data: 'mode' (eigenfunction), 'cosine' or 'random'."""

    index: int = 0
    """Eigenfunction index for 'mode' initial data, 0 = leading."""

    seed: int = 0
    """Seed for 'random' initial data."""

    def __post_init__(self):
        validate_positive_number(self.t_end, "t_end")
        validate_positive_int(self.n_steps, "n_steps")
        if self.initial not in INITIAL_CHOICES:
            raise ValueError(f"initial must be one of {INITIAL_CHOICES}, got '{self.initial}'")
        validate_non_negative_number(self.index, "index")
        validate_non_negative_number(self.seed, "seed")


@dataclass
class OracleConfig:
    """Configuration for the finite-difference DtN comparison."""

    nx: int = 256
    """Mesh cells along the interface."""

    ny: int = 256
    """Mesh cells across each half strip."""

    modes: int = 8
    """Number of cosine modes compared."""

    def __post_init__(self):
        validate_positive_int(self.nx, "nx")
        validate_positive_int(self.ny, "ny")
        validate_positive_int(self.modes, "oracle_modes")


@dataclass
class EquilibriaConfig:
    """Configuration for the nonlinear equilibrium family."""

    walls: str = "circles"
    """Wall layout: 'lines', 'circles', 'line-circle' or 'circle-line'."""

    radius1: float = 1.0
    """Left wall radius (circles only)."""

    radius2: float = 1.0
    """Right wall radius (circles only)."""

    separation: float = 4.0
    """Distance between the wall anchors."""

    m_range: tuple[float, float, int] = (-0.05, 0.05, 11)
    """Mean heights to trace: (start, stop, count)."""

    nodes: int = 33
    """Chebyshev nodes on the reference chord."""

    def __post_init__(self):
        if self.walls not in WALL_CHOICES:
            raise ValueError(f"walls must be one of {WALL_CHOICES}, got '{self.walls}'")
        validate_positive_number(self.radius1, "radius1")
        validate_positive_number(self.radius2, "radius2")
        validate_positive_number(self.separation, "separation")
        validate_positive_int(self.m_range[2], "m_range count")
        validate_positive_int(self.nodes, "eq_nodes")

    def m_values(self) -> np.ndarray:
        start, stop, count = self.m_range
        return np.linspace(start, stop, count)


@dataclass
class RunConfig:
    """Main configuration for a contact-ms run.

    Example:
        ```python
        config = RunConfig.from_mapping({"l": "1", "omega": "-1", "nodes": "65"})
        config.params.omega1  # -1.0
        ```
    """

    params: ModelParams = field(default_factory=ModelParams)
    """Model parameters."""

    grid: GridConfig = field(default_factory=GridConfig)
    """Grid configuration."""

    count: int = 5
    """Number of leading eigenpairs reported by the spectrum command."""

    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    evolve: EvolveConfig = field(default_factory=EvolveConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    equilibria: EquilibriaConfig = field(default_factory=EquilibriaConfig)

    def __post_init__(self):
        validate_positive_int(self.count, "count")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> RunConfig:
        """
        Build a configuration from flat keys.

        Keys may use '-' or '_'. ``vary`` is a parameter name for thresholds
        or a ``name:start:stop:count`` range for sweeps, whose name then also
        serves as the threshold parameter when it is one.

        Raises:
            ConfigurationError: On unknown keys or invalid values.
        """
        flat = {str(k).strip().replace("-", "_"): v for k, v in mapping.items() if v is not None}
        unknown = sorted(set(flat) - CONFIG_KEYS)
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {', '.join(unknown)}")

        try:
            values = {key: _coerce(key, raw) for key, raw in flat.items()}
            params = ModelParams.from_mapping(
                {k: values[k] for k in (*PARAM_KEYS, "omega") if k in values}
            )
            grid = GridConfig(
                nodes=values.get("nodes", DEFAULT_NODES),
                basis=values.get("basis", BASIS_CHEBYSHEV),
                modes=values.get("modes"),
            )

            sweep_range = None
            threshold_vary = "omega_plus"
            if "vary" in values:
                vary = values["vary"]
                if ":" in vary:
                    sweep_range = SweepRange.parse(vary)
                    vary = sweep_range.name
                if vary in VARY_CHOICES:
                    threshold_vary = vary
                elif sweep_range is None:
                    raise ValueError(f"vary must be one of {VARY_CHOICES}, got '{vary}'")

            threshold = ThresholdConfig(
                vary=threshold_vary,
                bracket=_parse_bracket(values["bracket"]) if "bracket" in values else None,
                tol=values.get("tol", 1e-6),
            )
            evolve_keys = ("t_end", "n_steps", "initial", "index", "seed")
            evolve = EvolveConfig(**{k: values[k] for k in evolve_keys if k in values})
            oracle = OracleConfig(
                nx=values.get("nx", 256),
                ny=values.get("ny", 256),
                modes=values.get("oracle_modes", 8),
            )
            wall_keys = ("walls", "radius1", "radius2", "separation")
            eq_kwargs = {k: values[k] for k in wall_keys if k in values}
            if "m_range" in values:
                eq_kwargs["m_range"] = _parse_m_range(values["m_range"])
            if "eq_nodes" in values:
                eq_kwargs["nodes"] = values["eq_nodes"]

            config = cls(
                params=params,
                grid=grid,
                count=values.get("count", 5),
                threshold=threshold,
                sweep=SweepConfig(range=sweep_range, workers=values.get("workers", 1)),
                evolve=evolve,
                oracle=oracle,
                equilibria=EquilibriaConfig(**eq_kwargs),
            )
        except ConfigurationError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigurationError(str(e)) from e

        logger.debug("Configuration: %s", config.to_mapping())
        return config

    def to_mapping(self) -> dict[str, str]:
        """Flat string form accepted by ``from_mapping``."""
        out = {key: repr(value) for key, value in self.params.to_mapping().items()}
        out.update(
            nodes=str(self.grid.nodes),
            basis=self.grid.basis,
            count=str(self.count),
            vary=str(self.sweep.range) if self.sweep.range else self.threshold.vary,
            tol=repr(self.threshold.tol),
            workers=str(self.sweep.workers),
            t_end=repr(self.evolve.t_end),
            n_steps=str(self.evolve.n_steps),
            initial=self.evolve.initial,
            index=str(self.evolve.index),
            seed=str(self.evolve.seed),
            nx=str(self.oracle.nx),
            ny=str(self.oracle.ny),
            oracle_modes=str(self.oracle.modes),
            walls=self.equilibria.walls,
            radius1=repr(self.equilibria.radius1),
            radius2=repr(self.equilibria.radius2),
            separation=repr(self.equilibria.separation),
            m_range=":".join(str(v) for v in self.equilibria.m_range),
            eq_nodes=str(self.equilibria.nodes),
        )
        if self.grid.modes is not None:
            out["modes"] = str(self.grid.modes)
        if self.threshold.bracket is not None:
            out["bracket"] = f"{self.threshold.bracket[0]!r}:{self.threshold.bracket[1]!r}"
        return out


def _coerce(key: str, raw: object) -> object:
    if key in INT_KEYS:
        if isinstance(raw, bool):
            raise ValueError(f"{key} must be an integer, got {raw!r}")
        if isinstance(raw, int):
            return raw
        try:
            return int(str(raw).strip())
        except ValueError as e:
            raise ValueError(f"{key} must be an integer, got {raw!r}") from e
    if key in FLOAT_KEYS:
        try:
            return float(raw)  # type: ignore[arg-type]
        except (TypeError, ValueError) as e:
            raise ValueError(f"{key} must be a number, got {raw!r}") from e
    if key in STRING_KEYS:
        return str(raw).strip()
    return raw


def _parse_bracket(text: str) -> tuple[float, float]:
    parts = text.replace(",", ":").split(":")
    if len(parts) != 2:
        raise ValueError(f"bracket must look like lo:hi, got '{text}'")
    return (float(parts[0]), float(parts[1]))


def _parse_m_range(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"m_range must look like start:stop:count, got '{text}'")
    return (float(parts[0]), float(parts[1]), int(parts[2]))


def load_config_file(path: Union[str, Path]) -> dict[str, str]:
    """
    Read a flat ``key = value`` config file.

    Args:
        path: File to read.

    Returns:
        Raw key-value pairs with keys normalized to underscores.

    Raises:
        ConfigurationError: If the file is missing, too large, not a regular
            file, has a key without a value, or has unknown keys.
    """
    file_path = Path(path).resolve()
    try:
        if not file_path.is_file():
            raise ConfigurationError(f"Not a regular file: {path}")
        if file_path.stat().st_size > MAX_CONFIG_BYTES:
            raise ConfigurationError(f"Config file too large (max {MAX_CONFIG_BYTES} bytes)")
        raw = dotenv_values(file_path, encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"Failed to read config file '{path}': {e}") from e

    values: dict[str, str] = {}
    for key, value in raw.items():
        name = key.strip().replace("-", "_")
        if value is None:
            raise ConfigurationError(f"Key '{key}' in {path} has no value")
        if name not in CONFIG_KEYS:
            raise ConfigurationError(f"Unknown configuration key '{key}' in {path}")
        values[name] = value
    logger.info("Loaded %d keys from %s", len(values), file_path)
    return values


def config_path_from_env() -> Optional[str]:
    """Config file named by CONTACT_MS_CONFIG, if set."""
    return os.environ.get(CONFIG_ENV_VAR) or None
