"""
Shared parameter and field types for contact-ms.

This module provides the value objects every analysis module works with:

- ``ModelParams``: interface length, bulk depth, wall parameters and
  equilibrium curvature, validated on construction.
- ``Grid1D``: the interface discretization (Chebyshev collocation or nodal
  finite differences) with quadrature weights and the matrices built on it.
- ``HeightField``: a scalar perturbation sampled on a grid.
- ``TrialBasis``: smooth Galerkin trial functions shared by ``forms`` and
  ``spectrum``.

It also defines the ``AnalyzerError`` hierarchy root.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, fields, replace
from functools import cached_property, lru_cache
from typing import Optional, Union

import numpy as np
from scipy.interpolate import BarycentricInterpolator

logger = logging.getLogger(__name__)

BASIS_CHEBYSHEV = "chebyshev"
BASIS_FD = "fd"
BASES = (BASIS_CHEBYSHEV, BASIS_FD)

DEFAULT_NODES = 129

PARAM_KEYS = ("l", "H", "omega1", "omega2", "kappa")


class AnalyzerError(Exception):
    """Base exception for contact-ms analysis errors."""

    pass


class ConfigurationError(AnalyzerError, ValueError):
    """Raised when a run configuration cannot be parsed or validated."""

    pass


class GeometricConstraintViolated(AnalyzerError):
    """Raised when the equilibrium arc would close on itself (|kappa| * l >= 2 pi)."""

    pass


class NonPositiveLength(AnalyzerError):
    """Raised when the interface length or the bulk depth is not positive."""

    pass


class EigensolverFailure(AnalyzerError):
    """Raised when a dense eigensolve fails or returns an unusable spectrum."""

    pass


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless problem parameters.

    The wall parameters follow the sign convention omega_i > 0 when the bulk
    domain bulges outward at contact point i and omega_i < 0 when it bulges
    inward; a convex circular wall of radius r gives omega = -1/r.

    Example:
        ```python
        p = ModelParams(l=1.0, omega1=-1.0, omega2=-1.0)
        p.omega_plus  # -1.0
        ```
    """

    l: float = 1.0
    """Interface length."""

    H: float = 1.0
    """Half-depth of the reference bulk strip (0, l) x (-H, H)."""

    omega1: float = 0.0
    """Wall parameter at the left contact point s = 0."""

    omega2: float = 0.0
    """Wall parameter at the right contact point s = l."""

    kappa: float = 0.0
    """Equilibrium curvature: 0 for a flat interface, -1/R for an arc of radius R."""

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating)):
                raise ConfigurationError(f"{f.name} must be a number, got {value!r}")
            object.__setattr__(self, f.name, float(value))
        validate_params(self)

    @property
    def omega_plus(self) -> Optional[float]:
        """Common wall parameter when both walls agree, else None."""
        return self.omega1 if self.omega1 == self.omega2 else None

    @property
    def is_flat(self) -> bool:
        return self.kappa == 0.0

    def replace(self, **changes: float) -> ModelParams:
        """Return a validated copy with some fields changed."""
        return replace(self, **changes)

    def to_mapping(self) -> dict[str, float]:
        """Flat key-value form with keys l, H, omega1, omega2, kappa."""
        return {key: getattr(self, key) for key in PARAM_KEYS}

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> ModelParams:
        """
        Build parameters from a flat key-value section.

        Values may be numbers or numeric strings. The key ``omega`` sets both
        wall parameters; explicit ``omega1``/``omega2`` win over it.

        Raises:
            ConfigurationError: On unknown keys or unparsable values.
        """
        allowed = set(PARAM_KEYS) | {"omega"}
        unknown = sorted(set(mapping) - allowed)
        if unknown:
            raise ConfigurationError(f"Unknown parameter keys: {', '.join(unknown)}")

        values: dict[str, float] = {}
        for key, raw in mapping.items():
            try:
                values[key] = float(raw)  # type: ignore[arg-type]
            except (TypeError, ValueError) as e:
                raise ConfigurationError(f"Parameter {key} is not a number: {raw!r}") from e

        if "omega" in values:
            shared = values.pop("omega")
            values.setdefault("omega1", shared)
            values.setdefault("omega2", shared)
        return cls(**values)


def validate_params(p: ModelParams) -> ModelParams:
    """
    Check the admissibility of a parameter set.

    Args:
        p: Parameters to check.

    Returns:
        ``p`` unchanged.

    Raises:
        NonPositiveLength: If l <= 0 or H <= 0.
        GeometricConstraintViolated: If |kappa| * l >= 2 pi.
        ConfigurationError: If a wall parameter is not finite.
    """
    if not (math.isfinite(p.l) and p.l > 0):
        raise NonPositiveLength(f"Interface length must be positive, got l={p.l}")
    if not (math.isfinite(p.H) and p.H > 0):
        raise NonPositiveLength(f"Bulk depth must be positive, got H={p.H}")
    if not (math.isfinite(p.omega1) and math.isfinite(p.omega2)):
        raise ConfigurationError(
            f"Wall parameters must be finite, got omega1={p.omega1}, omega2={p.omega2}"
        )
    if not abs(p.kappa) * p.l < 2.0 * math.pi:
        raise GeometricConstraintViolated(
            f"|kappa| * l = {abs(p.kappa) * p.l:.6g} must stay below 2*pi"
        )
    return p


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


def chebyshev_nodes(n: int, length: float) -> np.ndarray:
    """Chebyshev-Lobatto nodes on [0, length], increasing, endpoints exact."""
    j = np.arange(n)
    return length * np.sin(0.5 * np.pi * j / (n - 1)) ** 2


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights on [-1, 1] for the n Chebyshev-Lobatto points."""
    N = n - 1
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    inner = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        k = np.arange(1, N // 2)
        v -= np.cos(N * theta[inner]) / (N**2 - 1)
    else:
        w[0] = w[N] = 1.0 / N**2
        k = np.arange(1, (N - 1) // 2 + 1)
    if k.size:
        v -= 2.0 * (np.cos(2.0 * np.outer(theta[inner], k)) / (4.0 * k**2 - 1)).sum(axis=1)
    w[inner] = 2.0 * v / N
    return w


def chebyshev_differentiation(n: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Chebyshev collocation derivative on the reference points t_j = cos(pi j / N).

    Returns:
        Tuple (t, D) with D @ f(t) ~ f'(t).
    """
    N = n - 1
    j = np.arange(n)
    t = np.sin(np.pi * (N - 2.0 * j) / (2.0 * N))
    c = np.hstack((2.0, np.ones(N - 1), 2.0)) * (-1.0) ** j
    T = np.tile(t, (n, 1)).T
    dT = T - T.T
    D = np.outer(c, 1.0 / c) / (dT + np.eye(n))
    D = D - np.diag(D.sum(axis=1))
    return t, D


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Interface discretization on [0, l].

    The ``chebyshev`` basis uses Chebyshev-Lobatto collocation with
    Clenshaw-Curtis weights; the ``fd`` basis uses arbitrary increasing
    nodes with trapezoid weights, second-order differences and P1 forms.
    Prefer the ``chebyshev``/``uniform``/``piecewise`` constructors.
    """

    nodes: np.ndarray
    """Strictly increasing coordinates with nodes[0] = 0 and nodes[-1] = l."""

    weights: np.ndarray
    """Positive quadrature weights summing to l."""

    basis: str = BASIS_CHEBYSHEV
    """Basis tag, ``chebyshev`` or ``fd``."""

    K: int = 0
    """Cosine-mode truncation for DtN coupling; 0 means n - 1."""

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("A grid needs at least 3 nodes")
        if weights.shape != nodes.shape:
            raise ValueError("Grid weights must match the nodes")
        if self.basis not in BASES:
            raise ValueError(f"Unknown basis '{self.basis}', expected one of {BASES}")
        if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("Grid nodes must start at 0 and increase strictly")
        length = nodes[-1]
        if np.any(weights <= 0) or abs(weights.sum() - length) > 1e-12 * length:
            raise ValueError("Grid weights must be positive and sum to the grid length")
        K = self.K or nodes.size - 1
        if K < 1:
            raise ValueError(f"Cosine-mode count must be positive, got {self.K}")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "K", int(K))

    # -- constructors -------------------------------------------------------

    @classmethod
    def chebyshev(cls, l: float, n: int = DEFAULT_NODES, K: Optional[int] = None) -> Grid1D:
        """Chebyshev-Lobatto collocation grid with n nodes on [0, l]."""
        if n < 3:
            raise ValueError(f"Chebyshev grid needs at least 3 nodes, got {n}")
        return cls(
            nodes=chebyshev_nodes(n, l),
            weights=0.5 * l * clenshaw_curtis_weights(n),
            basis=BASIS_CHEBYSHEV,
            K=K or 0,
        )

    @classmethod
    def from_nodes(cls, nodes: np.ndarray, K: Optional[int] = None) -> Grid1D:
        """Finite-difference grid on the given increasing nodes."""
        nodes = np.asarray(nodes, dtype=float)
        dx = np.diff(nodes)
        weights = np.zeros_like(nodes)
        weights[:-1] += 0.5 * dx
        weights[1:] += 0.5 * dx
        return cls(nodes=nodes, weights=weights, basis=BASIS_FD, K=K or 0)

    @classmethod
    def uniform(cls, l: float, n: int = DEFAULT_NODES, K: Optional[int] = None) -> Grid1D:
        """Uniform finite-difference grid with n nodes on [0, l]."""
        nodes = np.linspace(0.0, l, n)
        nodes[-1] = l
        return cls.from_nodes(nodes, K)

    @classmethod
    def piecewise(
        cls,
        breakpoints: np.ndarray,
        per_segment: int = 8,
        K: Optional[int] = None,
    ) -> Grid1D:
        """Finite-difference grid whose nodes include every breakpoint."""
        breakpoints = np.asarray(breakpoints, dtype=float)
        if per_segment < 1:
            raise ValueError(f"per_segment must be positive, got {per_segment}")
        pieces = [
            np.linspace(a, b, per_segment + 1)[:-1]
            for a, b in zip(breakpoints[:-1], breakpoints[1:])
        ]
        return cls.from_nodes(np.concatenate([*pieces, breakpoints[-1:]]), K)

    # -- shape --------------------------------------------------------------

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @property
    def length(self) -> float:
        return float(self.nodes[-1])

    @property
    def galerkin_modes(self) -> int:
        """Number of cosine modes in the smooth trial space on this grid."""
        per_mode = 4 if self.basis == BASIS_CHEBYSHEV else 8
        return max(1, min(self.K, (self.n - 1) // per_mode))

    # -- operators ----------------------------------------------------------

    @cached_property
    def diff_matrix(self) -> np.ndarray:
        """First-derivative matrix D with D @ h ~ h'."""
        if self.basis == BASIS_CHEBYSHEV:
            _, D = chebyshev_differentiation(self.n)
            return -(2.0 / self.length) * D
        return np.gradient(np.eye(self.n), self.nodes, axis=0, edge_order=2)

    @cached_property
    def second_diff_matrix(self) -> np.ndarray:
        return self.diff_matrix @ self.diff_matrix

    @cached_property
    def stiffness(self) -> np.ndarray:
        """Symmetric matrix with h.T @ stiffness @ h ~ integral of h'^2."""
        if self.basis == BASIS_CHEBYSHEV:
            D = self.diff_matrix
            return D.T @ (self.weights[:, None] * D)
        G = np.diff(np.eye(self.n), axis=0)
        return G.T @ (G / np.diff(self.nodes)[:, None])

    @cached_property
    def mass(self) -> np.ndarray:
        """Symmetric matrix with h.T @ mass @ h ~ integral of h^2."""
        if self.basis == BASIS_CHEBYSHEV:
            return np.diag(self.weights)
        dx = np.diff(self.nodes)
        main = np.zeros(self.n)
        main[:-1] += dx / 3.0
        main[1:] += dx / 3.0
        return np.diag(main) + np.diag(dx / 6.0, 1) + np.diag(dx / 6.0, -1)

    @cached_property
    def _reference_points(self) -> np.ndarray:
        return 1.0 - 2.0 * self.nodes / self.length

    def cardinal_matrix(self, x: np.ndarray) -> np.ndarray:
        """Matrix L with L @ values = interpolant of values at x."""
        x = np.asarray(x, dtype=float)
        if self.basis == BASIS_CHEBYSHEV:
            interp = BarycentricInterpolator(self._reference_points, np.eye(self.n))
            return np.asarray(interp(1.0 - 2.0 * x / self.length))
        idx = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, self.n - 2)
        left, right = self.nodes[idx], self.nodes[idx + 1]
        theta = (x - left) / (right - left)
        L = np.zeros((x.size, self.n))
        rows = np.arange(x.size)
        L[rows, idx] = 1.0 - theta
        L[rows, idx + 1] = theta
        return L

    def interpolate(self, values: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Evaluate the grid interpolant of nodal values at points x."""
        x = np.asarray(x, dtype=float)
        if self.basis == BASIS_CHEBYSHEV:
            interp = BarycentricInterpolator(self._reference_points, np.asarray(values))
            return np.asarray(interp(1.0 - 2.0 * x / self.length))
        return np.interp(x, self.nodes, values)

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> HeightField:
        return HeightField(self, func(self.nodes))


@dataclass(frozen=True)
class GridSpec:
    """Grid recipe used where the interface length varies between evaluations."""

    n: int = DEFAULT_NODES
    """Number of collocation nodes."""

    basis: str = BASIS_CHEBYSHEV
    """Basis tag, ``chebyshev`` or ``fd``."""

    K: Optional[int] = None
    """Cosine-mode truncation; None means n - 1."""

    def __post_init__(self):
        if self.n < 5:
            raise ValueError(f"Grid needs at least 5 nodes, got {self.n}")
        if self.basis not in BASES:
            raise ValueError(f"Unknown basis '{self.basis}', expected one of {BASES}")
        if self.K is not None and self.K < 1:
            raise ValueError(f"Cosine-mode count must be positive, got {self.K}")

    def build(self, l: float) -> Grid1D:
        return _cached_grid(self.basis, self.n, self.K, float(l))


@lru_cache(maxsize=64)
def _cached_grid(basis: str, n: int, K: Optional[int], l: float) -> Grid1D:
    logger.debug("Building %s grid n=%d on [0, %.6g]", basis, n, l)
    if basis == BASIS_CHEBYSHEV:
        return Grid1D.chebyshev(l, n, K)
    return Grid1D.uniform(l, n, K)


GridLike = Union[Grid1D, GridSpec, None]


def resolve_grid(grid: GridLike, l: float) -> Grid1D:
    """
    Turn a grid argument into a concrete grid on [0, l].

    Raises:
        ValueError: If a concrete grid does not span [0, l].
    """
    if grid is None:
        grid = GridSpec()
    if isinstance(grid, GridSpec):
        return grid.build(l)
    if abs(grid.length - l) > 1e-12 * l:
        raise ValueError(f"Grid spans [0, {grid.length}] but the interface length is {l}")
    return grid


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HeightField:
    """A scalar interface perturbation sampled on the nodes of a grid."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValueError(f"Field has shape {values.shape}, grid expects ({self.grid.n},)")
        if not np.all(np.isfinite(values)):
            raise ValueError("Field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid1D) -> HeightField:
        return cls(grid, np.zeros(grid.n))

    def mean(self) -> float:
        """Quadrature value of (1/l) * integral of h."""
        return float(self.grid.weights @ self.values) / self.grid.length

    def inner(self, other: HeightField) -> float:
        """L2 inner product through the grid mass matrix."""
        self._check_grid(other)
        return float(self.values @ self.grid.mass @ other.values)

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self), 0.0))

    def derivative(self) -> HeightField:
        return HeightField(self.grid, self.grid.diff_matrix @ self.values)

    def at(self, x: np.ndarray) -> np.ndarray:
        return self.grid.interpolate(self.values, x)

    def normalized(self) -> HeightField:
        norm = self.norm()
        if norm == 0.0:
            raise ValueError("Cannot normalize a zero field")
        return HeightField(self.grid, self.values / norm)

    def _check_grid(self, other: HeightField) -> None:
        if other.grid is not self.grid and not (
            other.grid.n == self.grid.n and np.array_equal(other.grid.nodes, self.grid.nodes)
        ):
            raise ValueError("Fields live on different grids")

    def __add__(self, other: HeightField) -> HeightField:
        self._check_grid(other)
        return HeightField(self.grid, self.values + other.values)

    def __sub__(self, other: HeightField) -> HeightField:
        self._check_grid(other)
        return HeightField(self.grid, self.values - other.values)

    def __neg__(self) -> HeightField:
        return HeightField(self.grid, -self.values)

    def __mul__(self, scalar: float) -> HeightField:
        return HeightField(self.grid, float(scalar) * self.values)

    __rmul__ = __mul__


def mean(h: HeightField) -> float:
    """Quadrature approximation of (1/l) * integral of h; exact for constants."""
    return h.mean()


# ---------------------------------------------------------------------------
# Smooth trial space
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrialBasis:
    """Smooth trial functions sampled on a grid, with their endpoint slopes.

    Columns are, in order: the constant (optional), the two slope lifts
    q1 = -(l - s)^2 / (2l) + l/6 and q2 = s^2 / (2l) - l/6, then the
    orthonormal cosines sqrt(2/l) cos(k pi s / l), k = 1..modes. The lifts
    carry unit slope at one end and zero slope at the other, so any
    Robin pair of end slopes is reachable while the cosine tail decays fast.
    """

    grid: Grid1D
    values: np.ndarray
    """Node values, shape (n, size)."""

    slopes_left: np.ndarray
    """Exact derivatives at s = 0."""

    slopes_right: np.ndarray
    """Exact derivatives at s = l."""

    modes: int

    @property
    def size(self) -> int:
        return int(self.values.shape[1])

    @property
    def values_left(self) -> np.ndarray:
        return self.values[0]

    @property
    def values_right(self) -> np.ndarray:
        return self.values[-1]


def smooth_basis(
    grid: Grid1D, modes: Optional[int] = None, *, constant: bool = False
) -> TrialBasis:
    """
    Sample the smooth trial space on a grid.

    Non-constant columns are shifted to zero discrete mean, which leaves
    their slopes untouched.

    Args:
        grid: Grid to sample on.
        modes: Number of cosine modes; defaults to ``grid.galerkin_modes``.
        constant: Whether to include the constant function as first column.
    """
    M = grid.galerkin_modes if modes is None else modes
    if M < 1:
        raise ValueError(f"Need at least one cosine mode, got {M}")
    l = grid.length
    x = grid.nodes
    k = np.arange(1, M + 1)

    q1 = -((l - x) ** 2) / (2.0 * l) + l / 6.0
    q2 = x**2 / (2.0 * l) - l / 6.0
    cosines = math.sqrt(2.0 / l) * np.cos(np.outer(x, k) * np.pi / l)
    columns = np.column_stack([q1, q2, cosines])
    columns = columns - (grid.weights @ columns)[None, :] / l

    slopes_left = np.concatenate([[1.0, 0.0], np.zeros(M)])
    slopes_right = np.concatenate([[0.0, 1.0], np.zeros(M)])
    if constant:
        columns = np.column_stack([np.ones(grid.n), columns])
        slopes_left = np.concatenate([[0.0], slopes_left])
        slopes_right = np.concatenate([[0.0], slopes_right])
    return TrialBasis(
        grid=grid,
        values=columns,
        slopes_left=slopes_left,
        slopes_right=slopes_right,
        modes=M,
    )
