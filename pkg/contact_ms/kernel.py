"""
Closed-form kernels of the linearized operator.

A kernel element has constant chemical potential, so it solves

    rho'' + kappa^2 rho = c   on (0, l),
    rho'(0) + omega1 rho(0) = 0,   rho'(l) - omega2 rho(l) = 0,

for some constant c. For kappa = 0 the solutions are the quadratics
h(0) (1 - omega1 s) + c s^2 / 2; for kappa != 0 they are
c / kappa^2 + A cos(kappa s) + B sin(kappa s). The Robin conditions leave a
one-dimensional family except where a 2x2 solvability determinant vanishes.

The module also certifies semisimplicity of the zero eigenvalue, either
through the closed-form integral of the generalized eigenvector equation
(flat case) or numerically through N(A) = N(A^2).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import null_space, svdvals

from .model import AnalyzerError, Grid1D, GridLike, HeightField, ModelParams, resolve_grid

logger = logging.getLogger(__name__)

SINGULAR_RTOL = 1e-10
MEAN_FREE_RTOL = 1e-10


class DegenerateDenominator(AnalyzerError):
    """Raised when omega1 + omega2 - omega1 omega2 l vanishes."""

    pass


@dataclass(frozen=True)
class KernelCoefficients:
    """Closed-form record of one kernel element.

    Flat elements are h0 (1 - omega1 s) + c s^2 / 2 and leave ``A``/``B``
    unset; curved elements are c / kappa^2 + A cos(kappa s) + B sin(kappa s)
    with h0 = rho(0).
    """

    h0: float
    c: float
    A: Optional[float] = None
    B: Optional[float] = None

    def evaluate(self, s: np.ndarray, p: ModelParams) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.A is None:
            return self.h0 * (1.0 - p.omega1 * s) + 0.5 * self.c * s**2
        k = p.kappa
        return self.c / k**2 + self.A * np.cos(k * s) + (self.B or 0.0) * np.sin(k * s)


@dataclass(frozen=True)
class KernelDescription:
    """The equilibrium directions of the linearized operator."""

    params: ModelParams
    dimension: int
    basis: tuple[HeightField, ...]
    coefficients: tuple[KernelCoefficients, ...]

    degenerate: bool
    """True when the kernel has dimension >= 2 or contains a mean-free element."""

    system_singular: bool
    """True when the 2x2 Robin solvability determinant vanishes."""

    mean_free: bool
    """True when some kernel element has zero mean."""

    def evaluate(self, s: np.ndarray) -> np.ndarray:
        """Basis elements at points s, one column per element."""
        return np.column_stack([coef.evaluate(s, self.params) for coef in self.coefficients])


def _is_singular(M: np.ndarray) -> bool:
    return abs(np.linalg.det(M)) < SINGULAR_RTOL * max(np.linalg.norm(M) ** 2, 1e-300)


def _describe(
    p: ModelParams,
    grid: Grid1D,
    coefficients: list[KernelCoefficients],
    system_singular: bool,
    mean_free: bool,
) -> KernelDescription:
    basis = tuple(HeightField(grid, coef.evaluate(grid.nodes, p)) for coef in coefficients)
    dimension = len(coefficients)
    description = KernelDescription(
        params=p,
        dimension=dimension,
        basis=basis,
        coefficients=tuple(coefficients),
        degenerate=dimension >= 2 or mean_free,
        system_singular=system_singular,
        mean_free=mean_free,
    )
    logger.debug(
        "Kernel for %s: dim=%d singular=%s mean_free=%s",
        p,
        dimension,
        system_singular,
        mean_free,
    )
    return description


def flat_denominator(p: ModelParams) -> float:
    """omega1 + omega2 - omega1 omega2 l."""
    return p.omega1 + p.omega2 - p.omega1 * p.omega2 * p.l


def kernel_flat(p: ModelParams, grid: GridLike = None) -> KernelDescription:
    """
    Kernel of the flat operator.

    The left Robin condition holds for every h0 (1 - omega1 s) + c s^2 / 2;
    the right one reduces to -den h0 + (l - omega2 l^2 / 2) c = 0 with
    den = omega1 + omega2 - omega1 omega2 l. Generically this fixes h0 per
    unit c; when den = 0 either c = 0 (constants at omega = 0) or both
    coefficients are free (omega1 = omega2 = 2/l).

    Raises:
        ValueError: If kappa != 0.
    """
    if not p.is_flat:
        raise ValueError(f"kernel_flat needs kappa = 0, got {p.kappa}")
    grid = resolve_grid(grid, p.l)
    l, w1, w2 = p.l, p.omega1, p.omega2

    # unknowns (h(0), h(l)) per unit c
    system = np.array([[1.0 - w1 * l, -1.0], [-w1, -w2]])
    singular = _is_singular(system)

    den = flat_denominator(p)
    num = l - 0.5 * w2 * l**2
    if not singular:
        coefficients = [KernelCoefficients(h0=num / den, c=1.0)]
    elif abs(num) > SINGULAR_RTOL * (l + 0.5 * abs(w2) * l**2):
        coefficients = [KernelCoefficients(h0=1.0, c=0.0)]
    else:
        coefficients = [KernelCoefficients(h0=1.0, c=0.0), KernelCoefficients(h0=0.0, c=1.0)]

    mean_free = len(coefficients) >= 2
    for coef in coefficients:
        integral, scale = _flat_integral(p, coef.h0, coef.c)
        mean_free |= abs(integral) <= MEAN_FREE_RTOL * max(scale, 1e-300)
    return _describe(p, grid, coefficients, singular, mean_free)


def _flat_integral(p: ModelParams, h0: float, c: float) -> tuple[float, float]:
    """Integral of h0 (1 - omega1 s) + c s^2 / 2 over (0, l), with a scale."""
    l = p.l
    terms = (h0 * l, -0.5 * h0 * p.omega1 * l**2, c * l**3 / 6.0)
    return sum(terms), sum(abs(t) for t in terms)


def _curved_rows(p: ModelParams) -> np.ndarray:
    """Robin rows in the unknowns (c, rho(0), rho'(0))."""
    k, l, w1, w2 = p.kappa, p.l, p.omega1, p.omega2
    S, Co = math.sin(k * l), math.cos(k * l)
    versine = 2.0 * math.sin(0.5 * k * l) ** 2
    return np.array(
        [
            [0.0, w1, 1.0],
            [S / k - w2 * versine / k**2, -k * S - w2 * Co, Co - w2 * S / k],
        ]
    )


def _curved_integral(p: ModelParams, c: float, a: float, b: float) -> tuple[float, float]:
    """Integral of c (1 - cos ks) / k^2 + a cos ks + b sin(ks) / k over (0, l), with a scale."""
    k, l = p.kappa, p.l
    S = math.sin(k * l)
    versine = 2.0 * math.sin(0.5 * k * l) ** 2
    terms = (c * (l / k**2 - S / k**3), a * S / k, b * versine / k**2)
    return sum(terms), sum(abs(t) for t in terms)


def kernel_curved(p: ModelParams, grid: GridLike = None) -> KernelDescription:
    """
    Kernel of the curved operator.

    Writes rho = c (1 - cos ks) / k^2 + rho(0) cos ks + rho'(0) sin(ks) / k,
    so the left Robin row does not involve c. The 2x2 system in
    (rho(0), rho'(0)) decides solvability per unit c; when it is singular the
    kernel is the null space of the full 2x3 Robin system.

    Raises:
        ValueError: If kappa = 0.
    """
    if p.is_flat:
        raise ValueError("kernel_curved needs kappa != 0")
    grid = resolve_grid(grid, p.l)
    k = p.kappa
    rows = _curved_rows(p)
    system = rows[:, 1:]
    singular = _is_singular(system)

    if not singular:
        a, b = np.linalg.solve(system, -rows[:, 0])
        solutions = [np.array([1.0, a, b])]
    else:
        null = null_space(rows, rcond=SINGULAR_RTOL)
        solutions = [col / np.max(np.abs(col)) for col in null.T]

    coefficients = []
    mean_free = False
    for c, a, b in solutions:
        coefficients.append(
            KernelCoefficients(h0=float(a), c=float(c), A=float(a - c / k**2), B=float(b / k))
        )
        integral, scale = _curved_integral(p, c, a, b)
        mean_free |= abs(integral) <= MEAN_FREE_RTOL * max(scale, 1e-300)
    mean_free |= len(solutions) >= 2
    return _describe(p, grid, coefficients, singular, mean_free)


def kernel_description(p: ModelParams, grid: GridLike = None) -> KernelDescription:
    """Closed-form kernel for either the flat or the curved case."""
    if p.is_flat:
        return kernel_flat(p, grid)
    return kernel_curved(p, grid)


def semisimple_integral(p: ModelParams, c1: float) -> float:
    """
    Integral over (0, l) of the flat kernel element with curvature coefficient c1.

    A nonzero value rules out a generalized eigenvector for the zero
    eigenvalue, i.e. N(A) and R(A) meet only in zero.

    Raises:
        DegenerateDenominator: If omega1 + omega2 - omega1 omega2 l = 0.
    """
    if not p.is_flat:
        raise ValueError(f"semisimple_integral needs kappa = 0, got {p.kappa}")
    l, w1, w2 = p.l, p.omega1, p.omega2
    den = flat_denominator(p)
    if abs(den) <= SINGULAR_RTOL * (abs(w1) + abs(w2) + abs(w1 * w2) * l + 1.0 / l):
        raise DegenerateDenominator(
            f"omega1 + omega2 - omega1*omega2*l vanishes for omega1={w1}, omega2={w2}, l={l}"
        )
    return c1 * (6.0 * l**2 + 0.5 * w1 * w2 * l**4 - 2.0 * (w1 + w2) * l**3) / (6.0 * den)


def _square(A: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {A.shape}")
    return A


def _count_below(A: np.ndarray, threshold: float) -> int:
    return int(np.sum(svdvals(A) <= threshold))


def numerical_nullity(A: np.ndarray, tol: float) -> int:
    """Number of singular values of A at or below tol * sigma_max."""
    A = _square(A)
    sigma_max = svdvals(A)[0] if A.size else 0.0
    return _count_below(A, tol * sigma_max)


def check_semisimple(A: np.ndarray, tol: float = 1e-9) -> bool:
    """
    Whether the zero eigenvalue of A is semisimple, i.e. N(A) = N(A^2).

    A uses the SVD threshold tol * sigma_max; A^2 uses tol * sigma_max^2 so
    that a small nonzero eigenvalue is not squared into the kernel.
    """
    A = _square(A)
    sigma_max = svdvals(A)[0] if A.size else 0.0
    return _count_below(A, tol * sigma_max) == _count_below(A @ A, tol * sigma_max**2)
