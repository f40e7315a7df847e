"""
Two-phase Dirichlet-to-Neumann operator on the reference strip.

On the strip (0, l) x (-H, H) with the interface at y = 0 and homogeneous
Neumann conditions on the outer boundary, the operator that maps interface
data g to the negative jump of the normal derivative of its harmonic
extension acts diagonally on cos(k pi x / l) with multiplier

    d_k = 2 (k pi / l) tanh(k pi H / l).

This module provides that symbol, its inverse on mean-free data, the dense
matrices used by the eigenproblem, and an independent five-point
finite-difference solve that serves as an oracle for the symbol.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pandas as pd
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss
from scipy.sparse.linalg import factorized

from .model import (
    BASIS_CHEBYSHEV,
    AnalyzerError,
    Grid1D,
    HeightField,
    ModelParams,
    validate_params,
)
from .utils import log_timing, validate_positive_int

logger = logging.getLogger(__name__)

MEAN_FREE_TOL = 1e-10
RESIDUAL_TOL = 1e-10
MIN_ORACLE_MESH = 32


class NotMeanFree(AnalyzerError):
    """Raised when the Neumann-to-Dirichlet map receives data with nonzero mean."""

    pass


class SolverFailure(AnalyzerError):
    """Raised when the finite-difference bulk solve fails or is inaccurate."""

    pass


@dataclass(frozen=True, eq=False)
class DtnSymbol:
    """Cosine-mode multipliers d_1..d_K of the Dirichlet-to-Neumann operator."""

    params: ModelParams
    d: np.ndarray

    @property
    def K(self) -> int:
        return int(self.d.size)

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(1, self.K + 1) * np.pi / self.params.l


def dtn_symbol(p: ModelParams, K: int) -> DtnSymbol:
    """
    Closed-form symbol on the reference strip.

    Mode 0 is excluded: constants have a constant harmonic extension and
    therefore no flux jump.

    Args:
        p: Model parameters (l and H are used).
        K: Number of cosine modes.

    Returns:
        The symbol with d_k = 2 (k pi / l) tanh(k pi H / l), k = 1..K.
    """
    validate_params(p)
    validate_positive_int(K, "K")
    wavenumbers = np.arange(1, K + 1) * np.pi / p.l
    d = 2.0 * wavenumbers * np.tanh(wavenumbers * p.H)
    d.setflags(write=False)
    return DtnSymbol(params=p, d=d)


def cosine_modes(x: np.ndarray, l: float, K: int) -> np.ndarray:
    """Orthonormal cosines sqrt(2/l) cos(k pi x / l), k = 1..K, as columns."""
    k = np.arange(1, K + 1)
    return math.sqrt(2.0 / l) * np.cos(np.outer(x, k) * np.pi / l)


@lru_cache(maxsize=32)
def cosine_transform_matrix(grid: Grid1D, K: int) -> np.ndarray:
    """
    Matrix C (K x n) mapping node values to cosine coefficients.

    On Chebyshev grids the coefficients are those of the polynomial
    interpolant, integrated by Gauss-Legendre quadrature. On finite
    difference grids the grid quadrature is used directly.
    """
    l = grid.length
    if grid.basis == BASIS_CHEBYSHEV:
        t, w = leggauss(grid.n + K + 32)
        x = 0.5 * l * (1.0 - t)
        cardinals = grid.cardinal_matrix(x)
        C = cosine_modes(x, l, K).T @ ((0.5 * l * w)[:, None] * cardinals)
    else:
        C = cosine_modes(grid.nodes, l, K).T * grid.weights[None, :]
    C.setflags(write=False)
    return C


def _check_symbol(grid: Grid1D, sym: DtnSymbol) -> None:
    if abs(grid.length - sym.params.l) > 1e-12 * sym.params.l:
        raise ValueError(
            f"Grid length {grid.length} and symbol length {sym.params.l} differ"
        )


def _mean_free_projector(grid: Grid1D) -> np.ndarray:
    return np.eye(grid.n) - np.outer(np.ones(grid.n), grid.weights) / grid.length


def apply_ntd(g: HeightField, sym: DtnSymbol) -> HeightField:
    """
    Apply the Neumann-to-Dirichlet operator to mean-free interface data.

    Raises:
        NotMeanFree: If |mean(g)| > 1e-10 times the RMS of g.
    """
    grid = g.grid
    _check_symbol(grid, sym)
    rms = g.norm() / math.sqrt(grid.length)
    if abs(g.mean()) > MEAN_FREE_TOL * rms:
        raise NotMeanFree(f"Data has mean {g.mean():.3e} (RMS {rms:.3e})")

    C = cosine_transform_matrix(grid, sym.K)
    values = cosine_modes(grid.nodes, grid.length, sym.K) @ ((C @ g.values) / sym.d)
    values -= grid.weights @ values / grid.length
    return HeightField(grid, values)


def apply_dtn(g: HeightField, sym: DtnSymbol) -> HeightField:
    """Apply the Dirichlet-to-Neumann operator through its symbol; constants map to 0."""
    grid = g.grid
    _check_symbol(grid, sym)
    C = cosine_transform_matrix(grid, sym.K)
    values = cosine_modes(grid.nodes, grid.length, sym.K) @ ((C @ g.values) * sym.d)
    return HeightField(grid, values)


@dataclass(frozen=True, eq=False)
class NtdMatrix:
    """Dense discretizations of the Neumann-to-Dirichlet operator.

    ``form`` is the symmetric positive semidefinite matrix with
    u.T @ form @ v ~ <N u, v>; constants are in its kernel. ``operator``
    maps node values of mean-free data to node values of N g.
    """

    form: np.ndarray
    operator: np.ndarray


def assemble_ntd_matrix(grid: Grid1D, sym: DtnSymbol) -> NtdMatrix:
    """Assemble the form and operator matrices of N on a grid."""
    _check_symbol(grid, sym)
    C = cosine_transform_matrix(grid, sym.K)
    P0 = _mean_free_projector(grid)
    CP = C @ P0
    form = CP.T @ (CP / sym.d[:, None])
    form = 0.5 * (form + form.T)
    operator = P0 @ cosine_modes(grid.nodes, grid.length, sym.K) @ (CP / sym.d[:, None])
    logger.debug("Assembled NtD matrices n=%d K=%d", grid.n, sym.K)
    return NtdMatrix(form=form, operator=operator)


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------


def _neumann_second_difference(m: int, h: float) -> sp.csr_matrix:
    """Second difference on m points with ghost reflection at both ends."""
    main = -2.0 * np.ones(m)
    upper = np.ones(m - 1)
    lower = np.ones(m - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / h**2


@lru_cache(maxsize=8)
def _strip_system(nx: int, ny: int, l: float, H: float):
    """Five-point Laplacian on the half strip (0, l) x (0, H) minus the interface row."""
    dx, dy = l / nx, H / ny
    Lx = _neumann_second_difference(nx + 1, dx)

    # rows j = 1..ny; j = 0 is the Dirichlet interface, j = ny reflects
    main = -2.0 * np.ones(ny)
    upper = np.ones(ny - 1)
    lower = np.ones(ny - 1)
    lower[-1] = 2.0
    Ly = sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / dy**2

    A = (sp.kron(sp.identity(ny), Lx) + sp.kron(Ly, sp.identity(nx + 1))).tocsc()
    try:
        solve = factorized(A)
    except RuntimeError as e:
        raise SolverFailure(f"Strip factorization failed: {e}") from e
    logger.debug("Factorized strip system %dx%d (%d unknowns)", nx, ny, A.shape[0])
    return A, solve


def _interface_flux(g: np.ndarray, nx: int, ny: int, l: float, H: float) -> np.ndarray:
    """d mu / dy at y = 0+ for the harmonic extension of g into the upper half strip."""
    A, solve = _strip_system(nx, ny, l, H)
    dy = H / ny
    b = np.zeros(A.shape[0])
    b[: nx + 1] = -g / dy**2
    mu = solve(b)

    residual = np.abs(A @ mu - b).max()
    scale = abs(A).sum(axis=1).max() * np.abs(mu).max() + np.abs(b).max()
    if not np.isfinite(residual) or residual > RESIDUAL_TOL * max(scale, 1.0):
        raise SolverFailure(f"Strip solve residual {residual:.3e} exceeds tolerance")

    mu = mu.reshape(ny, nx + 1)
    return (-3.0 * g + 4.0 * mu[0] - mu[1]) / (2.0 * dy)


@log_timing("five-point DtN oracle")
def fd_dtn_oracle(
    g: HeightField,
    p: ModelParams,
    mesh: tuple[int, int] = (256, 256),
) -> HeightField:
    """
    Finite-difference Dirichlet-to-Neumann map on the two-phase strip.

    Solves the Laplace equation in both half strips with Dirichlet data g on
    the interface and homogeneous Neumann conditions elsewhere, then returns
    the negative jump of d mu / dy across y = 0 from one-sided second-order
    differences.

    Args:
        g: Interface data; resampled onto the uniform mesh when needed.
        p: Model parameters (l, H).
        mesh: (nx, ny) cells per half strip, each at least 32.

    Returns:
        -[[d mu / dy]] on the nx + 1 uniform interface nodes.

    Raises:
        SolverFailure: If the sparse solve fails or its residual exceeds 1e-10.
    """
    nx, ny = mesh
    if nx < MIN_ORACLE_MESH or ny < MIN_ORACLE_MESH:
        raise ValueError(f"Oracle mesh must be at least {MIN_ORACLE_MESH}x{MIN_ORACLE_MESH}")
    validate_params(p)
    if abs(g.grid.length - p.l) > 1e-12 * p.l:
        raise ValueError(f"Field length {g.grid.length} does not match l={p.l}")

    interface = Grid1D.uniform(p.l, nx + 1)
    same_nodes = g.grid.n == interface.n and np.allclose(g.grid.nodes, interface.nodes)
    data = np.array(g.values if same_nodes else g.at(interface.nodes), dtype=float)

    flux_upper = _interface_flux(data, nx, ny, p.l, p.H)
    # the lower half strip is the mirror image of the upper one
    flux_lower = -flux_upper
    return HeightField(interface, -(flux_upper - flux_lower))


ORACLE_COLUMNS = ["k", "d_symbol", "d_oracle", "rel_error"]


def oracle_comparison(
    p: ModelParams, mesh: tuple[int, int] = (256, 256), K: int = 8
) -> pd.DataFrame:
    """
    Symbol multipliers against the five-point solve, one row per cosine mode.

    The oracle multiplier is the trapezoid projection of the finite-difference
    flux of cos(k pi x / l) back onto the same cosine.
    """
    validate_positive_int(K, "K")
    sym = dtn_symbol(p, K)
    interface = Grid1D.uniform(p.l, mesh[0] + 1)
    rows = []
    for k in range(1, K + 1):
        g = interface.sample(lambda x, k=k: np.cos(k * np.pi * x / p.l))
        flux = fd_dtn_oracle(g, p, mesh)
        d_oracle = float(interface.weights @ (flux.values * g.values)) / float(
            interface.weights @ g.values**2
        )
        d_exact = float(sym.d[k - 1])
        rows.append((k, d_exact, d_oracle, abs(d_oracle - d_exact) / d_exact))
    logger.info("Oracle on %dx%d: max relative error %.3e", *mesh, max(r[3] for r in rows))
    return pd.DataFrame(rows, columns=ORACLE_COLUMNS)
