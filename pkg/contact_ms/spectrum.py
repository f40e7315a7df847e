"""
Spectrum and stability classification of the linearized flow.

The linearized evolution reads N h_t = P0 (h'' + kappa^2 h) with the Robin
conditions h'(0) + omega1 h(0) = 0 and h'(l) - omega2 h(l) = 0, where N is
the Neumann-to-Dirichlet operator of the bulk. Tested against mean-free v
that satisfy the Robin conditions this becomes the symmetric-definite
problem

    lambda <N h, v> = -I*(h, v),

solved by Galerkin projection onto the smooth trial space. The mean of h
is conserved; the constant-mean direction is carried by a lift and its
coupling to the mean-free modes decides the zero eigenvalue group.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.linalg import LinAlgError, null_space

from .dtn import apply_ntd, assemble_ntd_matrix, dtn_symbol
from .forms import form_matrix, min_form_meanfree, quadratic_form
from .kernel import check_semisimple, kernel_description, numerical_nullity
from .model import (
    PARAM_KEYS,
    AnalyzerError,
    EigensolverFailure,
    Grid1D,
    GridLike,
    GridSpec,
    HeightField,
    ModelParams,
    resolve_grid,
    smooth_basis,
)
from .utils import FLOAT_FORMAT, validate_positive_int, validate_positive_number

logger = logging.getLogger(__name__)

ZERO_GROUP_RTOL = 1e-7
ENERGY_RTOL = 1e-6
KERNEL_MATCH_RTOL = 1e-4

VARY_CHOICES = ("omega_plus", "l", "kappa")
DEFAULT_BRACKETS: dict[str, tuple[float, float]] = {
    "omega_plus": (0.1, 10.0),
    "l": (0.1, 10.0),
    "kappa": (0.1, 6.0),
}

SWEEP_COLUMNS = [
    "l",
    "H",
    "omega1",
    "omega2",
    "kappa",
    "verdict",
    "lambda1",
    "mu_min",
    "kernel_dim",
    "semisimple",
]


class NoSignChange(AnalyzerError):
    """Raised when both ends of a threshold bracket classify identically."""

    pass


class Verdict(str, Enum):
    """Stability class of an equilibrium."""

    NORMALLY_STABLE = "NormallyStable"
    UNSTABLE = "Unstable"
    DEGENERATE = "Degenerate"


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModalDecomposition:
    """Eigen-decomposition on the constrained mean-free space.

    ``eigenvalues`` are sorted descending; ``vectors`` are orthonormal in the
    N inner product, and ``eigenfunctions`` holds their node values.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    eigenfunctions: np.ndarray


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """The assembled linearized operator on one grid."""

    params: ModelParams
    grid: Grid1D

    N: np.ndarray
    """Nodal Neumann-to-Dirichlet form."""

    S: np.ndarray
    """Nodal strong form P0 (D^2 + kappa^2 I)."""

    bc: np.ndarray
    """Nodal Robin rows, shape (2, n)."""

    form: np.ndarray
    """Nodal matrix of I*."""

    basis: np.ndarray
    """Node values of a basis of the mean-free Robin trial space, shape (n, r)."""

    lift: np.ndarray
    """A Robin trial function with mean 1."""

    stiffness_z: np.ndarray
    """I* restricted to the basis."""

    ntd_z: np.ndarray
    """N restricted to the basis; symmetric positive definite."""

    @property
    def size(self) -> int:
        return int(self.basis.shape[1])

    @cached_property
    def decomposition(self) -> ModalDecomposition:
        """
        Solve -I* v = lambda N v on the constrained space.

        Raises:
            EigensolverFailure: If the symmetric-definite solve fails.
        """
        try:
            lam, V = scipy.linalg.eigh(-self.stiffness_z, self.ntd_z)
        except (LinAlgError, ValueError) as e:
            raise EigensolverFailure(f"Generalized eigensolve failed for {self.params}: {e}") from e
        lam, V = lam[::-1], V[:, ::-1]
        if not np.all(np.isfinite(lam)):
            raise EigensolverFailure(f"Non-finite eigenvalues for {self.params}")
        return ModalDecomposition(eigenvalues=lam, vectors=V, eigenfunctions=self.basis @ V)

    @cached_property
    def lift_coupling(self) -> np.ndarray:
        """Coupling c = -V^T Z^T F e of the mean direction into each mode."""
        V = self.decomposition.vectors
        return -(V.T @ (self.basis.T @ (self.form @ self.lift)))


def _symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def assemble_operator(p: ModelParams, grid: GridLike = None) -> LinearizedOperator:
    """
    Assemble N, the strong form S, the Robin rows and the constrained space.

    The trial space is the smooth basis with the constant included. Robin
    conditions are imposed on its coefficients through their exact end
    slopes, and the mean constraint through the grid quadrature; both use
    ``scipy.linalg.null_space``.

    Raises:
        EigensolverFailure: If the constrained space has no mean direction.
    """
    grid = resolve_grid(grid, p.l)
    n, l = grid.n, grid.length
    sym = dtn_symbol(p, grid.K)
    N = assemble_ntd_matrix(grid, sym).form

    P0 = np.eye(n) - np.outer(np.ones(n), grid.weights) / l
    S = P0 @ (grid.second_diff_matrix + p.kappa**2 * np.eye(n))
    D = grid.diff_matrix
    bc = np.vstack([D[0] + p.omega1 * np.eye(n)[0], D[-1] - p.omega2 * np.eye(n)[-1]])

    trial = smooth_basis(grid, constant=True)
    robin = np.vstack(
        [
            trial.slopes_left + p.omega1 * trial.values_left,
            trial.slopes_right - p.omega2 * trial.values_right,
        ]
    )
    F = trial.values @ null_space(robin)
    mean_row = grid.weights @ F / l
    norm2 = float(mean_row @ mean_row)
    if norm2 <= 1e-24:
        raise EigensolverFailure(f"Robin trial space has no mean direction for {p}")
    Z = F @ null_space(mean_row[None, :])
    lift = F @ mean_row / norm2

    form = form_matrix(p, grid)
    stiffness_z = _symmetrize(Z.T @ form @ Z)
    ntd_z = _symmetrize(Z.T @ N @ Z)
    logger.debug("Assembled operator n=%d r=%d for %s", n, Z.shape[1], p)
    return LinearizedOperator(
        params=p,
        grid=grid,
        N=N,
        S=S,
        bc=bc,
        form=form,
        basis=Z,
        lift=lift,
        stiffness_z=stiffness_z,
        ntd_z=ntd_z,
    )


# ---------------------------------------------------------------------------
# Eigenpairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Eigenpair:
    """One eigenpair of -A with a unit L2 eigenfunction."""

    lam: float
    """Eigenvalue; ``lambda`` is a keyword."""

    h: HeightField
    residual: float
    """Backward error of the generalized eigenproblem."""

    form_value: float
    """I*(h)."""

    dissipation: float
    """lam^2 <N h, h>, the bulk Dirichlet energy of the induced potential."""


def _eigenpair(op: LinearizedOperator, index: int) -> Eigenpair:
    dec = op.decomposition
    lam = float(dec.eigenvalues[index])
    v = dec.vectors[:, index]
    K, B = op.stiffness_z, op.ntd_z

    scale = (np.linalg.norm(K, 2) + abs(lam) * np.linalg.norm(B, 2)) * np.linalg.norm(v)
    residual = float(np.linalg.norm(-K @ v - lam * (B @ v)) / max(scale, 1e-300))

    values = dec.eigenfunctions[:, index]
    h = HeightField(op.grid, values)
    norm = h.norm()
    if values[np.argmax(np.abs(values))] < 0:
        norm = -norm
    h = h * (1.0 / norm)

    # nodal I* and the symbol-side N, not the pencil matrices
    form_value = quadratic_form(h, op.params).value
    sym = dtn_symbol(op.params, op.grid.K)
    dissipation = lam**2 * apply_ntd(h, sym).inner(h)
    defect = abs(lam * form_value + dissipation)
    if defect > ENERGY_RTOL * max(abs(lam * form_value), dissipation, 1e-300):
        raise EigensolverFailure(
            f"Energy identity fails for lambda={lam:.6e}: defect {defect:.3e}"
        )
    return Eigenpair(
        lam=lam,
        h=h,
        residual=residual,
        form_value=form_value,
        dissipation=dissipation,
    )


def leading_eigenvalues(p: ModelParams, grid: GridLike = None, count: int = 5) -> list[Eigenpair]:
    """
    The ``count`` largest eigenpairs of -A, sorted descending.

    Each pair is checked against the energy identity
    lambda I*(h) + lambda^2 <N h, h> = 0.

    Raises:
        EigensolverFailure: On solver failure or an energy-identity defect above 1e-6.
    """
    validate_positive_int(count, "count")
    op = assemble_operator(p, grid)
    if count > op.size:
        logger.warning("Requested %d eigenpairs, the trial space holds %d", count, op.size)
        count = op.size
    pairs = [_eigenpair(op, i) for i in range(count)]
    logger.info("lambda_1=%.6e for %s", pairs[0].lam, p)
    return pairs


def leading_lambda(p: ModelParams, grid: GridLike = None) -> float:
    """Largest eigenvalue of -A on mean-free fields."""
    return float(assemble_operator(p, grid).decomposition.eigenvalues[0])


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityVerdict:
    params: ModelParams
    verdict: Verdict
    leading_lambda: float
    kernel_dim: int
    semisimple: bool
    threshold_margin: float
    """mu_min of I* on mean-free fields."""

    expected_kernel_dim: int
    """Dimension of the closed-form kernel."""

    kernel_match: bool
    """Whether the numerical equilibrium direction lies in the closed-form kernel."""

    max_imag: float
    """Largest |Im lambda| / max(1, |Re lambda|) of the collocation pencil."""


def collocation_imaginary_part(op: LinearizedOperator) -> float:
    """
    Realness check from the nodal strong form instead of the symmetric pencil.

    Solves Z^T M S Z v = lambda N_Z v with a nonsymmetric solver and returns
    the largest |Im lambda| / max(1, |Re lambda|) over the better resolved
    half of the spectrum.
    """
    G = op.basis.T @ op.grid.mass @ op.S @ op.basis
    try:
        raw = scipy.linalg.eigvals(G, op.ntd_z)
    except (LinAlgError, ValueError) as e:
        raise EigensolverFailure(f"Collocation eigensolve failed for {op.params}: {e}") from e
    raw = raw[np.argsort(-raw.real)][: max(1, (raw.size + 1) // 2)]
    return float(np.max(np.abs(raw.imag) / np.maximum(1.0, np.abs(raw.real))))


def zero_group_matrix(op: LinearizedOperator, tol: float) -> np.ndarray:
    """
    The operator restricted to the modes nearest zero plus the mean direction.

    In modal coordinates y and mean alpha the flow reads
    y' = diag(lambda) y + c alpha, alpha' = 0; the matrix keeps the modes with
    |lambda| <= tol, and at least two modes.
    """
    lam = op.decomposition.eigenvalues
    c = op.lift_coupling
    near = int(np.sum(np.abs(lam) <= tol))
    q = min(lam.size, max(2, near))
    idx = np.argsort(np.abs(lam))[:q]
    T = np.zeros((q + 1, q + 1))
    T[:q, :q] = np.diag(lam[idx])
    T[:q, q] = c[idx]
    return T


def kernel_vector(op: LinearizedOperator) -> HeightField:
    """Numerical equilibrium direction e + Z x with mean 1, where I*(e + Z x, Z) = 0."""
    rhs = -(op.basis.T @ (op.form @ op.lift))
    x, *_ = scipy.linalg.lstsq(op.stiffness_z, rhs)
    return HeightField(op.grid, op.lift + op.basis @ x)


def _kernel_residual(k: HeightField, span: np.ndarray, weights: np.ndarray) -> float:
    root = np.sqrt(weights)
    a, *_ = scipy.linalg.lstsq(root[:, None] * span, root * k.values)
    miss = root * (span @ a - k.values)
    return float(np.linalg.norm(miss) / max(np.linalg.norm(root * k.values), 1e-300))


def classify(p: ModelParams, grid: GridLike = None) -> StabilityVerdict:
    """
    Classify the equilibrium with tolerance tol = 1e-7 |lambda_2|.

    Unstable when lambda_1 > tol. Normally stable when lambda_1 < -tol, the
    zero group is semisimple, and its dimension and direction match the
    closed-form kernel. Degenerate otherwise.
    """
    grid = resolve_grid(grid, p.l)
    op = assemble_operator(p, grid)
    dec = op.decomposition
    lam = dec.eigenvalues
    lam1 = float(lam[0])
    tol = ZERO_GROUP_RTOL * abs(float(lam[1] if lam.size > 1 else lam[0]))

    T = zero_group_matrix(op, tol)
    kernel_dim = numerical_nullity(T, ZERO_GROUP_RTOL)
    semisimple = check_semisimple(T, ZERO_GROUP_RTOL)

    closed_form = kernel_description(p, grid)
    span = np.column_stack([b.values for b in closed_form.basis])
    match_residual = _kernel_residual(kernel_vector(op), span, grid.weights)
    kernel_match = match_residual <= KERNEL_MATCH_RTOL

    max_imag = collocation_imaginary_part(op)

    mu_min, _ = min_form_meanfree(p, grid)

    if lam1 > tol:
        verdict = Verdict.UNSTABLE
    elif (
        lam1 < -tol
        and semisimple
        and kernel_dim == closed_form.dimension
        and kernel_match
    ):
        verdict = Verdict.NORMALLY_STABLE
    else:
        verdict = Verdict.DEGENERATE

    logger.info(
        "%s: %s lambda_1=%.6e kernel_dim=%d semisimple=%s mu_min=%.6e",
        p,
        verdict.value,
        lam1,
        kernel_dim,
        semisimple,
        mu_min,
    )
    logger.debug("kernel match residual %.3e, max_imag %.3e", match_residual, max_imag)
    return StabilityVerdict(
        params=p,
        verdict=verdict,
        leading_lambda=lam1,
        kernel_dim=kernel_dim,
        semisimple=semisimple,
        threshold_margin=mu_min,
        expected_kernel_dim=closed_form.dimension,
        kernel_match=kernel_match,
        max_imag=max_imag,
    )


# ---------------------------------------------------------------------------
# Thresholds
# ---------------------------------------------------------------------------


def with_parameter(p: ModelParams, vary: str, value: float) -> ModelParams:
    """Copy of p with one sweep parameter set; ``omega_plus`` sets both walls."""
    if vary in ("omega_plus", "omega"):
        return p.replace(omega1=value, omega2=value)
    if vary in PARAM_KEYS:
        return p.replace(**{vary: value})
    raise ValueError(f"Unknown parameter '{vary}'")


def _length_free(grid: GridLike) -> GridLike:
    if isinstance(grid, Grid1D):
        return GridSpec(n=grid.n, basis=grid.basis, K=grid.K)
    return grid


def find_threshold(
    p: ModelParams,
    vary: str,
    bracket: Optional[tuple[float, float]] = None,
    tol: float = 1e-6,
    grid: GridLike = None,
) -> float:
    """
    Bisect on the sign of lambda_1 to locate a stability threshold.

    Args:
        p: Base parameters.
        vary: ``omega_plus``, ``l`` or ``kappa``.
        bracket: (lo, hi); defaults per parameter.
        tol: Final bracket width.
        grid: Grid or grid recipe; concrete grids become recipes when l varies.

    Returns:
        The midpoint of the final bracket.

    Raises:
        NoSignChange: If lambda_1 has the same sign at both ends.
    """
    if vary not in VARY_CHOICES:
        raise ValueError(f"vary must be one of {VARY_CHOICES}, got '{vary}'")
    validate_positive_number(tol, "tol")
    lo, hi = bracket or DEFAULT_BRACKETS[vary]
    if not lo < hi:
        raise ValueError(f"Bracket must satisfy lo < hi, got ({lo}, {hi})")
    if vary == "l":
        grid = _length_free(grid)

    def unstable(value: float) -> bool:
        return leading_lambda(with_parameter(p, vary, value), grid) > 0.0

    lo_unstable, hi_unstable = unstable(lo), unstable(hi)
    if lo_unstable == hi_unstable:
        state = "unstable" if lo_unstable else "stable"
        raise NoSignChange(f"{vary} bracket ({lo}, {hi}) is {state} at both ends")

    steps = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if unstable(mid) == lo_unstable:
            lo = mid
        else:
            hi = mid
        steps += 1
    threshold = 0.5 * (lo + hi)
    logger.info("Threshold %s=%.9f after %d bisection steps", vary, threshold, steps)
    return threshold


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def param_grid(base: ModelParams, vary: str, values: Iterable[float]) -> list[dict[str, float]]:
    """Parameter rows varying one key of ``base``; ``omega_plus`` varies both walls."""
    if vary not in (*PARAM_KEYS, "omega_plus", "omega"):
        raise ValueError(f"Cannot sweep over '{vary}'")
    rows = []
    for value in values:
        row = base.to_mapping()
        if vary in ("omega_plus", "omega"):
            row["omega1"] = row["omega2"] = float(value)
        else:
            row[vary] = float(value)
        rows.append(row)
    return rows


@dataclass(frozen=True)
class SweepRow:
    l: float
    H: float
    omega1: float
    omega2: float
    kappa: float
    verdict: str
    lambda1: Optional[float] = None
    mu_min: Optional[float] = None
    kernel_dim: Optional[int] = None
    semisimple: Optional[bool] = None
    max_imag: Optional[float] = None
    message: str = ""


@dataclass(frozen=True)
class SweepTable:
    """Sweep results in input order."""

    rows: tuple[SweepRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def verdicts(self) -> list[str]:
        return [row.verdict for row in self.rows]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            [{col: getattr(row, col) for col in SWEEP_COLUMNS} for row in self.rows],
            columns=SWEEP_COLUMNS,
        )
        frame["kernel_dim"] = frame["kernel_dim"].astype("Int64")
        frame["semisimple"] = frame["semisimple"].astype("boolean")
        return frame

    def to_csv(self, path: Union[str, Path, None] = None) -> Optional[str]:
        """Write the table with the fixed header; returns the text when no path is given."""
        return self.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)


def _raw_value(row: Mapping[str, object], key: str, default: float) -> float:
    raw = row.get(key, row.get("omega", default) if key.startswith("omega") else default)
    try:
        return float(raw)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        return math.nan


def _sweep_row(row: Mapping[str, object], grid: GridLike) -> SweepRow:
    defaults = ModelParams().to_mapping()
    try:
        p = ModelParams.from_mapping(row)
        v = classify(p, grid)
    except (AnalyzerError, ValueError) as e:
        logger.warning("Sweep row %s failed: %s: %s", dict(row), type(e).__name__, e)
        return SweepRow(
            **{key: _raw_value(row, key, defaults[key]) for key in PARAM_KEYS},
            verdict="Error",
            message=f"{type(e).__name__}: {e}",
        )
    return SweepRow(
        **p.to_mapping(),
        verdict=v.verdict.value,
        lambda1=v.leading_lambda,
        mu_min=v.threshold_margin,
        kernel_dim=v.kernel_dim,
        semisimple=v.semisimple,
        max_imag=v.max_imag,
    )


def sweep(
    param_grid: Sequence[Mapping[str, object]],
    grid: GridLike = None,
    workers: int = 1,
) -> SweepTable:
    """
    Classify every parameter row.

    Rows that fail are recorded with verdict ``Error`` instead of raising.
    With ``workers`` > 1 rows run in a thread pool; the output keeps input order.
    """
    validate_positive_int(workers, "workers")
    grid = _length_free(grid)
    logger.info("Sweeping %d rows with %d worker(s)", len(param_grid), workers)
    if workers == 1:
        rows = [_sweep_row(row, grid) for row in param_grid]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda row: _sweep_row(row, grid), param_grid))
    return SweepTable(rows=tuple(rows))
