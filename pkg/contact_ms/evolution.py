"""
Exact modal propagation of the linearized flow h_t + A h = 0.

An initial field h0 splits into its mean times the equilibrium direction,
which is invariant, and a mean-free part expanded in the N-orthonormal
eigenfunctions; each mode then evolves as exp(lambda t). The module also
fits decay rates and checks volume conservation and energy dissipation
along trajectories.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .forms import quadratic_form
from .model import AnalyzerError, GridLike, HeightField, ModelParams, resolve_grid
from .spectrum import ZERO_GROUP_RTOL, LinearizedOperator, assemble_operator, kernel_vector
from .utils import FLOAT_FORMAT, validate_positive_int, validate_positive_number

logger = logging.getLogger(__name__)

MAX_EXPONENT = 700.0
PROJECTION_RTOL = 1e-6
UNDERFLOW_RTOL = 1e-14
MIN_SAMPLES = 10
MIN_USABLE = 4

TRAJECTORY_COLUMNS = ["t", "norm_dev", "mean", "I_star"]


class DegenerateTrajectory(AnalyzerError):
    """Raised when a trajectory cannot be propagated or fitted."""

    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution of the linearized flow with per-sample diagnostics."""

    params: ModelParams
    times: np.ndarray
    states: tuple[HeightField, ...]
    equilibrium: HeightField
    """Limit of the zero group: mean times the equilibrium direction plus zero modes."""

    deviation_norms: np.ndarray
    """L2 norm of h(t) minus the equilibrium."""

    means: np.ndarray
    i_star: np.ndarray
    dissipation: np.ndarray
    """<N h_t, h_t>, the bulk Dirichlet energy at each sample."""

    def __len__(self) -> int:
        return int(self.times.size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.times,
                "norm_dev": self.deviation_norms,
                "mean": self.means,
                "I_star": self.i_star,
            },
            columns=TRAJECTORY_COLUMNS,
        )

    def to_csv(self, path: Union[str, Path, None] = None) -> Optional[str]:
        return self.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)


def _modal_split(op: LinearizedOperator, h0: HeightField) -> tuple[float, HeightField, np.ndarray]:
    """Mean alpha, equilibrium direction k, and N-coefficients a of h0 - alpha k."""
    dec = op.decomposition
    alpha = h0.mean()
    k = kernel_vector(op)
    w = h0.values - alpha * k.values
    a = dec.vectors.T @ (op.basis.T @ (op.N @ w))

    rebuilt = dec.eigenfunctions @ a
    loss = np.linalg.norm(w - rebuilt) / max(np.linalg.norm(h0.values), 1e-300)
    if loss > PROJECTION_RTOL:
        logger.warning(
            "Initial data leaves the trial space: relative projection loss %.3e", loss
        )
    return alpha, k, a


def evolve_linear(
    h0: HeightField,
    p: ModelParams,
    grid: GridLike = None,
    t_end: float = 1.0,
    n_steps: int = 100,
) -> Trajectory:
    """
    Propagate h0 exactly through the eigen-decomposition.

    Modes with |lambda| <= 1e-7 |lambda_2| are held fixed together with the
    mean direction; they make up the equilibrium. States are sampled at
    n_steps + 1 uniform times in [0, t_end].

    Raises:
        DegenerateTrajectory: If a growing mode would overflow, i.e. lambda t_end > 700.
        EigensolverFailure: Propagated from the assembly.
    """
    validate_positive_number(t_end, "t_end")
    validate_positive_int(n_steps, "n_steps")
    grid = resolve_grid(grid, p.l)
    if h0.grid is not grid:
        h0 = HeightField(grid, h0.at(grid.nodes))

    op = assemble_operator(p, grid)
    dec = op.decomposition
    lam = dec.eigenvalues
    tol = ZERO_GROUP_RTOL * abs(float(lam[1] if lam.size > 1 else lam[0]))
    frozen = np.abs(lam) <= tol
    moving = ~frozen

    alpha, k, a = _modal_split(op, h0)
    if moving.any() and float(lam[moving].max()) * t_end > MAX_EXPONENT:
        raise DegenerateTrajectory(
            f"lambda_1 * t_end = {lam[moving].max() * t_end:.1f} overflows; shorten t_end"
        )

    equilibrium_values = alpha * k.values + dec.eigenfunctions[:, frozen] @ a[frozen]
    equilibrium = HeightField(grid, equilibrium_values)

    times = np.linspace(0.0, t_end, n_steps + 1)
    growth = np.exp(np.outer(times, lam[moving]))
    deviations = (growth * a[moving]) @ dec.eigenfunctions[:, moving].T
    dissipation = (growth**2 * (lam[moving] * a[moving]) ** 2).sum(axis=1)

    states = tuple(HeightField(grid, equilibrium_values + dev) for dev in deviations)
    deviation_norms = np.array(
        [np.sqrt(max(float(dev @ grid.mass @ dev), 0.0)) for dev in deviations]
    )
    means = np.array([h.mean() for h in states])
    i_star = np.array([quadratic_form(h, p).value for h in states])

    logger.info(
        "Evolved %d samples to t=%.4g: |h - h_inf| %.3e -> %.3e",
        times.size,
        t_end,
        deviation_norms[0],
        deviation_norms[-1],
    )
    return Trajectory(
        params=p,
        times=times,
        states=states,
        equilibrium=equilibrium,
        deviation_norms=deviation_norms,
        means=means,
        i_star=i_star,
        dissipation=dissipation,
    )


def fit_decay_rate(traj: Trajectory) -> float:
    """
    Least-squares slope of log |h(t) - h_inf| over the last half of the usable samples.

    Samples count as usable while the deviation stays above 1e-14 times its
    initial value.

    Raises:
        ValueError: If the trajectory has fewer than 10 samples.
        DegenerateTrajectory: If fewer than 4 samples are usable.
    """
    if len(traj) < MIN_SAMPLES:
        raise ValueError(f"Need at least {MIN_SAMPLES} samples, got {len(traj)}")
    norms = traj.deviation_norms
    if not norms[0] > 0.0:
        raise DegenerateTrajectory("Initial data coincides with its equilibrium")

    usable = norms > UNDERFLOW_RTOL * norms[0]
    cut = int(np.argmin(usable)) if not usable.all() else norms.size
    if cut < MIN_USABLE:
        raise DegenerateTrajectory(
            f"Deviation underflows after {cut} samples; shorten t_end or refine sampling"
        )
    start = cut // 2
    slope, _ = np.polyfit(traj.times[start:cut], np.log(norms[start:cut]), 1)
    logger.debug("Fitted rate %.6e on samples %d..%d", slope, start, cut - 1)
    return float(slope)


@dataclass(frozen=True)
class InvariantReport:
    mean_drift: float
    """max |mean(h(t)) - mean(h0)|."""

    i_star: tuple[float, ...]
    monotone: bool
    """Whether I* never increases by more than tol * max(1, |I*|) between samples."""

    max_increase: float


def monitor_invariants(traj: Trajectory, tol: float = 1e-9) -> InvariantReport:
    """Linearized volume conservation and energy monotonicity along a trajectory."""
    mean_drift = float(np.max(np.abs(traj.means - traj.means[0])))
    steps = np.diff(traj.i_star)
    allowance = tol * np.maximum(1.0, np.abs(traj.i_star[:-1]))
    max_increase = float(max(steps.max(initial=0.0), 0.0))
    monotone = bool(np.all(steps <= allowance))
    if not monotone:
        logger.warning("I* increased by up to %.3e along the trajectory", max_increase)
    return InvariantReport(
        mean_drift=mean_drift,
        i_star=tuple(float(v) for v in traj.i_star),
        monotone=monotone,
        max_increase=max_increase,
    )
