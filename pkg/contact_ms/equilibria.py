"""
Nonlinear equilibria between two walls.

An equilibrium interface has constant curvature and meets both walls at a
right angle. For walls that are lines or circles the equilibria are the
circles orthogonal to both walls, a one-parameter pencil indexed here by
the mean height m. This module builds that analytic family, evaluates the
discrete residual

    F(m, u) = (curvature - its arclength mean, angle_left - pi/2, angle_right - pi/2)

of a graph m + u over the reference chord, and traces the zero set of F by
damped Gauss-Newton continuation in m.

All geometry is handled in a channel frame: the origin sits at the left
wall's center (or on the left line), the x axis points to the right wall,
and line walls are perpendicular to it.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.integrate import quad
from scipy.linalg import null_space, svdvals
from scipy.optimize import brentq

from .forms import min_form_meanfree
from .model import AnalyzerError, Grid1D, HeightField, ModelParams
from .utils import FLOAT_FORMAT, validate_positive_number

logger = logging.getLogger(__name__)

WALL_LINE = "line"
WALL_CIRCLE = "circle"

WALL_LAYOUTS = ("lines", "circles", "line-circle", "circle-line")

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
NEWTON_MAX_HALVINGS = 10
FD_STEP = 1e-6
KAPPA_MARGIN = 1e-9
DEFAULT_EQ_NODES = 33


class NoAdmissibleArc(AnalyzerError):
    """Raised when no orthogonal arc between the walls has the requested mean height."""

    pass


class NotAGraph(AnalyzerError):
    """Raised when a height field does not describe a graph between the walls."""

    pass


class IStarNotPositive(AnalyzerError):
    """Raised when the stability form is not positive on mean-free fields."""

    pass


class NewtonDivergence(AnalyzerError):
    """Raised when Gauss-Newton does not reach the residual tolerance."""

    pass


# ---------------------------------------------------------------------------
# Walls and frames
# ---------------------------------------------------------------------------


def _vec(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape != (2,) or not np.all(np.isfinite(v)):
        raise ValueError(f"Expected a finite 2D point, got {values!r}")
    return v


@dataclass(frozen=True, eq=False)
class Wall:
    """A container wall near a contact point: a line or a circle."""

    kind: str
    point: np.ndarray
    """Center for circles; a point on the line for lines."""

    radius: float = math.inf
    direction: Optional[np.ndarray] = None
    """Unit direction for lines."""

    @classmethod
    def line(cls, point: Sequence[float], direction: Sequence[float]) -> Wall:
        d = _vec(direction)
        norm = float(np.linalg.norm(d))
        if norm == 0.0:
            raise ValueError("Line direction must be nonzero")
        return cls(kind=WALL_LINE, point=_vec(point), direction=d / norm)

    @classmethod
    def circle(cls, center: Sequence[float], radius: float) -> Wall:
        validate_positive_number(radius, "radius")
        return cls(kind=WALL_CIRCLE, point=_vec(center), radius=float(radius))

    @property
    def is_circle(self) -> bool:
        return self.kind == WALL_CIRCLE

    @property
    def omega(self) -> float:
        """Wall parameter: -1/r for a circle, 0 for a line."""
        return -1.0 / self.radius if self.is_circle else 0.0


def _foot(line: Wall, point: np.ndarray) -> np.ndarray:
    d = line.direction
    return line.point + float((point - line.point) @ d) * d


@dataclass(frozen=True, eq=False)
class ChannelGeometry:
    """Two walls with the channel frame and the orthogonal-circle pencil data."""

    left: Wall
    right: Wall
    origin: np.ndarray = field(init=False)
    ex: np.ndarray = field(init=False)
    separation: float = field(init=False)
    """Distance D between the wall anchors along the frame axis."""

    x_rad: float = field(init=False)
    """Frame abscissa of the axis holding every orthogonal circle's center."""

    power: float = field(init=False)
    """Power of (x_rad, 0) with respect to the circular walls; R^2 = y_c^2 + power."""

    def __post_init__(self):
        left, right = self.left, self.right
        if left.is_circle and right.is_circle:
            origin, target = left.point, right.point
        elif right.is_circle:
            origin, target = _foot(left, right.point), right.point
        elif left.is_circle:
            origin, target = left.point, _foot(right, left.point)
        else:
            cross = left.direction[0] * right.direction[1] - left.direction[1] * right.direction[0]
            if abs(cross) > 1e-12:
                raise ValueError("Two line walls must be parallel")
            origin, target = left.point, _foot(right, left.point)

        D = float(np.linalg.norm(target - origin))
        if D == 0.0:
            raise ValueError("Walls must be distinct")
        ex = (target - origin) / D

        r1, r2 = left.radius, right.radius
        if left.is_circle and right.is_circle:
            x_rad = (D**2 + r1**2 - r2**2) / (2.0 * D)
            power = x_rad**2 - r1**2
        elif right.is_circle:
            x_rad, power = 0.0, D**2 - r2**2
        elif left.is_circle:
            x_rad, power = D, D**2 - r1**2
        else:
            x_rad, power = 0.5 * D, math.inf

        for name, value in (("origin", origin), ("ex", ex)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "separation", D)
        object.__setattr__(self, "x_rad", float(x_rad))
        object.__setattr__(self, "power", float(power))
        if self.chord <= 0.0 or power <= 0.0:
            raise ValueError("Walls overlap; no channel between them")

    @classmethod
    def standard(
        cls,
        layout: str = "circles",
        radius1: float = 1.0,
        radius2: float = 1.0,
        separation: float = 4.0,
    ) -> ChannelGeometry:
        """Walls anchored at (-separation/2, 0) and (separation/2, 0); lines are vertical."""
        if layout not in WALL_LAYOUTS:
            raise ValueError(f"Unknown wall layout '{layout}', expected one of {WALL_LAYOUTS}")
        validate_positive_number(separation, "separation")
        half = 0.5 * separation
        vertical = (0.0, 1.0)
        kinds = {"lines": ("line", "line"), "circles": ("circle", "circle")}.get(
            layout, tuple(layout.split("-"))
        )
        left = (
            Wall.circle((-half, 0.0), radius1)
            if kinds[0] == WALL_CIRCLE
            else Wall.line((-half, 0.0), vertical)
        )
        right = (
            Wall.circle((half, 0.0), radius2)
            if kinds[1] == WALL_CIRCLE
            else Wall.line((half, 0.0), vertical)
        )
        return cls(left, right)

    @property
    def ey(self) -> np.ndarray:
        return np.array([-self.ex[1], self.ex[0]])

    @property
    def is_parallel_lines(self) -> bool:
        return not (self.left.is_circle or self.right.is_circle)

    @property
    def chord(self) -> float:
        """Length of the reference chord y = 0 between the walls."""
        r1 = self.left.radius if self.left.is_circle else 0.0
        r2 = self.right.radius if self.right.is_circle else 0.0
        return self.separation - r1 - r2

    @property
    def kappa_max(self) -> float:
        if self.is_parallel_lines:
            return 0.0
        return (1.0 - KAPPA_MARGIN) / math.sqrt(self.power)

    def to_world(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Frame coordinates to world points, shape (..., 2)."""
        return self.origin + np.multiply.outer(x, self.ex) + np.multiply.outer(y, self.ey)

    def left_foot(self, y: float) -> float:
        """Frame abscissa where height y meets the left wall on the channel side."""
        if not self.left.is_circle:
            return 0.0
        r = self.left.radius
        if abs(y) >= r:
            raise NotAGraph(f"Height {y:.6g} misses the left wall of radius {r}")
        return math.sqrt(r**2 - y**2)

    def right_foot(self, y: float) -> float:
        if not self.right.is_circle:
            return self.separation
        r = self.right.radius
        if abs(y) >= r:
            raise NotAGraph(f"Height {y:.6g} misses the right wall of radius {r}")
        return self.separation - math.sqrt(r**2 - y**2)

    def wall_tangent(self, side: str, x: float, y: float) -> np.ndarray:
        """Unit wall tangent at a contact, oriented so both point to -y at the chord."""
        if side == "left":
            if not self.left.is_circle:
                return np.array([0.0, -1.0])
            n = np.array([x, y]) / self.left.radius
            return np.array([n[1], -n[0]])
        if not self.right.is_circle:
            return np.array([0.0, -1.0])
        n = np.array([x - self.separation, y]) / self.right.radius
        return np.array([-n[1], n[0]])


ChannelLike = Union[ChannelGeometry, tuple[Wall, Wall]]


def as_channel(walls: ChannelLike) -> ChannelGeometry:
    if isinstance(walls, ChannelGeometry):
        return walls
    left, right = walls
    return ChannelGeometry(left, right)


def walls_params(walls: ChannelLike, H: float = 1.0) -> ModelParams:
    """Linearization parameters of the straight reference interface between the walls."""
    channel = as_channel(walls)
    return ModelParams(
        l=channel.chord,
        H=H,
        omega1=channel.left.omega,
        omega2=channel.right.omega,
        kappa=0.0,
    )


# ---------------------------------------------------------------------------
# Analytic family
# ---------------------------------------------------------------------------


def _arc_height(channel: ChannelGeometry, kappa: float, x: np.ndarray) -> np.ndarray:
    """Graph of the orthogonal circle with curvature kappa, on the branch through the chord."""
    x = np.asarray(x, dtype=float)
    if kappa == 0.0:
        return np.zeros_like(x)
    d = x - channel.x_rad
    if np.any(kappa**2 * d**2 > 1.0):
        raise NotAGraph(f"Arc with kappa={kappa:.6g} does not span the channel as a graph")
    return (
        kappa
        * (d**2 - channel.power)
        / (np.sqrt(1.0 - kappa**2 * channel.power) + np.sqrt(1.0 - kappa**2 * d**2))
    )


def _circle_contact(
    center: np.ndarray, R: float, wall_center: np.ndarray, r: float, on_branch, pick
) -> np.ndarray:
    """Intersection of two orthogonal circles on the graph branch, chosen by ``pick``."""
    offset = center - wall_center
    dist = float(np.linalg.norm(offset))
    u = offset / dist
    v = np.array([-u[1], u[0]])
    a, h = r**2 / dist, r * R / dist
    candidates = [wall_center + a * u + h * v, wall_center + a * u - h * v]
    admissible = [c for c in candidates if on_branch(c)] or candidates
    return pick(admissible, key=lambda c: c[0])


@dataclass(frozen=True, eq=False)
class Arc:
    """A member of the orthogonal pencil, in channel-frame coordinates."""

    channel: ChannelGeometry
    kappa: float
    """Signed graph curvature; positive when the center lies above the chord."""

    m: float
    """Mean height over the contact interval."""

    left_contact: np.ndarray
    right_contact: np.ndarray
    center: Optional[np.ndarray] = None
    """Frame center; None for straight segments."""

    @property
    def radius(self) -> float:
        return math.inf if self.kappa == 0.0 else 1.0 / abs(self.kappa)

    def height(self, x: np.ndarray) -> np.ndarray:
        if self.channel.is_parallel_lines:
            return np.full_like(np.asarray(x, dtype=float), self.m)
        return _arc_height(self.channel, self.kappa, x)

    def endpoints_world(self) -> np.ndarray:
        pts = np.vstack([self.left_contact, self.right_contact])
        return self.channel.to_world(pts[:, 0], pts[:, 1])

    def orthogonality_residuals(self) -> tuple[float, float]:
        """Relative |d^2 - r^2 - R^2| at each circular wall; 0 where the test does not apply."""
        if self.center is None:
            return (0.0, 0.0)
        out = []
        R = self.radius
        for wall_center, wall in (
            (np.zeros(2), self.channel.left),
            (np.array([self.channel.separation, 0.0]), self.channel.right),
        ):
            if not wall.is_circle:
                # the center must lie on the line
                line_x = 0.0 if wall is self.channel.left else self.channel.separation
                out.append(abs(self.center[0] - line_x) / max(R, 1.0))
                continue
            d2 = float(np.sum((self.center - wall_center) ** 2))
            out.append(abs(d2 - wall.radius**2 - R**2) / max(d2, 1.0))
        return (out[0], out[1])

    def chart_heights(self, grid: Grid1D) -> HeightField:
        """Heights of this arc sampled at the chart abscissae of a reference-chord grid."""
        xL, xR = self.left_contact[0], self.right_contact[0]
        x = xL + grid.nodes * (xR - xL) / grid.length
        return HeightField(grid, self.height(x))


def _contacts(
    channel: ChannelGeometry, kappa: float
) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    D = channel.separation
    if kappa == 0.0:
        xL = channel.left.radius if channel.left.is_circle else 0.0
        xR = D - channel.right.radius if channel.right.is_circle else D
        return np.array([xL, 0.0]), np.array([xR, 0.0]), None

    R = 1.0 / abs(kappa)
    center = np.array(
        [channel.x_rad, math.copysign(math.sqrt(1.0 - kappa**2 * channel.power), kappa) * R]
    )

    def on_branch(c: np.ndarray) -> bool:
        return (center[1] - c[1]) * kappa >= 0.0

    if channel.left.is_circle:
        left = _circle_contact(center, R, np.zeros(2), channel.left.radius, on_branch, max)
    else:
        left = np.array([0.0, float(_arc_height(channel, kappa, np.array(0.0)))])
    if channel.right.is_circle:
        right = _circle_contact(
            center, R, np.array([D, 0.0]), channel.right.radius, on_branch, min
        )
    else:
        right = np.array([D, float(_arc_height(channel, kappa, np.array(D)))])
    return left, right, center


def _mean_height(channel: ChannelGeometry, kappa: float) -> float:
    left, right, _ = _contacts(channel, kappa)
    value, _ = quad(
        lambda x: float(_arc_height(channel, kappa, np.array(x))),
        left[0],
        right[0],
        epsabs=1e-15,
        epsrel=1e-13,
        limit=200,
    )
    return value / (right[0] - left[0])


def admissible_window(walls: ChannelLike) -> tuple[float, float]:
    """Range of mean heights reachable by the pencil."""
    channel = as_channel(walls)
    if channel.is_parallel_lines:
        return (-math.inf, math.inf)
    k = channel.kappa_max
    ends = sorted((_mean_height(channel, -k), _mean_height(channel, k)))
    return (ends[0], ends[1])


def orthogonal_arc(wall_left: Wall, wall_right: Wall, m: float) -> Arc:
    """
    The pencil member with mean height m.

    Raises:
        NoAdmissibleArc: If m lies outside the admissible window.
    """
    channel = ChannelGeometry(wall_left, wall_right)
    return _orthogonal_arc(channel, m)


def _orthogonal_arc(channel: ChannelGeometry, m: float) -> Arc:
    if channel.is_parallel_lines:
        return Arc(
            channel=channel,
            kappa=0.0,
            m=float(m),
            left_contact=np.array([0.0, m]),
            right_contact=np.array([channel.separation, m]),
        )

    k = channel.kappa_max
    lo, hi = _mean_height(channel, -k) - m, _mean_height(channel, k) - m
    if lo * hi > 0.0:
        raise NoAdmissibleArc(
            f"m={m:.6g} outside the admissible window "
            f"[{min(lo, hi) + m:.6g}, {max(lo, hi) + m:.6g}]"
        )
    if m == 0.0:
        kappa = 0.0
    else:
        kappa = brentq(
            lambda kap: _mean_height(channel, kap) - m, -k, k, xtol=1e-15, rtol=1e-14
        )
    left, right, center = _contacts(channel, kappa)
    arc = Arc(
        channel=channel,
        kappa=float(kappa),
        m=_mean_height(channel, kappa),
        left_contact=left,
        right_contact=right,
        center=center,
    )
    logger.debug("Orthogonal arc m=%.6g kappa=%.12e", m, kappa)
    return arc


# ---------------------------------------------------------------------------
# Residual
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EquilibriumResidual:
    r1: HeightField
    """Curvature minus its arclength mean."""

    a_plus: float
    """Angle deviation from pi/2 at the left wall."""

    a_minus: float
    """Angle deviation from pi/2 at the right wall."""

    def vector(self) -> np.ndarray:
        return np.concatenate([self.r1.values, [self.a_plus, self.a_minus]])

    def norm(self) -> float:
        return float(np.max(np.abs(self.vector())))


def _angle(channel: ChannelGeometry, side: str, x: float, y: float, slope: float) -> float:
    t = np.array([1.0, slope]) / math.hypot(1.0, slope)
    return math.asin(float(np.clip(t @ channel.wall_tangent(side, x, y), -1.0, 1.0)))


def equilibrium_residual(
    m: float, u: HeightField, walls: ChannelLike, grid: Optional[Grid1D] = None
) -> EquilibriumResidual:
    """
    Discrete F(m, u) for the graph m + u stretched between its wall feet.

    The chart abscissa is x(s) = x_L + s (x_R - x_L) / l, where the feet x_L,
    x_R follow the end heights along the walls.

    Raises:
        NotAGraph: If the feet cross or the slopes blow up.
    """
    channel = as_channel(walls)
    grid = u.grid if grid is None else grid
    Y = m + u.values
    xL, xR = channel.left_foot(Y[0]), channel.right_foot(Y[-1])
    stretch = (xR - xL) / grid.length
    if not stretch > 0.0:
        raise NotAGraph(f"Wall feet cross: x_L={xL:.6g}, x_R={xR:.6g}")

    # m is constant; differentiating u alone keeps roundoff off the curvature
    slope = (grid.diff_matrix @ u.values) / stretch
    second = (grid.second_diff_matrix @ u.values) / stretch**2
    if not np.all(np.isfinite(slope)) or np.max(np.abs(slope)) > 1e8:
        raise NotAGraph("Graph slope is unbounded")

    arclength = np.sqrt(1.0 + slope**2)
    curvature = second / arclength**3
    ds = grid.weights * stretch * arclength
    r1 = curvature - float(ds @ curvature) / float(ds.sum())

    return EquilibriumResidual(
        r1=HeightField(grid, r1),
        a_plus=_angle(channel, "left", xL, Y[0], slope[0]),
        a_minus=_angle(channel, "right", xR, Y[-1], slope[-1]),
    )


# ---------------------------------------------------------------------------
# Continuation
# ---------------------------------------------------------------------------


def _fd_jacobian(func: Callable[[np.ndarray], np.ndarray], beta: np.ndarray) -> np.ndarray:
    step = FD_STEP * max(1.0, float(np.max(np.abs(beta), initial=0.0)))
    columns = []
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = step
        columns.append((func(beta + e) - func(beta - e)) / (2.0 * step))
    return np.column_stack(columns)


def _gauss_newton(
    func: Callable[[np.ndarray], np.ndarray], beta: np.ndarray, m: float
) -> tuple[np.ndarray, float]:
    F = func(beta)
    norm = float(np.max(np.abs(F)))
    for iteration in range(NEWTON_MAX_ITER):
        if norm <= NEWTON_TOL:
            logger.debug("m=%.6g converged in %d iterations, residual %.3e", m, iteration, norm)
            return beta, norm
        J = _fd_jacobian(func, beta)
        step, *_ = scipy.linalg.lstsq(J, -F)
        for _ in range(NEWTON_MAX_HALVINGS + 1):
            try:
                trial = beta + step
                F_trial = func(trial)
                trial_norm = float(np.max(np.abs(F_trial)))
            except NotAGraph:
                trial_norm = math.inf
            if trial_norm < norm:
                break
            step = 0.5 * step
        else:
            raise NewtonDivergence(
                f"No decrease from residual {norm:.3e} at m={m:.6g} after damping"
            )
        beta, F, norm = trial, F_trial, trial_norm
    if norm <= NEWTON_TOL:
        return beta, norm
    raise NewtonDivergence(
        f"Residual {norm:.3e} after {NEWTON_MAX_ITER} iterations at m={m:.6g}"
    )


@dataclass(frozen=True, eq=False)
class Manifold:
    """Traced equilibria (m, u(m)) on one grid."""

    channel: ChannelGeometry
    grid: Grid1D
    m: np.ndarray
    u: np.ndarray
    """Node values, one row per m."""

    residuals: np.ndarray

    def __len__(self) -> int:
        return int(self.m.size)

    def points(self) -> list[tuple[float, HeightField]]:
        return [(float(m), HeightField(self.grid, u)) for m, u in zip(self.m, self.u)]

    def to_frame(self) -> pd.DataFrame:
        columns = ["m"] + [f"u_node_{i}" for i in range(self.grid.n)] + ["residual"]
        data = np.column_stack([self.m, self.u.reshape(len(self), self.grid.n), self.residuals])
        return pd.DataFrame(data, columns=columns)

    def to_csv(self, path: Union[str, Path, None] = None) -> Optional[str]:
        return self.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)


def equilibrium_grid(walls: ChannelLike, n: int = DEFAULT_EQ_NODES) -> Grid1D:
    return Grid1D.chebyshev(as_channel(walls).chord, n)


def newton_trace_manifold(
    walls: ChannelLike,
    m_values: Iterable[float],
    grid: Optional[Grid1D] = None,
    H: float = 1.0,
) -> Manifold:
    """
    Trace u(m) by Gauss-Newton continuation from u = 0.

    Each solve starts from the previous solution. Rows after the first
    failure are dropped with a warning.

    Raises:
        IStarNotPositive: If I* is not positive on mean-free fields for the walls.
        NewtonDivergence: If the first m does not converge.
    """
    channel = as_channel(walls)
    grid = equilibrium_grid(channel) if grid is None else grid
    if abs(grid.length - channel.chord) > 1e-12 * channel.chord:
        raise ValueError(f"Grid length {grid.length} differs from the chord {channel.chord}")

    p = walls_params(channel, H)
    mu_min, _ = min_form_meanfree(p, grid)
    if not mu_min > 0.0:
        raise IStarNotPositive(f"mu_min={mu_min:.6e} <= 0 for {p}")

    # mean-free coordinates for u
    Zu = null_space(grid.weights[None, :])
    beta = np.zeros(Zu.shape[1])

    ms, us, residuals = [], [], []
    for m in m_values:
        m = float(m)

        def residual(b: np.ndarray, m: float = m) -> np.ndarray:
            return equilibrium_residual(m, HeightField(grid, Zu @ b), channel, grid).vector()

        try:
            beta, norm = _gauss_newton(residual, beta, m)
        except (NewtonDivergence, NotAGraph) as e:
            if not ms:
                raise NewtonDivergence(f"Continuation failed at its first point: {e}") from e
            logger.warning("Continuation stopped at m=%.6g: %s", m, e)
            break
        ms.append(m)
        us.append(Zu @ beta)
        residuals.append(norm)

    logger.info("Traced %d equilibria on %d nodes", len(ms), grid.n)
    return Manifold(
        channel=channel,
        grid=grid,
        m=np.array(ms),
        u=np.array(us),
        residuals=np.array(residuals),
    )


def manifold_tangent_rank(
    points: Union[Manifold, Sequence[tuple[float, HeightField]]], rtol: float = 1e-2
) -> int:
    """Numerical rank of the finite-difference tangents (1, du/dm) along a traced manifold."""
    if isinstance(points, Manifold):
        points = points.points()
    if len(points) < 3:
        raise ValueError("Need at least three points for tangent directions")
    tangents = []
    for (m0, u0), (m1, u1) in zip(points[:-1], points[1:]):
        dm = m1 - m0
        tangents.append(np.concatenate([[1.0], (u1.values - u0.values) / dm]))
    sigma = svdvals(np.vstack(tangents))
    return int(np.sum(sigma > rtol * sigma[0]))


def linearization_condition(walls: ChannelLike, grid: Optional[Grid1D] = None) -> float:
    """Condition number of D_u F(0, 0) on mean-free u, by central differences."""
    channel = as_channel(walls)
    grid = equilibrium_grid(channel) if grid is None else grid
    Zu = null_space(grid.weights[None, :])

    def residual(b: np.ndarray) -> np.ndarray:
        return equilibrium_residual(0.0, HeightField(grid, Zu @ b), channel, grid).vector()

    sigma = svdvals(_fd_jacobian(residual, np.zeros(Zu.shape[1])))
    return float(sigma[0] / sigma[-1]) if sigma[-1] > 0.0 else math.inf
