"""
Unit tests for model.py module.
"""

import math

import numpy as np
import pytest

from contact_ms.model import (
    BASIS_FD,
    ConfigurationError,
    GeometricConstraintViolated,
    Grid1D,
    GridSpec,
    HeightField,
    ModelParams,
    NonPositiveLength,
    mean,
    resolve_grid,
    smooth_basis,
    validate_params,
)


class TestModelParams:
    """Tests for ModelParams validation and serialization."""

    def test_default_values(self):
        """Test default parameter values."""
        p = ModelParams()
        assert p.l == 1.0
        assert p.H == 1.0
        assert p.omega1 == p.omega2 == 0.0
        assert p.kappa == 0.0
        assert p.is_flat

    def test_flat_case_always_admissible(self):
        """Test that kappa = 0 passes for any wall parameters."""
        p = ModelParams(l=1.0, omega1=-50.0, omega2=50.0)
        assert validate_params(p) is p

    def test_arc_too_long(self):
        """Test that |kappa| l >= 2 pi is rejected."""
        with pytest.raises(GeometricConstraintViolated):
            ModelParams(l=1.0, kappa=7.0)
        with pytest.raises(GeometricConstraintViolated):
            ModelParams(l=1.0, kappa=-2.0 * math.pi)

    def test_arc_just_below_limit(self):
        """Test a length just below the closing limit."""
        p = ModelParams(l=2.0 * math.pi - 1e-6, kappa=-1.0)
        assert p.kappa == -1.0

    def test_non_positive_lengths(self):
        """Test that l <= 0 and H <= 0 are rejected."""
        with pytest.raises(NonPositiveLength):
            ModelParams(l=0.0)
        with pytest.raises(NonPositiveLength):
            ModelParams(l=-1.0)
        with pytest.raises(NonPositiveLength):
            ModelParams(H=0.0)
        with pytest.raises(NonPositiveLength):
            ModelParams(H=float("nan"))

    def test_non_numeric_values(self):
        """Test that strings and booleans are rejected."""
        with pytest.raises(ConfigurationError, match="must be a number"):
            ModelParams(l="1")
        with pytest.raises(ConfigurationError, match="must be a number"):
            ModelParams(omega1=True)

    def test_infinite_wall_parameter(self):
        """Test that wall parameters must be finite."""
        with pytest.raises(ConfigurationError):
            ModelParams(omega1=float("inf"))

    def test_omega_plus(self):
        """Test the common wall parameter."""
        assert ModelParams(omega1=2.0, omega2=2.0).omega_plus == 2.0
        assert ModelParams(omega1=2.0, omega2=1.0).omega_plus is None

    def test_replace_validates(self):
        """Test that replace builds a checked copy."""
        p = ModelParams(l=1.0)
        q = p.replace(kappa=2.0)
        assert q.kappa == 2.0 and p.kappa == 0.0
        with pytest.raises(GeometricConstraintViolated):
            p.replace(kappa=7.0)

    def test_mapping_round_trip(self):
        """Test flat key-value serialization."""
        p = ModelParams(l=2.0, H=0.5, omega1=-1.0, omega2=0.5, kappa=0.3)
        assert p.to_mapping() == {
            "l": 2.0,
            "H": 0.5,
            "omega1": -1.0,
            "omega2": 0.5,
            "kappa": 0.3,
        }
        assert ModelParams.from_mapping(p.to_mapping()) == p

    def test_from_mapping_strings_and_shorthand(self):
        """Test numeric strings and the omega shorthand."""
        p = ModelParams.from_mapping({"l": "2", "omega": "-1"})
        assert p.l == 2.0
        assert p.omega1 == p.omega2 == -1.0

        q = ModelParams.from_mapping({"omega": 1.0, "omega2": 3.0})
        assert q.omega1 == 1.0
        assert q.omega2 == 3.0

    def test_from_mapping_errors(self):
        """Test unknown keys and unparsable values."""
        with pytest.raises(ConfigurationError, match="Unknown parameter keys: radius"):
            ModelParams.from_mapping({"radius": 1.0})
        with pytest.raises(ConfigurationError, match="not a number"):
            ModelParams.from_mapping({"l": "one"})


class TestGrid1D:
    """Tests for Grid1D constructors and operators."""

    def test_chebyshev_endpoints_and_weights(self):
        """Test node endpoints and weight sum."""
        grid = Grid1D.chebyshev(2.0, 33)
        assert grid.n == 33
        assert grid.nodes[0] == 0.0
        assert grid.nodes[-1] == 2.0
        assert np.all(np.diff(grid.nodes) > 0)
        assert np.all(grid.weights > 0)
        assert abs(grid.weights.sum() - 2.0) <= 2e-12
        assert grid.K == 32

    def test_chebyshev_quadrature_exact_for_polynomials(self):
        """Test Clenshaw-Curtis exactness on a cubic."""
        grid = Grid1D.chebyshev(2.0, 33)
        assert grid.weights @ grid.nodes**3 == pytest.approx(4.0, abs=1e-12)

    def test_chebyshev_derivative(self):
        """Test spectral differentiation of a smooth function."""
        grid = Grid1D.chebyshev(2.0, 33)
        derivative = grid.diff_matrix @ np.sin(grid.nodes)
        assert np.max(np.abs(derivative - np.cos(grid.nodes))) < 1e-10

    def test_chebyshev_stiffness_and_mass(self):
        """Test the quadratic forms on simple polynomials."""
        grid = Grid1D.chebyshev(1.0, 17)
        x = grid.nodes
        assert x**2 @ grid.stiffness @ x**2 == pytest.approx(4.0 / 3.0, abs=1e-12)
        assert x @ grid.mass @ x == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_uniform_grid(self):
        """Test trapezoid weights and P1 forms on a uniform grid."""
        grid = Grid1D.uniform(1.0, 11)
        assert grid.basis == BASIS_FD
        assert grid.weights[0] == pytest.approx(0.05)
        ones = np.ones(grid.n)
        assert ones @ grid.mass @ ones == pytest.approx(1.0)
        assert grid.nodes @ grid.stiffness @ grid.nodes == pytest.approx(1.0)

    def test_piecewise_contains_breakpoints(self):
        """Test that every breakpoint is a node."""
        breaks = np.array([0.0, 0.1, 0.5, 0.9, 1.0])
        grid = Grid1D.piecewise(breaks, per_segment=4)
        assert grid.n == 17
        for b in breaks:
            assert np.min(np.abs(grid.nodes - b)) == 0.0

    def test_invalid_grids(self):
        """Test node and weight validation."""
        with pytest.raises(ValueError, match="at least 3"):
            Grid1D.chebyshev(1.0, 2)
        with pytest.raises(ValueError, match="start at 0"):
            Grid1D.from_nodes(np.array([0.1, 0.5, 1.0]))
        with pytest.raises(ValueError, match="start at 0"):
            Grid1D.from_nodes(np.array([0.0, 0.5, 0.5, 1.0]))
        with pytest.raises(ValueError, match="Unknown basis"):
            Grid1D(nodes=np.array([0.0, 0.5, 1.0]), weights=np.array([0.25, 0.5, 0.25]), basis="x")

    def test_interpolation(self):
        """Test interpolation between nodes."""
        grid = Grid1D.chebyshev(1.0, 17)
        values = grid.nodes**2
        assert grid.interpolate(values, np.array([0.3]))[0] == pytest.approx(0.09, abs=1e-12)

        fd = Grid1D.uniform(1.0, 11)
        assert fd.interpolate(fd.nodes, np.array([0.37]))[0] == pytest.approx(0.37)

    def test_cardinal_matrix_reproduces_interpolate(self):
        """Test that the cardinal matrix applies the interpolant."""
        grid = Grid1D.chebyshev(1.0, 17)
        x = np.linspace(0.0, 1.0, 7)
        values = np.cos(3.0 * grid.nodes)
        L = grid.cardinal_matrix(x)
        assert np.allclose(L @ values, grid.interpolate(values, x), atol=1e-13)

    def test_galerkin_modes(self):
        """Test the smooth trial space size."""
        assert Grid1D.chebyshev(1.0, 65).galerkin_modes == 16
        assert Grid1D.chebyshev(1.0, 65, K=4).galerkin_modes == 4
        assert Grid1D.uniform(1.0, 65).galerkin_modes == 8


class TestGridSpec:
    """Tests for GridSpec and resolve_grid."""

    def test_minimum_nodes(self):
        """Test that tiny grids are rejected."""
        with pytest.raises(ValueError, match="at least 5"):
            GridSpec(n=4)
        with pytest.raises(ValueError, match="Unknown basis"):
            GridSpec(basis="spline")
        with pytest.raises(ValueError, match="must be positive"):
            GridSpec(K=0)

    def test_build_is_cached(self):
        """Test that equal recipes share a grid."""
        spec = GridSpec(n=33)
        assert spec.build(1.5) is spec.build(1.5)
        assert spec.build(1.5).length == 1.5

    def test_resolve_default(self):
        """Test the default grid."""
        grid = resolve_grid(None, 2.0)
        assert grid.n == 129
        assert grid.length == 2.0

    def test_resolve_length_mismatch(self):
        """Test that a concrete grid must span the interface."""
        with pytest.raises(ValueError, match="interface length"):
            resolve_grid(Grid1D.chebyshev(1.0, 33), 2.0)


class TestHeightField:
    """Tests for HeightField."""

    def test_mean_of_constant(self):
        """Test exactness on constants."""
        grid = Grid1D.chebyshev(1.7, 33)
        assert mean(HeightField(grid, np.full(grid.n, 3.0))) == pytest.approx(3.0, abs=1e-14)

    def test_mean_of_cosine(self):
        """Test that a half-period cosine has zero mean."""
        grid = Grid1D.chebyshev(1.0, 65)
        h = grid.sample(lambda x: np.cos(np.pi * x))
        assert abs(h.mean()) <= 1e-12

    def test_mean_of_linear(self):
        """Test the mean of h(x) = x."""
        for grid in (Grid1D.chebyshev(1.0, 17), Grid1D.uniform(1.0, 17)):
            assert grid.sample(lambda x: x).mean() == pytest.approx(0.5, abs=1e-12)

    def test_mean_is_linear(self):
        """Test linearity of the mean."""
        grid = Grid1D.chebyshev(1.0, 33)
        f = grid.sample(np.exp)
        g = grid.sample(np.sin)
        combined = (2.0 * f - g * 3.0).mean()
        assert combined == pytest.approx(2.0 * f.mean() - 3.0 * g.mean(), rel=1e-12)

    def test_mean_converges_spectrally(self):
        """Test refinement of the Chebyshev mean."""
        exact = math.e - 1.0
        coarse = Grid1D.chebyshev(1.0, 9).sample(np.exp).mean()
        fine = Grid1D.chebyshev(1.0, 17).sample(np.exp).mean()
        assert abs(fine - exact) < 1e-14 + abs(coarse - exact) * 1e-3

    def test_validation(self):
        """Test shape and finiteness checks."""
        grid = Grid1D.chebyshev(1.0, 9)
        with pytest.raises(ValueError, match="shape"):
            HeightField(grid, np.zeros(8))
        with pytest.raises(ValueError, match="finite"):
            HeightField(grid, np.full(9, np.nan))
        with pytest.raises(ValueError, match="zero field"):
            HeightField.zeros(grid).normalized()

    def test_values_are_read_only(self):
        """Test immutability of field values."""
        grid = Grid1D.chebyshev(1.0, 9)
        h = HeightField(grid, np.ones(9))
        with pytest.raises(ValueError):
            h.values[0] = 2.0

    def test_norm_and_inner(self):
        """Test the L2 norm and inner product."""
        grid = Grid1D.chebyshev(2.0, 33)
        ones = HeightField(grid, np.ones(grid.n))
        assert ones.norm() == pytest.approx(math.sqrt(2.0), rel=1e-12)
        h = grid.sample(lambda x: np.cos(np.pi * x / 2.0))
        assert ones.inner(h) == pytest.approx(0.0, abs=1e-12)
        assert h.normalized().norm() == pytest.approx(1.0, rel=1e-12)

    def test_different_grids(self):
        """Test that arithmetic across grids is rejected."""
        a = HeightField.zeros(Grid1D.chebyshev(1.0, 9))
        b = HeightField.zeros(Grid1D.chebyshev(1.0, 17))
        with pytest.raises(ValueError, match="different grids"):
            a + b


class TestSmoothBasis:
    """Tests for the smooth trial space."""

    def test_slopes_match_derivatives(self):
        """Test that recorded end slopes equal the collocation derivatives."""
        grid = Grid1D.chebyshev(1.5, 65)
        basis = smooth_basis(grid)
        derivative = grid.diff_matrix @ basis.values
        assert np.allclose(derivative[0], basis.slopes_left, atol=1e-9)
        assert np.allclose(derivative[-1], basis.slopes_right, atol=1e-9)

    def test_columns_are_mean_free(self):
        """Test the zero-mean shift."""
        grid = Grid1D.chebyshev(1.0, 65)
        basis = smooth_basis(grid)
        assert np.max(np.abs(grid.weights @ basis.values)) < 1e-13
        assert basis.size == basis.modes + 2

    def test_constant_column(self):
        """Test the optional constant column."""
        grid = Grid1D.chebyshev(1.0, 33)
        basis = smooth_basis(grid, modes=3, constant=True)
        assert basis.size == 6
        assert np.all(basis.values[:, 0] == 1.0)
        assert basis.slopes_left[0] == 0.0
        assert basis.values_left.shape == (6,)

    def test_needs_a_mode(self):
        """Test that at least one cosine is required."""
        with pytest.raises(ValueError, match="at least one cosine"):
            smooth_basis(Grid1D.chebyshev(1.0, 33), modes=0)
