"""
Unit tests for kernel.py module.
"""

import math

import numpy as np
import pytest

from contact_ms.kernel import (
    DegenerateDenominator,
    check_semisimple,
    kernel_curved,
    kernel_description,
    kernel_flat,
    numerical_nullity,
    semisimple_integral,
)
from contact_ms.model import Grid1D, ModelParams


def robin_residuals(p, field):
    """Endpoint residuals h'(0) + omega1 h(0) and h'(l) - omega2 h(l)."""
    slope = field.grid.diff_matrix @ field.values
    v = field.values
    return slope[0] + p.omega1 * v[0], slope[-1] - p.omega2 * v[-1]


class TestKernelFlat:
    """Tests for the flat kernel."""

    def test_neutral_walls_give_constants(self):
        """Test that omega1 = omega2 = 0 gives the constants."""
        p = ModelParams()
        kernel = kernel_flat(p, Grid1D.chebyshev(1.0, 33))
        assert kernel.dimension == 1
        assert np.allclose(kernel.basis[0].values, 1.0)
        assert kernel.system_singular
        assert not kernel.degenerate
        assert not kernel.mean_free

    def test_convex_walls_closed_form(self):
        """Test h(0) = -0.5 at l = 1, omega1 = omega2 = -1, c = 1."""
        p = ModelParams(omega1=-1.0, omega2=-1.0)
        kernel = kernel_flat(p)
        coef = kernel.coefficients[0]
        assert kernel.dimension == 1
        assert coef.c == 1.0
        assert coef.h0 == pytest.approx(-0.5, abs=1e-14)
        assert not kernel.degenerate

    def test_equal_walls_closed_form(self):
        """Test h(0) = c (l - omega l^2 / 2) / (omega (2 - omega l)) for equal walls."""
        l, omega = 1.5, 0.4
        kernel = kernel_flat(ModelParams(l=l, omega1=omega, omega2=omega))
        expected = (l - omega * l**2 / 2.0) / (omega * (2.0 - omega * l))
        assert kernel.coefficients[0].h0 == pytest.approx(expected, rel=1e-12)

    def test_critical_wall_is_degenerate(self):
        """Test that 2 - l omega = 0 gives a two-dimensional kernel."""
        kernel = kernel_flat(ModelParams(omega1=2.0, omega2=2.0))
        assert kernel.degenerate
        assert kernel.system_singular
        assert kernel.dimension == 2
        assert kernel.evaluate(np.array([0.0, 0.5])).shape == (2, 2)

    def test_mean_free_kernel_is_degenerate(self):
        """Test 12 - 4 (omega1 + omega2) l + omega1 omega2 l^2 = 0 flags a mean-free kernel."""
        kernel = kernel_flat(ModelParams(omega1=6.0, omega2=6.0), Grid1D.chebyshev(1.0, 33))
        assert kernel.dimension == 1
        assert kernel.mean_free
        assert kernel.degenerate
        assert abs(kernel.basis[0].mean()) < 1e-12

    @pytest.mark.parametrize(
        "omega1,omega2,l",
        [(-1.0, -1.0, 1.0), (-0.5, -2.0, 2.0), (1.0, 0.5, 1.0), (-1.0, 0.0, 0.5), (3.0, 3.0, 1.0)],
    )
    def test_robin_conditions(self, omega1, omega2, l):
        """Test that basis elements satisfy both Robin conditions."""
        p = ModelParams(l=l, omega1=omega1, omega2=omega2)
        kernel = kernel_flat(p, Grid1D.chebyshev(l, 33))
        for field in kernel.basis:
            left, right = robin_residuals(p, field)
            assert abs(left) <= 1e-10
            assert abs(right) <= 1e-10

    def test_needs_flat_interface(self):
        """Test that kappa must vanish."""
        with pytest.raises(ValueError, match="kappa = 0"):
            kernel_flat(ModelParams(kappa=1.0))


class TestKernelCurved:
    """Tests for the curved kernel."""

    def test_neutral_walls_give_constant(self):
        """Test that omega = 0 and kappa l not in pi Z give rho = c / kappa^2."""
        p = ModelParams(kappa=2.0)
        kernel = kernel_curved(p, Grid1D.chebyshev(1.0, 33))
        assert kernel.dimension == 1
        assert not kernel.degenerate
        values = kernel.basis[0].values
        assert np.ptp(values) < 1e-12
        assert values[0] == pytest.approx(kernel.coefficients[0].c / 4.0, rel=1e-12)

    def test_half_turn_is_degenerate(self):
        """Test that kappa l = pi adds cos(kappa s) to the kernel."""
        kernel = kernel_curved(ModelParams(kappa=math.pi), Grid1D.chebyshev(1.0, 33))
        assert kernel.system_singular
        assert kernel.degenerate
        assert kernel.dimension == 2

    @pytest.mark.parametrize(
        "omega1,omega2,kappa",
        [(0.0, 0.0, 2.0), (-1.0, -1.0, 1.5), (0.5, -0.3, -2.5), (1.0, 1.0, 0.7)],
    )
    def test_ode_and_robin_residuals(self, omega1, omega2, kappa):
        """Test rho'' + kappa^2 rho = c and both Robin conditions."""
        p = ModelParams(omega1=omega1, omega2=omega2, kappa=kappa)
        grid = Grid1D.chebyshev(1.0, 33)
        kernel = kernel_curved(p, grid)
        for field, coef in zip(kernel.basis, kernel.coefficients):
            ode = grid.second_diff_matrix @ field.values + kappa**2 * field.values - coef.c
            scale = max(abs(coef.c), np.max(np.abs(field.values)))
            assert np.max(np.abs(ode)) <= 1e-8 * scale
            left, right = robin_residuals(p, field)
            assert abs(left) <= 1e-10 * scale
            assert abs(right) <= 1e-10 * scale

    def test_small_curvature_limit(self):
        """Test convergence to the flat kernel for |kappa| l <= 1e-3."""
        grid = Grid1D.chebyshev(1.0, 33)
        flat = kernel_flat(ModelParams(omega1=-1.0, omega2=-1.0), grid)
        curved = kernel_curved(ModelParams(omega1=-1.0, omega2=-1.0, kappa=1e-4), grid)
        assert curved.dimension == flat.dimension == 1
        difference = curved.basis[0].values - flat.basis[0].values
        assert np.max(np.abs(difference)) <= 1e-6

    def test_needs_curvature(self):
        """Test that kappa must be nonzero."""
        with pytest.raises(ValueError, match="kappa != 0"):
            kernel_curved(ModelParams())

    def test_dispatch(self):
        """Test kernel_description dispatch on kappa."""
        assert kernel_description(ModelParams()).coefficients[0].A is None
        assert kernel_description(ModelParams(kappa=1.0)).coefficients[0].A is not None


class TestSemisimpleIntegral:
    """Tests for the semisimplicity integral."""

    def test_zero_coefficient(self):
        """Test linearity in c1."""
        assert semisimple_integral(ModelParams(omega1=-1.0, omega2=-1.0), 0.0) == 0.0

    def test_closed_form_value(self):
        """Test -10.5 / 18 at l = 1, omega1 = omega2 = -1, c1 = 1."""
        value = semisimple_integral(ModelParams(omega1=-1.0, omega2=-1.0), 1.0)
        assert value == pytest.approx(-10.5 / 18.0, rel=1e-14)

    @pytest.mark.parametrize(
        "omega1,omega2,l", [(-1.0, -1.0, 1.0), (-2.0, -0.5, 2.0), (1.0, 0.5, 0.5)]
    )
    def test_matches_quadrature(self, omega1, omega2, l):
        """Test the closed form against the quadrature of the kernel element."""
        p = ModelParams(l=l, omega1=omega1, omega2=omega2)
        kernel = kernel_flat(p, Grid1D.chebyshev(l, 33))
        field = kernel.basis[0]
        integral = field.mean() * l
        assert integral == pytest.approx(semisimple_integral(p, 1.0), rel=1e-10, abs=1e-12)

    def test_degenerate_denominator(self):
        """Test that a vanishing denominator is reported."""
        with pytest.raises(DegenerateDenominator):
            semisimple_integral(ModelParams(), 1.0)
        with pytest.raises(DegenerateDenominator):
            semisimple_integral(ModelParams(omega1=2.0, omega2=2.0), 1.0)

    def test_needs_flat_interface(self):
        """Test that kappa must vanish."""
        with pytest.raises(ValueError):
            semisimple_integral(ModelParams(omega1=-1.0, omega2=-1.0, kappa=0.5), 1.0)


class TestCheckSemisimple:
    """Tests for the numerical semisimplicity check."""

    def test_diagonal(self):
        """Test a diagonal matrix with a simple zero."""
        assert check_semisimple(np.diag([0.0, 1.0, 2.0]))

    def test_jordan_block(self):
        """Test the textbook non-semisimple block."""
        assert not check_semisimple(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_invertible(self):
        """Test that an invertible matrix is trivially semisimple."""
        assert check_semisimple(np.array([[2.0, 1.0], [0.0, 3.0]]))

    def test_small_eigenvalue_not_squared_away(self):
        """Test that a small nonzero eigenvalue is not mistaken for a kernel."""
        assert check_semisimple(np.diag([1e-4, 1.0]))

    def test_nullity(self):
        """Test the numerical nullity count."""
        assert numerical_nullity(np.diag([0.0, 1.0, 2.0]), 1e-9) == 1
        assert numerical_nullity(np.zeros((2, 2)), 1e-9) == 2

    def test_rejects_rectangular(self):
        """Test that the matrix must be square."""
        with pytest.raises(ValueError, match="square"):
            check_semisimple(np.ones((2, 3)))
