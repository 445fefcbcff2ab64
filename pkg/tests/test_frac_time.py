"""Tests for discrete Riemann-Liouville / Caputo calculus.

Closed-form monomial oracle: I^a t^mu = Gamma(mu+1)/Gamma(mu+1+a) t^(mu+a).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from fracspde.frac_time import (
    FracOrders,
    SampledPath,
    StabilityWarning,
    TimeGrid,
    caputo_derivative,
    rl_derivative,
    rl_integral,
    semigroup_check,
)


def monomial_integral(t, mu, a):
    return gamma(mu + 1.0) / gamma(mu + 1.0 + a) * t ** (mu + a)


@pytest.fixture
def grid():
    return TimeGrid(2.0, 512)


class TestTypes:
    def test_time_grid_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 10)
        with pytest.raises(ValueError):
            TimeGrid(1.0, 0)

    def test_path_length_mismatch(self, grid):
        with pytest.raises(ValueError):
            SampledPath(grid, np.zeros(grid.n_steps))

    def test_path_rejects_nonfinite(self, grid):
        bad = np.zeros(grid.n_nodes)
        bad[3] = np.inf
        with pytest.raises(ValueError):
            SampledPath(grid, bad)


class TestFracOrders:
    def test_classical_heat_constants(self):
        o = FracOrders(1.0, 1.0)
        assert o.lam == 1
        assert o.c0 == 1.0
        assert o.c0_prime == 1.0
        assert o.c1 == 1.0
        assert o.theta == 1.0
        assert o.d0 == 2.0

    def test_subcritical_beta_pays_no_tax(self):
        o = FracOrders(0.5, 0.25)
        assert o.c0 == 0.0
        assert o.c0_prime == 0.0
        assert o.c1 == 2.0
        assert o.d0 == 4.0
        assert o.theta == min(1.0, 0.5, 1.5)

    def test_borderline_beta_uses_kappa(self):
        o = FracOrders(0.8, 0.5, kappa=0.3)
        assert o.c0 == 0.0
        assert o.c0_prime == pytest.approx(0.3)

    def test_wave_range_lambda(self):
        assert FracOrders(1.5, 1.9).lam == 2
        assert FracOrders(0.5, -3.0).lam == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            FracOrders(2.0, 1.0)
        with pytest.raises(ValueError):
            FracOrders(0.5, 1.0)  # beta >= alpha + 1/2
        with pytest.raises(ValueError):
            FracOrders(0.5, 0.5, kappa=1.0)


class TestRLIntegral:
    def test_order_zero_is_identity_bitwise(self, grid):
        rng = np.random.default_rng(5)
        p = SampledPath(grid, rng.standard_normal(grid.n_nodes))
        out = rl_integral(p, 0.0)
        assert np.array_equal(out.values, p.values)

    def test_constant_order_one(self, grid):
        t = grid.nodes()
        out = rl_integral(SampledPath(grid, np.ones_like(t)), 1.0)
        assert np.max(np.abs(out.values - t)) <= 1e-13

    def test_constant_half_order(self, grid):
        t = grid.nodes()
        out = rl_integral(SampledPath(grid, np.ones_like(t)), 0.5)
        assert np.max(np.abs(out.values - t**0.5 / gamma(1.5))) <= 1e-12

    def test_linear_exact(self, grid):
        t = grid.nodes()
        out = rl_integral(SampledPath(grid, t), 0.3)
        assert np.max(np.abs(out.values - monomial_integral(t, 1.0, 0.3))) <= 1e-12

    def test_quadratic_second_order(self):
        errs = []
        for n in (256, 512, 1024):
            g = TimeGrid(2.0, n)
            t = g.nodes()
            out = rl_integral(SampledPath(g, t**2), 0.7)
            errs.append(np.max(np.abs(out.values - monomial_integral(t, 2.0, 0.7))))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.15)

    def test_node_zero_maps_to_zero(self, grid):
        t = grid.nodes()
        out = rl_integral(SampledPath(grid, np.cos(t)), 0.4)
        assert out.values[0] == 0.0

    def test_rejects_negative_order(self, grid):
        with pytest.raises(ValueError):
            rl_integral(SampledPath(grid, grid.nodes()), -0.1)

    def test_vector_valued_matches_columnwise(self, grid):
        t = grid.nodes()
        stacked = np.stack([np.sin(t), t**2], axis=1)
        out = rl_integral(SampledPath(grid, stacked), 0.6)
        col0 = rl_integral(SampledPath(grid, np.sin(t)), 0.6)
        col1 = rl_integral(SampledPath(grid, t**2), 0.6)
        assert np.allclose(out.values[:, 0], col0.values, atol=1e-14)
        assert np.allclose(out.values[:, 1], col1.values, atol=1e-14)

    @settings(max_examples=20, deadline=None)
    @given(
        a=st.floats(0.1, 1.9),
        c1=st.floats(-3.0, 3.0),
        c2=st.floats(-3.0, 3.0),
    )
    def test_linearity(self, a, c1, c2):
        g = TimeGrid(1.0, 64)
        t = g.nodes()
        phi, psi = np.sin(3.0 * t), np.exp(-t)
        lhs = rl_integral(SampledPath(g, c1 * phi + c2 * psi), a).values
        rhs = (
            c1 * rl_integral(SampledPath(g, phi), a).values
            + c2 * rl_integral(SampledPath(g, psi), a).values
        )
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1.0 + abs(c1) + abs(c2))


class TestRLDerivative:
    def test_inverts_half_integral_of_one(self, grid):
        t = grid.nodes()
        out = rl_derivative(SampledPath(grid, t**0.5 / gamma(1.5)), 0.5)
        interior = out.values[grid.n_steps // 4 : -1]
        assert np.max(np.abs(interior - 1.0)) <= 1e-3

    def test_constant_power_law(self, grid):
        t = grid.nodes()
        out = rl_derivative(SampledPath(grid, np.full_like(t, 3.0)), 0.5)
        lo = grid.n_steps // 4
        ref = 3.0 * t[lo:-1] ** -0.5 / gamma(0.5)
        assert np.max(np.abs(out.values[lo:-1] / ref - 1.0)) <= 1e-4

    def test_classical_derivative(self, grid):
        t = grid.nodes()
        out = rl_derivative(SampledPath(grid, t**2), 1.0)
        assert np.max(np.abs(out.values - 2.0 * t)) <= 1e-10

    def test_instability_warning(self):
        g = TimeGrid(1.0, 128)
        spike = np.zeros(g.n_nodes)
        spike[1] = 1.0  # boundary stencil amplifies past max|phi|/dt^2
        with pytest.warns(StabilityWarning):
            rl_derivative(SampledPath(g, spike), 1.9)


class TestCaputo:
    def test_linear_ramp(self, grid):
        t = grid.nodes()
        out = caputo_derivative(SampledPath(grid, t), 0.5)
        ref = t**0.5 / gamma(1.5)
        m = slice(grid.n_steps // 4, grid.n_steps)
        assert np.max(np.abs(out.values[m] - ref[m]) / ref[m]) <= 1e-4

    def test_kills_constants_exactly(self, grid):
        t = grid.nodes()
        out = caputo_derivative(SampledPath(grid, np.full_like(t, 7.0)), 0.5)
        assert np.max(np.abs(out.values)) == 0.0

    def test_wave_range_monomial(self):
        g = TimeGrid(2.0, 2048)
        t = g.nodes()
        out = caputo_derivative(SampledPath(g, t**2), 1.5)
        ref = 2.0 * t**0.5 / gamma(1.5)
        m = slice(g.n_steps // 4, g.n_steps)
        assert np.max(np.abs(out.values[m] - ref[m]) / ref[m]) <= 1e-3

    def test_shift_invariance(self, grid):
        # Caputo(phi + const) == Caputo(phi) to rounding, alpha in (0, 1)
        t = grid.nodes()
        phi = np.sin(2.0 * t)
        a = caputo_derivative(SampledPath(grid, phi), 0.7).values
        b = caputo_derivative(SampledPath(grid, phi + 42.0), 0.7).values
        assert np.max(np.abs(a - b)) <= 1e-9

    def test_rejects_out_of_range_order(self, grid):
        p = SampledPath(grid, grid.nodes())
        for bad in (0.0, 2.0, -0.5):
            with pytest.raises(ValueError):
                caputo_derivative(p, bad)


class TestSemigroup:
    def test_identity_factor_exact(self, grid):
        p = SampledPath(grid, np.ones(grid.n_nodes))
        assert semigroup_check(p, 0.0, 0.5) == 0.0

    def test_sin_converges_at_quadrature_order(self):
        errs = []
        for n in (512, 1024, 2048):
            g = TimeGrid(2.0, n)
            errs.append(semigroup_check(SampledPath.from_function(g, np.sin), 0.3, 0.4))
        assert errs[0] / errs[1] == pytest.approx(3.4, abs=1.0)
        assert errs[1] / errs[2] == pytest.approx(3.4, abs=1.0)

    def test_linear_integer_orders(self, grid):
        # the inner integral is exact; the outer one interpolates a quadratic,
        # so the floor is the O(dt^2) composition error, not rounding
        t = grid.nodes()
        d = semigroup_check(SampledPath(grid, t), 1.0, 1.0)
        assert d <= grid.t_end * grid.dt**2 / 6.0

    def test_composition_rule(self):
        # D^a I^b phi -> I^(b-a) phi under refinement (a <= b)
        a, b = 0.3, 0.7
        errs = []
        for n in (256, 512, 1024):
            g = TimeGrid(2.0, n)
            p = SampledPath.from_function(g, np.sin)
            lhs = rl_derivative(rl_integral(p, b), a).values
            rhs = rl_integral(p, b - a).values
            errs.append(np.max(np.abs(lhs - rhs)))
        assert errs[-1] <= 1e-4
        assert errs[0] > errs[1] > errs[2]
