"""Tests for the square-function operator and the a priori estimate probes."""

import math

import numpy as np
import pytest

from fracspde.frac_time import FracOrders, TimeGrid
from fracspde.grid_spectral import TorusGrid
from fracspde.lp_check import (
    LPInstance,
    SingularQuadratureWarning,
    TimeStack,
    adversarial_family,
    apply_T,
    apply_T_field,
    apriori_estimate_check,
    dimension_sweep,
    lp_inequality_check,
    lp_sweep,
    mode_variance_sum,
    plancherel_n2star,
    spectral_decay_exponents,
)

ORDERS = FracOrders(0.75, 0.6)
TG = TimeGrid(1.0, 48)
GRID = TorusGrid(1, 32, 2.0 * math.pi)


def delta_mode_stack(tg, grid, m, amp=None):
    k = 2.0 * math.pi * m / grid.side_length
    spatial = np.cos(k * grid.axis_coordinates())
    vals = np.zeros((tg.n_nodes, 1) + grid.shape)
    vals[0, 0] = spatial * (amp if amp is not None else 1.0 / tg.dt)
    return TimeStack(tg, grid, vals)


class TestTypes:
    def test_instance_requires_upper_beta_range(self):
        g = delta_mode_stack(TG, GRID, 1)
        with pytest.raises(ValueError):
            LPInstance(FracOrders(0.75, 0.4), 2.0, g)
        with pytest.raises(ValueError):
            LPInstance(ORDERS, 1.0, g)

    def test_stack_shape_validation(self):
        with pytest.raises(ValueError):
            TimeStack(TG, GRID, np.zeros((TG.n_nodes, GRID.n_per_axis)))


class TestApplyT:
    def test_zero_forcing(self):
        g = TimeStack(TG, GRID, np.zeros((TG.n_nodes, 1) + GRID.shape))
        out = apply_T_field(LPInstance(ORDERS, 2.0, g), warn=False)
        assert np.all(out == 0.0)

    def test_heat_delta_geometric_sum(self):
        # alpha = beta = 1 (c1 = 1): the p = 2 ratio of a time-delta on one
        # mode reduces to lam * dt * sum of a geometric series, and appears
        # within O(dt) of the continuum value lam * int e^{-2 lam r} dr
        o = FracOrders(1.0, 1.0)
        tg = TimeGrid(1.0, 512)
        m, lam = 1, 1.0
        g = delta_mode_stack(tg, GRID, m)
        rep = lp_inequality_check(o, 2.0, [g])
        dt, n = tg.dt, tg.n_steps
        geometric = lam * dt * np.sum(np.exp(-2.0 * lam * dt * np.arange(1, n)))
        assert rep.n_star == pytest.approx(geometric, rel=1e-12)
        continuum = (1.0 - math.exp(-2.0 * lam)) / 2.0
        assert abs(rep.n_star - continuum) <= 3.0 * dt

    def test_point_evaluation_matches_field(self):
        g = delta_mode_stack(TG, GRID, 2)
        inst = LPInstance(ORDERS, 2.0, g)
        fields = apply_T_field(inst, warn=False)
        assert apply_T(inst, 7, 5) == fields[7, 5]

    def test_sublinearity_pointwise(self):
        samples, _ = adversarial_family(ORDERS, TG, GRID, n_random=6)
        g1, g2 = samples[-2], samples[-1]
        comps = min(g1.n_components, g2.n_components)
        a = TimeStack(TG, GRID, g1.values[:, :comps])
        b = TimeStack(TG, GRID, g2.values[:, :comps])
        ab = TimeStack(TG, GRID, a.values + b.values)
        t_ab = apply_T_field(LPInstance(ORDERS, 2.0, ab), warn=False)
        t_a = apply_T_field(LPInstance(ORDERS, 2.0, a), warn=False)
        t_b = apply_T_field(LPInstance(ORDERS, 2.0, b), warn=False)
        assert float(np.max(t_ab - t_a - t_b)) <= 1e-10

    def test_parabolic_scaling_covariance(self):
        c = 4.0
        tg_b = TimeGrid(TG.t_end / c, TG.n_steps)
        grid_b = TorusGrid(1, 32, GRID.side_length * c ** (-ORDERS.alpha / 2.0))

        def gfun(t, x):
            return np.exp(-3.0 * (t - 0.2) ** 2) * np.cos(
                2.0 * math.pi * 3.0 * x / GRID.side_length
            )

        g_a = TimeStack.from_functions(TG, GRID, [gfun])
        g_b = TimeStack.from_functions(
            tg_b, grid_b, [lambda t, x: gfun(c * t, x * c ** (ORDERS.alpha / 2.0))]
        )
        t_a = apply_T_field(LPInstance(ORDERS, 2.0, g_a), warn=False)
        t_b = apply_T_field(LPInstance(ORDERS, 2.0, g_b), warn=False)
        assert float(np.max(np.abs(t_a - t_b)) / np.max(t_a)) <= 1e-6

    def test_singular_cell_warning(self):
        # alpha < beta on a coarse time grid: the newest cell dominates
        o = FracOrders(0.6, 1.0)
        tg = TimeGrid(1.0, 16)
        g = TimeStack.from_functions(
            tg, GRID, [lambda t, x: np.cos(x) * np.ones_like(t + x)]
        )
        with pytest.warns(SingularQuadratureWarning):
            apply_T_field(LPInstance(o, 2.0, g))


class TestRatios:
    def test_p2_attains_plancherel_constant(self):
        samples, labels = adversarial_family(ORDERS, TG, GRID, n_random=8)
        rep = lp_inequality_check(ORDERS, 2.0, samples, labels)
        n2, _ = plancherel_n2star(ORDERS, TG, GRID)
        assert rep.n_star == pytest.approx(n2, rel=1e-8)
        assert all(r <= n2 * (1.0 + 1e-10) for r in rep.ratios)
        assert rep.argmax_label.startswith("delta-mode")

    def test_sweep_shares_fields_consistently(self):
        samples, labels = adversarial_family(ORDERS, TG, GRID, n_random=4)
        both = lp_sweep(ORDERS, [2.0, 4.0], samples, labels)
        solo = lp_inequality_check(ORDERS, 4.0, samples, labels)
        assert both[4.0].ratios == solo.ratios

    def test_zero_sample_rejected(self):
        g = TimeStack(TG, GRID, np.zeros((TG.n_nodes, 1) + GRID.shape))
        with pytest.raises(ValueError):
            lp_inequality_check(ORDERS, 2.0, [g])


class TestDimensionThreshold:
    def test_frozen_sums(self):
        # frozen from the quadrature oracle at first build
        s = mode_variance_sum(
            FracOrders(1.0, 1.0), TorusGrid(2, 8, 2.0 * math.pi), 1.0
        )
        assert s == pytest.approx(6.6776, abs=2e-4)
        s3 = mode_variance_sum(
            FracOrders(0.5, 0.25), TorusGrid(3, 8, 2.0 * math.pi), 1.0
        )
        assert s3 == pytest.approx(8.1584, abs=2e-4)

    def test_divergent_vs_convergent_trend(self):
        div = dimension_sweep(FracOrders(1.0, 1.0), 2, (8, 16, 32), 2.0 * math.pi, 1.0)
        inc = [b / a - 1.0 for (_, a), (_, b) in zip(div, div[1:])]
        assert all(g >= 0.20 for g in inc)
        conv = dimension_sweep(
            FracOrders(0.5, 0.25), 3, (8, 16, 32), 2.0 * math.pi, 1.0
        )
        deltas = [b - a for (_, a), (_, b) in zip(conv, conv[1:])]
        assert deltas[1] <= 0.55 * deltas[0]


class TestSpectralFit:
    def test_recovers_synthetic_power_law(self):
        grid = TorusGrid(1, 64, 2.0 * math.pi)
        lam = grid.xi_sq().reshape(-1)
        var = np.where(lam > 0, lam, 1.0) ** -1.7
        slope = spectral_decay_exponents(var, grid, 2, 12)
        assert slope == pytest.approx(-3.4, abs=1e-9)

    def test_apriori_report_smoke(self):
        o = FracOrders(1.0, 1.0)
        rep = apriori_estimate_check(
            o,
            gamma=-1.0,
            p=2.0,
            replicates=16,
            time_grid=TimeGrid(1.0, 128),
            grid=TorusGrid(1, 32, 2.0 * math.pi),
            seed=3,
            spectrum_replicates=200,
        )
        assert math.isfinite(rep.ratio) and rep.ratio > 0.0
        assert abs(rep.mc_exponent - rep.oracle_exponent) <= 0.5
        d = rep.to_dict()
        assert d["alpha"] == 1.0 and "ratio" in d
