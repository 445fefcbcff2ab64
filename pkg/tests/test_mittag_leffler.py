"""Tests for the two-parameter Mittag-Leffler evaluator.

Reference values come from an independent high-precision series oracle
(``ml_oracle`` below) or from closed forms; several are frozen as literals
so the suite does not depend on oracle runtime for every case.
"""

import math

import mpmath as mp
import numpy as np
import pytest
from scipy.special import erfc, gammaln

from fracspde.mittag_leffler import (
    MLAccuracyError,
    MLParams,
    _asymptotic_negative,
    _series_double,
    ml_bound_check,
    ml_eval,
    ml_eval_array,
)


def ml_oracle(a, b, z):
    """High-precision series oracle, independent of the implementation.

    Working precision is sized to the term hump; terms are summed until they
    drop below 1e-35 in absolute value.
    """
    if z == 0:
        return float(mp.rgamma(b))
    logaz = math.log(abs(z))
    k, log_max = 1, 0.0
    while True:
        arg = a * k + b
        if arg > 2.0:
            log_t = k * logaz - float(gammaln(arg))
            log_max = max(log_max, log_t)
            if log_t < -85.0:
                break
        k += 1
        assert k < 200000, "oracle term budget exceeded"
    nterms = k + 20
    dps = int(log_max / math.log(10.0)) + 40
    with mp.workdps(dps):
        zz, s, zp = mp.mpf(z), mp.mpf(0), mp.mpf(1)
        for j in range(nterms):
            s += zp * mp.rgamma(mp.mpf(a) * j + mp.mpf(b))
            zp *= zz
        return float(s)


# (a, b, z) -> value frozen from ml_oracle
FROZEN = {
    (0.5, 1.0, -4.0): 0.13699945762506138,
    (1.5, 0.5, -50.0): 0.0058060962552030325,
    (0.7, 1.3, -12.0): 0.05648582852147089,
    (1.9, 2.3, -200.0): 0.002859638451845725,
    (1.2, 0.2, -1000.0): 4.566059824339451e-07,
    (0.5, 1.5, -7.3): 0.12649580705870153,
    (0.8, 1.55, -33.0): 0.02476908490091788,
    (0.9, 1.0, -2.5): 0.11469986754557784,
    (0.5, 1.0, -30.0): 0.01879588886141675,
    (0.6, 1.0, -9.0): 0.051918367383206696,
    (1.1, 1.0, -7.0): -0.022174543683396126,
    (0.25, 1.0, -2.0): 0.2981017936936576,
    (2.0, 1.0, -100.0): -0.8390715290764524,
    (1.0, 1.0, 20.0): 485165195.4097903,
}


class TestValidation:
    def test_rejects_a_out_of_range(self):
        for bad in (0.0, -0.3, 2.5, math.inf, math.nan):
            with pytest.raises(ValueError):
                MLParams(a=bad)

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            MLParams(a=1.0, tol=0.0)
        with pytest.raises(ValueError):
            MLParams(a=1.0, tol=-1e-9)

    def test_rejects_nonfinite_z(self):
        p = MLParams(a=0.5)
        for bad in (math.inf, -math.inf, math.nan):
            with pytest.raises(ValueError):
                ml_eval(p, bad)


class TestSpecExamples:
    def test_exp_identity(self):
        # E_{1,1} = exp
        assert ml_eval(MLParams(1.0, 1.0), 1.0) == pytest.approx(math.e, abs=1e-12)

    def test_cosine_zero(self):
        # E_{2,1}(-x^2) = cos x, x = pi/2
        z = -((math.pi / 2.0) ** 2)
        assert abs(ml_eval(MLParams(2.0, 1.0), z)) <= 1e-12

    def test_half_order_erfc(self):
        # frozen from ml_oracle(0.5, 1, -1); closed form e^{z^2} erfc(-z)
        expect = 0.4275835761558070044107503
        got = ml_eval(MLParams(0.5, 1.0), -1.0)
        assert got == pytest.approx(expect, abs=1e-13)
        assert got == pytest.approx(math.e * erfc(1.0), abs=1e-12)

    def test_value_at_zero_is_reciprocal_gamma(self):
        got = ml_eval(MLParams(0.7, 1.3), 0.0)
        assert got == pytest.approx(1.0 / math.gamma(1.3), abs=1e-15)


class TestAgainstOracle:
    @pytest.mark.parametrize("key", sorted(FROZEN))
    def test_frozen_values(self, key):
        a, b, z = key
        got = ml_eval(MLParams(a, b, tol=1e-12), z)
        scale_free = abs(FROZEN[key]) <= 1.0
        if scale_free:
            assert got == pytest.approx(FROZEN[key], abs=1e-12)
        else:
            # absolute tolerance is meaningless beyond 1 ulp of a large value
            assert got == pytest.approx(FROZEN[key], rel=1e-13)

    def test_fresh_oracle_comparison(self):
        rng = np.random.default_rng(811)
        for _ in range(25):
            a = float(rng.uniform(0.15, 1.95))
            b = float(rng.uniform(-0.5, 2.5))
            z = float(-rng.uniform(0.0, 40.0))
            if abs(z) ** (1.0 / a) > 120.0:
                continue  # keep the oracle affordable
            got = ml_eval(MLParams(a, b, tol=1e-12), z)
            assert got == pytest.approx(ml_oracle(a, b, z), abs=2e-12)


class TestInvariants:
    def test_exp_on_interval(self):
        xs = np.linspace(-20.0, 20.0, 101)
        got = ml_eval_array(MLParams(1.0, 1.0), xs)
        with mp.workdps(40):
            ref = np.array([float(mp.exp(mp.mpf(float(x)))) for x in xs])
        err = np.abs(got - ref)
        big = np.abs(ref) > 1.0
        assert np.max(err[~big]) <= 1e-12
        assert np.max(err[big] / np.abs(ref[big])) <= 1e-13

    def test_cos_on_interval(self):
        xs = np.linspace(0.0, 20.0, 81)
        got = ml_eval_array(MLParams(2.0, 1.0), -(xs**2))
        assert np.max(np.abs(got - np.cos(xs))) <= 1e-10

    def test_branch_agreement_overlap(self):
        # at tol = 1e-6 the two certified windows overlap; the branches must
        # agree there within 10*tol (at tighter tolerances the windows
        # separate and the extended-precision fallback owns the gap)
        tol = 1e-6
        for a, b in [(0.5, 1.0), (0.8, 1.4)]:
            zs = -np.geomspace(1.5, 100.0, 300)
            va, ok_a = _asymptotic_negative(a, b, zs, tol)
            vs, ok_s = _series_double(a, b, zs, tol)
            both = ok_a & ok_s
            assert np.any(both), f"no overlap window for (a, b) = ({a}, {b})"
            assert np.max(np.abs(va[both] - vs[both])) <= 10.0 * tol

    def test_gap_between_branches_still_certified(self):
        # points between the two double-precision windows route through the
        # extended-precision series and still meet the default tolerance
        for a, b, z in [(1.3, 1.0, -53.0), (0.35, 0.8, -4.0), (0.5, 1.0, -9.0)]:
            got = ml_eval(MLParams(a, b), z)
            assert got == pytest.approx(ml_oracle(a, b, z), abs=1e-12)

    def test_monotone_decay_on_negative_axis(self):
        # a in (0, 1], b = 1: E_{a,1} decreasing in |z| for z <= 0
        for a in (0.3, 0.5, 0.8, 1.0):
            zs = -np.linspace(0.0, 50.0, 400)
            vals = ml_eval_array(MLParams(a, 1.0), zs)
            assert np.all(np.diff(vals) < 1e-14)
            assert np.all(vals > -1e-14)

    def test_array_matches_scalar(self):
        p = MLParams(0.75, 1.1)
        zs = np.array([-0.5, -3.0, -80.0, 0.0, 2.0])
        arr = ml_eval_array(p, zs)
        for z, v in zip(zs, arr):
            assert ml_eval(p, float(z)) == v


class TestBoundCheck:
    def test_rejects_positive_samples(self):
        with pytest.raises(ValueError):
            ml_bound_check(MLParams(1.0, 1.0), [0.0, 1.0])

    def test_exp_attains_one_at_zero(self):
        rep = ml_bound_check(MLParams(1.0, 1.0), np.linspace(-100.0, 0.0, 501))
        assert rep.c_star >= 1.0
        assert rep.c_star == pytest.approx(1.0, abs=1e-12)
        assert rep.z_at_max == 0.0

    @pytest.mark.parametrize("a,b", [(0.5, 1.0), (1.5, 0.5)])
    def test_finite_and_stable_on_wide_sweep(self, a, b):
        coarse = -np.geomspace(1e-3, 1e4, 200)
        fine = -np.geomspace(1e-3, 1e4, 400)
        r1 = ml_bound_check(MLParams(a, b), np.append(coarse, 0.0))
        r2 = ml_bound_check(MLParams(a, b), np.append(fine, 0.0))
        assert math.isfinite(r1.c_star) and math.isfinite(r2.c_star)
        assert r2.c_star <= 1.05 * r1.c_star + 1e-9
        assert r1.n_samples == 201

    def test_accuracy_error_is_reported(self):
        # near a = 2 the exponential contribution decays too slowly for the
        # asymptotics while the series hump is beyond the precision budget:
        # must refuse, not fabricate
        with pytest.raises(MLAccuracyError):
            ml_eval(MLParams(1.999, 1.0), -1e8)
