import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from oracles import direct_N, scipy_laplace, simpson_quartic
from tubekernel import (
    N_value,
    Polynomial,
    bnw_estimate,
    derivative,
    factor_nonneg,
    laplace_integral,
    legendre,
    lower_bound_I,
    real_roots,
    shift_poly,
    upper_bound_check,
)

SQRT2 = math.sqrt(2.0)
DW = Polynomial((0, 0, -1, 0, 0.25))
QUARTIC = Polynomial((0, 0, 0, 0, 0.25))


def domain_polys():
    return st.integers(2, 3).flatmap(lambda n: st.lists(
        st.floats(-3, 3, allow_nan=False), min_size=2 * n - 2, max_size=2 * n - 2).map(
        lambda c: Polynomial([0.0, 0.0, *c, 1.0 / (2 * n)])))


def quartic_closed_form(a):
    return gamma(0.25) / (2.0 * a**0.25)


class TestShift:
    def test_quartic_at_zero(self):
        sp = shift_poly(QUARTIC, 0.0)
        assert sp.lambda_eta == 0.0 and sp.p.coeffs == (0, 0, 0, 0, 0.25)

    def test_double_well_at_zero(self):
        sp = shift_poly(DW, 0.0)
        assert sp.lambda_eta == pytest.approx(SQRT2)
        xs = np.linspace(-4, 2, 13)
        ref = (xs + SQRT2) ** 4 / 4 - (xs + SQRT2) ** 2 + 1
        np.testing.assert_allclose(sp.p(xs), ref, atol=1e-12)
        assert sp.p(0.0) == 0.0
        assert sp.p(-2 * SQRT2) == pytest.approx(0.0, abs=1e-12)

    @given(domain_polys(), st.floats(-20, 20))
    def test_shape(self, b, eta):
        sp = shift_poly(b, eta)
        p = sp.p
        assert p(0.0) == 0.0
        assert derivative(p, 2)(0.0) == pytest.approx(derivative(b, 2)(sp.lambda_eta), rel=1e-9, abs=1e-9)
        xs = np.linspace(-6, 6, 241)
        scale = 1 + np.abs(b(xs + sp.lambda_eta)).max()
        assert np.all(p(xs) >= -1e-9 * scale)
        for x, m in real_roots(p, tol=1e-6).real_roots:
            if abs(x) > 1e-4:
                assert x < 0


class TestLaplaceIntegral:
    @pytest.mark.parametrize("tau", [1e-2, 1.0, 1e2])
    def test_gaussian(self, tau):
        res = laplace_integral(Polynomial((0, 0, 1.0)), tau, tol=1e-12)
        assert res.converged
        assert res.value == pytest.approx(math.sqrt(math.pi / (2 * tau)), rel=1e-10)

    def test_quartic_closed_form_and_simpson(self):
        res = laplace_integral(QUARTIC, 1.0, tol=1e-12)
        assert res.value == pytest.approx(quartic_closed_form(0.5), rel=1e-10)
        assert simpson_quartic(0.5) == pytest.approx(quartic_closed_form(0.5), rel=1e-10)

    def test_gaussian_scaling(self):
        p = Polynomial((0, 0, 0.7))
        a, b = laplace_integral(p, 3.0, 1e-12).value, laplace_integral(p, 6.0, 1e-12).value
        assert b / a == pytest.approx(1 / SQRT2, rel=1e-10)

    def test_matches_scipy_on_double_well(self):
        sp = shift_poly(DW, 0.0)
        for tau in (0.05, 1.0, 10.0):
            assert laplace_integral(sp, tau, 1e-12).value == pytest.approx(
                scipy_laplace(sp.p.coeffs, tau), rel=1e-9)

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            laplace_integral(QUARTIC, 0.0)

    @given(domain_polys(), st.floats(-10, 10))
    def test_positive_and_decreasing(self, b, eta):
        sp = shift_poly(b, eta)
        vals = [laplace_integral(sp, t, 1e-10) for t in (0.01, 0.1, 1.0, 10.0, 100.0)]
        for v in vals:
            assert v.value > 0
            assert v.converged and v.abs_error_estimate <= 1e-10 * (1 + v.value)
        assert all(a.value > b.value for a, b in zip(vals, vals[1:]))

    @given(domain_polys(), st.floats(-10, 10), st.floats(0.01, 100))
    def test_refinement_stability(self, b, eta, tau):
        sp = shift_poly(b, eta)
        r1 = laplace_integral(sp, tau, 1e-8)
        r2 = laplace_integral(sp, tau, 5e-9)
        assert abs(r1.value - r2.value) <= r1.abs_error_estimate + 1e-15 * r1.value


class TestNValue:
    def test_quartic(self):
        res = N_value(QUARTIC, 0.0, 1.0)
        assert res.log_N == pytest.approx(math.log(quartic_closed_form(0.5)), rel=1e-10)

    def test_double_well(self):
        res = N_value(DW, 0.0, 10.0)
        # frozen from an independent scipy quadrature of the unshifted integrand
        assert res.log_N == pytest.approx(19.430974071514683, rel=1e-10)
        assert res.log_N == pytest.approx(math.log(direct_N(DW.coeffs, 0.0, 10.0)), rel=1e-9)
        assert res.log_N == pytest.approx(20.0 + math.log(res.I.value), rel=1e-14)

    @pytest.mark.parametrize("b", [DW, Polynomial((0, 0, 0, 1, 0.25)), Polynomial((0, 0, -1, 0, 0, 0, 1 / 6))])
    def test_matches_direct_quadrature(self, b):
        for eta in (-3.0, -0.7, 0.0, 0.4, 2.0):
            for tau in (0.1, 1.0, 3.0):
                if 2 * tau * legendre(b, eta) >= 50:
                    continue
                ref = direct_N(b.coeffs, eta, tau)
                assert math.exp(N_value(b, eta, tau).log_N) == pytest.approx(ref, rel=1e-6)

    def test_large_tau_stays_finite(self):
        res = N_value(DW, 30.0, 1e3)
        assert math.isfinite(res.log_N) and res.log_N > 1e4


class TestComparators:
    def test_bnw_examples(self):
        assert bnw_estimate([1.0]) == 1.0
        assert bnw_estimate([0.0, 0.0, 16.0]) == pytest.approx(0.5)
        with pytest.raises(ValueError):
            bnw_estimate([0.0, 0.0])

    def test_lower_bound_quartic(self):
        assert lower_bound_I(QUARTIC, 0.0, 1.0) == pytest.approx(6 ** -0.25)
        assert lower_bound_I(QUARTIC, 0.0, 1.0) <= math.e * laplace_integral(QUARTIC, 1.0).value

    def test_lower_bound_quadratic_regime(self):
        # lambda(8) = 2, b''(2) = 12: the j = 2 term takes over as tau grows
        ratios = [lower_bound_I(QUARTIC, 8.0, t) * math.sqrt(12 * t) for t in (1e3, 1e6, 1e9)]
        assert 0.7 < ratios[0] < ratios[1] < ratios[2] < 1.0
        assert ratios[2] > 0.97
        tau = 1e3
        assert lower_bound_I(QUARTIC, 8.0, tau) <= math.e * laplace_integral(shift_poly(QUARTIC, 8.0), tau).value

    @given(domain_polys(), st.floats(-20, 20), st.floats(1e-3, 1e3))
    def test_lower_bound_sandwich(self, b, eta, tau):
        I = laplace_integral(shift_poly(b, eta), tau, 1e-10).value
        lb = lower_bound_I(b, eta, tau)
        assert lb <= math.e * I
        # and the estimate is never wildly small either
        assert lb >= I / 50.0

    def test_upper_bound_double_well(self):
        taus = np.logspace(-3, 3, 13)
        chk = upper_bound_check(DW, 0.0, 0.5, taus)
        assert chk.holds and chk.fitted_c > 0
        assert chk.worst_ratio <= 1.05
        assert math.isfinite(chk.tail_sqrt_tau_I)

    def test_upper_bound_convex(self):
        chk = upper_bound_check(QUARTIC, 1.0, 0.5, np.logspace(-3, 3, 13))
        assert chk.holds

    def test_sqrt_tau_I_bounded(self):
        sp = shift_poly(DW, 0.25)
        vals = [math.sqrt(t) * laplace_integral(sp, t).value for t in (1e2, 1e3, 1e4, 1e5)]
        assert max(vals) < 2 * min(vals)
