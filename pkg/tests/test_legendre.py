import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import brute_legendre, brute_min, grid_biconjugate, slope_scan_gaps
from conftest import random_domain_poly
from tubekernel import (
    EnvelopeTable,
    Polynomial,
    asymptotic_ratios,
    biconjugate,
    derivative,
    gap_intervals,
    lambda_of,
    legendre,
    minimizer_set,
    minimizers_batch,
)

SQRT2 = math.sqrt(2.0)
DW = Polynomial((0, 0, -1, 0, 0.25))
QUARTIC = Polynomial((0, 0, 0, 0, 0.25))
SEXTIC_WELL = Polynomial((0, 0, -1, 0, 0, 0, 1 / 6))
CUBIC_TILT = Polynomial((0, 0, 0, 1, 0.25))


def domain_polys():
    """Hypothesis strategy: b of degree 4, 6 or 8 with leading 1/(2n)."""
    return st.integers(2, 4).flatmap(lambda n: st.lists(
        st.floats(-3, 3, allow_nan=False), min_size=2 * n - 2, max_size=2 * n - 2).map(
        lambda c: Polynomial([0.0, 0.0, *c, 1.0 / (2 * n)])))


class TestMinimizerSet:
    def test_quartic_unit_slope(self):
        ms = minimizer_set(QUARTIC, 1.0)
        assert ms.minimizers == (pytest.approx(1.0),)
        assert ms.min_value == pytest.approx(-0.75)

    def test_double_well_tie(self):
        ms = minimizer_set(DW, 0.0)
        np.testing.assert_allclose(ms.minimizers, [-SQRT2, SQRT2], atol=1e-12)
        assert ms.sigma == pytest.approx(-SQRT2) and ms.lam == pytest.approx(SQRT2)
        assert ms.min_value == pytest.approx(-1.0)

    def test_double_well_steep(self):
        # largest real root of x^3 - 2x = 10, frozen from the grid+Newton oracle
        ms = minimizer_set(DW, 10.0)
        assert ms.minimizers == (pytest.approx(2.46204478758741, abs=1e-12),)
        x, v = brute_min(DW.coeffs, 10.0)
        assert ms.lam == pytest.approx(x, abs=1e-10)
        assert ms.min_value == pytest.approx(v, rel=1e-12)

    @given(domain_polys(), st.floats(-50, 50))
    def test_members_are_critical_and_tied(self, b, eta):
        ms = minimizer_set(b, eta)
        d = derivative(b)
        scale = 1 + abs(ms.min_value)
        assert ms.sigma == ms.minimizers[0] and ms.lam == ms.minimizers[-1]
        for m in ms.minimizers:
            assert abs(d(m) - eta) <= 1e-7 * (1 + abs(eta))
            assert abs(b(m) - eta * m - ms.min_value) <= 1e-9 * scale

    def test_batch_matches_scalar(self):
        etas = np.linspace(-7, 7, 29)
        sig, lam, mn = minimizers_batch(CUBIC_TILT, etas)
        for e, s, l, m in zip(etas, sig, lam, mn):
            ms = minimizer_set(CUBIC_TILT, e)
            assert (s, l) == (pytest.approx(ms.sigma), pytest.approx(ms.lam))
            assert m == pytest.approx(ms.min_value)


class TestLegendre:
    def test_quartic_closed_form(self):
        assert legendre(QUARTIC, 1.0) == pytest.approx(0.75)
        etas = np.array([-8.0, -1.0, 0.5, 27.0])
        np.testing.assert_allclose(legendre(QUARTIC, etas), 0.75 * np.abs(etas) ** (4 / 3), rtol=1e-13)

    def test_double_well_at_zero(self):
        assert legendre(DW, 0.0) == pytest.approx(1.0, rel=1e-14)
        assert brute_legendre(DW.coeffs, 0.0) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("x0", [-3.0, -2.0, 1.5, 2.5])
    def test_envelope_condition(self, x0):
        eta = derivative(DW)(x0)
        assert legendre(DW, eta) == pytest.approx(eta * x0 - DW(x0), rel=1e-12)

    def test_matches_brute_force_on_random_polynomials(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            b = random_domain_poly(rng, int(rng.integers(2, 5)))
            for eta in rng.uniform(-100, 100, 20):
                ref = brute_legendre(b.coeffs, eta)
                assert legendre(b, eta) == pytest.approx(ref, rel=1e-6, abs=1e-9)

    @given(domain_polys(), st.lists(st.floats(-60, 60), min_size=3, max_size=3, unique=True))
    def test_convex_chord(self, b, etas):
        e1, e2, e3 = sorted(etas)
        if e3 - e1 < 1e-6:
            return
        t = (e2 - e1) / (e3 - e1)
        f1, f2, f3 = (legendre(b, e) for e in (e1, e2, e3))
        scale = 1 + abs(f1) + abs(f2) + abs(f3)
        assert f2 <= (1 - t) * f1 + t * f3 + 1e-9 * scale


class TestGaps:
    def test_quartic_has_none(self):
        assert len(gap_intervals(QUARTIC)) == 0

    def test_double_well(self):
        env = gap_intervals(DW)
        (g,) = env.gaps
        assert abs(g.c) <= 1e-8
        assert g.sigma == pytest.approx(-SQRT2, abs=1e-6) and g.lam == pytest.approx(SQRT2, abs=1e-6)
        assert g.bridge_value == pytest.approx(-1.0, abs=1e-9)

    def test_sextic_well(self):
        (g,) = gap_intervals(SEXTIC_WELL).gaps
        r = 2 ** 0.25
        assert abs(g.c) <= 1e-8
        assert g.sigma == pytest.approx(-r, abs=1e-6) and g.lam == pytest.approx(r, abs=1e-6)

    def test_cubic_tilt_bitangent(self):
        # x^3 + 3x^2 = 2 factors as (x + 1)(x^2 + 2x - 2)
        (g,) = gap_intervals(CUBIC_TILT).gaps
        assert g.c == pytest.approx(2.0, abs=1e-8)
        assert g.sigma == pytest.approx(-1 - math.sqrt(3), abs=1e-8)
        assert g.lam == pytest.approx(-1 + math.sqrt(3), abs=1e-8)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_slope_scan(self, seed):
        rng = np.random.default_rng(100 + seed)
        b = random_domain_poly(rng, 3, spread=1.5)
        ref = slope_scan_gaps(b.coeffs, -5, 5, 2e-3)
        env = gap_intervals(b)
        found = [g for g in env.gaps if -5 < g.c < 5]
        assert len(found) == len(ref)
        for g, (c, s, l) in zip(found, ref):
            assert g.c == pytest.approx(c, abs=1e-7)
            assert g.sigma == pytest.approx(s, abs=1e-6) and g.lam == pytest.approx(l, abs=1e-6)

    @given(domain_polys())
    def test_table_invariants(self, b):
        env = gap_intervals(b)
        n = b.degree // 2
        assert len(env) <= n - 1
        cs = [g.c for g in env.gaps]
        assert cs == sorted(cs)
        d = derivative(b)
        for g in env.gaps:
            sc = 1 + abs(g.c)
            assert abs(d(g.sigma) - g.c) <= 1e-6 * sc and abs(d(g.lam) - g.c) <= 1e-6 * sc
            chord = b(g.lam) - b(g.sigma) - g.c * (g.lam - g.sigma)
            assert abs(chord) <= 1e-8 * (1 + abs(b(g.lam)) + abs(b(g.sigma)))
            # lambda(c) attains the right endpoint
            assert minimizer_set(b, g.c).lam == pytest.approx(g.lam, abs=1e-6)
        for g0, g1 in zip(env.gaps, env.gaps[1:]):
            assert g0.lam <= g1.sigma

    def test_json_round_trip(self):
        env = gap_intervals(CUBIC_TILT)
        back = EnvelopeTable.from_dict(json.loads(json.dumps(env.to_dict())))
        assert back.slopes == env.slopes
        assert set(env.to_dict()["gaps"][0]) == {"c", "sigma", "lambda", "bridge_value"}


class TestStructure:
    def test_lambda_monotone_and_inverse(self):
        b = CUBIC_TILT
        etas = np.sort(np.random.default_rng(5).uniform(-100, 100, 1000))
        lam = lambda_of(b, etas)
        assert np.all(np.diff(lam) > 0)
        d = derivative(b)
        assert np.all(np.abs(d(lam) - etas) <= 1e-8 * (1 + np.abs(etas)))

    @pytest.mark.parametrize("b", [DW, SEXTIC_WELL, CUBIC_TILT], ids=["dw", "sextic", "tilt"])
    def test_lambda_avoids_gaps(self, b):
        env = gap_intervals(b)
        lam = lambda_of(b, np.random.default_rng(9).uniform(-100, 100, 10_000))
        for g in env.gaps:
            assert not np.any((lam >= g.sigma + 1e-8) & (lam < g.lam - 1e-8))


class TestBiconjugate:
    def test_examples(self, double_well_env):
        assert biconjugate(DW, double_well_env, 0.0) == pytest.approx(-1.0, abs=1e-12)
        assert biconjugate(DW, double_well_env, 2.0) == pytest.approx(DW(2.0), abs=1e-15)
        env = gap_intervals(QUARTIC)
        us = np.linspace(-3, 3, 13)
        np.testing.assert_array_equal(biconjugate(QUARTIC, env, us), QUARTIC(us))

    @pytest.mark.parametrize("u", [-2.0, -1.0, 0.0, 0.7, 1.3, 2.5])
    def test_double_conjugate_oracle(self, double_well_env, u):
        ref = grid_biconjugate(DW.coeffs, u, points=2001)
        assert biconjugate(DW, double_well_env, u) == pytest.approx(ref, abs=1e-5)

    @given(domain_polys(), st.lists(st.floats(-4, 4), min_size=3, max_size=3, unique=True))
    def test_below_b_convex_and_equal_off_gaps(self, b, us):
        env = gap_intervals(b)
        u1, u2, u3 = sorted(us)
        vals = [biconjugate(b, env, u) for u in (u1, u2, u3)]
        for u, v in zip((u1, u2, u3), vals):
            scale = 1 + abs(b(u))
            assert v <= b(u) + 1e-10 * scale
            if env.gap_at(u) is None:
                assert v == pytest.approx(b(u), abs=1e-10 * scale)
        if u3 - u1 > 1e-9:
            t = (u2 - u1) / (u3 - u1)
            assert vals[1] <= (1 - t) * vals[0] + t * vals[2] + 1e-9 * (1 + sum(map(abs, vals)))


class TestAsymptotics:
    def test_quartic_exact(self):
        assert asymptotic_ratios(QUARTIC, 5.0).lambda_ratio == pytest.approx(1.0, abs=1e-13)

    @pytest.mark.parametrize("b,eta", [(CUBIC_TILT, 1e6), (SEXTIC_WELL, 1e6), (SEXTIC_WELL, -1e6)])
    def test_within_two_percent(self, b, eta):
        r = asymptotic_ratios(b, eta)
        assert all(abs(v - 1) <= 0.02 for v in r.all_ratios())

    def test_general_leading_coefficient(self):
        b = Polynomial((0, 0, 1, 0, 3.0))
        r = asymptotic_ratios(b, 1e8)
        assert all(abs(v - 1) <= 0.01 for v in r.all_ratios())

    def test_zero_slope_rejected(self):
        with pytest.raises(ValueError):
            asymptotic_ratios(DW, 0.0)
