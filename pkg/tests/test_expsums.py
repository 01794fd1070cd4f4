from __future__ import annotations

import cmath
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lerchlab.arith import get_source, largest_prime_factor, parse_lambda, smooth_count, tau_source
from lerchlab.arith.sources import ScaledSource
from lerchlab.errors import DomainError
from lerchlab.expsums import (
    HarnessGrid,
    debruijn_fit,
    exp_sum,
    fd_membership,
    maier_point,
    mv_harness,
    prime_character_diagnostic,
    smooth_exp_sum,
    update_history,
)

unit = get_source("unit")


def e(x):
    return cmath.exp(2j * math.pi * x)


def brute_smooth_sum(f, x, y, alpha):
    vals = f.values(int(x))
    return sum(vals[n] * e(float(alpha) * n) for n in range(1, int(x) + 1) if largest_prime_factor(n) <= y)


class TestExpSum:
    def test_small_cases(self):
        assert abs(exp_sum(unit, 4, Fraction(1, 2))) < 1e-15
        assert abs(exp_sum(unit, 3, Fraction(1, 3))) < 1e-15
        assert abs(exp_sum(unit, 7, Fraction(1, 5)) - (e(1 / 5) + e(2 / 5))) < 1e-14

    @given(st.integers(1, 3000), st.integers(1, 40), st.integers(1, 40))
    def test_periodic_in_numerator(self, x, a, q):
        f = tau_source()
        assert exp_sum(f, x, Fraction(a, q)) == pytest.approx(exp_sum(f, x, Fraction(a + q, q)), abs=1e-9)

    def test_irrational_direct(self):
        lam = parse_lambda("0.61803398874989484820458683436563811772")
        g = float(lam.to_fraction())
        want = sum(e(g * n) for n in range(1, 1001))
        assert abs(exp_sum(unit, 1000, lam) - want) < 1e-10


class TestSmoothExpSum:
    def test_reduces_when_y_covers_x(self):
        for x in (10, 97, 500):
            assert abs(smooth_exp_sum(unit, x, x, Fraction(2, 7)) - exp_sum(unit, x, Fraction(2, 7))) < 1e-12

    def test_powers_of_two(self):
        assert abs(smooth_exp_sum(unit, 10, 2, Fraction(1, 2)) - 2) < 1e-14

    def test_integer_frequency_counts(self):
        assert abs(smooth_exp_sum(unit, 1000, 7, Fraction(1)) - smooth_count(1000, 7)) < 1e-12

    @given(st.integers(1, 1500), st.integers(2, 60), st.fractions(0, 1, max_denominator=50))
    def test_triangle_and_brute_force(self, x, y, alpha):
        f = tau_source()
        v = smooth_exp_sum(f, x, y, alpha)
        assert abs(v - brute_smooth_sum(f, x, y, alpha)) < 1e-9 * max(1, abs(v))
        vals = f.values(x)
        mass = sum(abs(vals[n]) for n in range(1, x + 1) if largest_prime_factor(n) <= y)
        assert abs(v) <= mass * (1 + 1e-12)


class TestMontgomeryVaughan:
    def test_ratios_finite(self):
        for label in ("unit", "mobius"):
            reps = mv_harness(get_source(label), 5, 2, [10**3, 10**4, 10**5, 10**6])
            assert all(math.isfinite(r.ratio) and r.bound_rhs > 0 for r in reps)
            assert max(r.ratio for r in reps) < 1

    def test_x_below_modulus(self):
        with pytest.raises(DomainError):
            mv_harness(unit, 11, 2, [5])


class TestMaierBound:
    grid = HarnessGrid()

    @pytest.mark.parametrize("label,x,r", [("unit", 10**5, 7), ("character:3:1", 10**5, 11), ("tau", 10**4, 5)])
    def test_ratio_below_guard(self, label, x, r):
        f = get_source(label)
        y = self.grid.y_of(x)
        self.grid.check(x, y, r)
        pts = maier_point(f, x, y, r)
        assert len(pts) == r - 1
        assert max(p.ratio for p in pts) <= 10
        assert all(p.bound_rhs > 0 for p in pts)

    def test_fft_matches_direct(self):
        f = tau_source()
        x, y, r = 3000, 13, 7
        for p in maier_point(f, x, y, r):
            assert abs(p.value - brute_smooth_sum(f, x, y, Fraction(p.s, r))) < 1e-8

    def test_window_rejections(self):
        g = self.grid
        with pytest.raises(DomainError):
            g.check(10**5, 2.0, 7)
        with pytest.raises(DomainError):
            g.check(10**5, 2 * 10**5, 7)
        with pytest.raises(DomainError):
            g.check(10**5, g.y_of(10**5), 9)
        with pytest.raises(DomainError):
            g.check(10**3, g.y_of(10**3), 10**6 + 3)

    def test_trend_keys(self):
        from lerchlab.expsums import MaierSummary

        s = MaierSummary([], {("unit", 7): [0.1, 0.2], ("tau", 7): [0.5, 0.3]})
        assert s.max_by_r() == {7: [0.5, 0.3]}
        assert s.trend_violations(per_source=False) == []
        assert s.trend_violations() == [(("unit", 7), 1, 0.1, 0.2)]

    def test_history_file(self, tmp_path):
        from lerchlab.expsums import MaierSummary

        path = tmp_path / "hist.json"
        s1 = MaierSummary([], {("unit", 7): [0.5, 0.4]})
        assert update_history(path, s1) == []
        s2 = MaierSummary([], {("unit", 7): [0.9]})
        assert update_history(path, s2) == ["unit|7"]


class TestDeBruijn:
    def test_single_point_rejected(self):
        with pytest.raises(DomainError):
            debruijn_fit([10**3], [3])

    def test_fit_covers_grid(self):
        fit = debruijn_fit([10**3, 10**4, 10**5, 10**6], [3, 4, 5, 6])
        assert fit.c > 0 and fit.all_satisfied

    def test_large_smoothness_excluded(self):
        fit = debruijn_fit([10**3, 10**4], [3, 4, 8])
        assert (10**3, 8, 1000) in fit.excluded


class TestFdMembership:
    def test_unit(self):
        assert fd_membership(unit, 1, 10**4).member

    def test_tau(self):
        assert fd_membership(tau_source(), 2, 10**4).member

    def test_scaled_counterexample(self):
        rep = fd_membership(ScaledSource(2.0, unit), 1, 1000)
        assert not rep.member and len(rep.prime_violations) == 168

    def test_prime_character_diagnostic(self):
        rows = prime_character_diagnostic(unit, qs=(3, 5), xs=(10**5, 10**6))
        assert len(rows) == 4
        assert all(0 <= r["ratio"] < 50 for r in rows)
