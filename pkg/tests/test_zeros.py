from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lerchlab.arith import get_source, parse_lambda
from lerchlab.errors import BoundaryZeroError, DomainError
from lerchlab.series import TwistSpec
from lerchlab.zeros import (
    Rectangle,
    circle_winding,
    continuity_experiment,
    dirichlet_polynomial,
    find_zeros,
    hurwitz_evaluator,
    rational_twist_evaluator,
    sigma_star_estimate,
    symmetry_check,
    twist_evaluator,
    winding_number,
)

LOG2_3 = math.log(3) / math.log(2)
SPACING = 2 * math.pi / math.log(2)


@pytest.fixture
def poly():
    return dirichlet_polynomial("1-3*2^-s")


class TestWinding:
    def test_single_root(self, poly):
        assert winding_number(poly, Rectangle(1.4, 1.8, -1, 1)) == 1

    def test_empty_region(self, poly):
        assert winding_number(poly, Rectangle(2, 3, -1, 1)) == 0

    def test_two_roots(self, poly):
        assert winding_number(poly, Rectangle(1.4, 1.8, -1, 10)) == 2

    def test_boundary_zero_detected(self, poly):
        with pytest.raises(BoundaryZeroError):
            winding_number(poly, Rectangle(LOG2_3, 1.8, -1, 1))

    def test_resolution_stable(self, poly):
        r = Rectangle(1.4, 1.8, -1, 30)
        assert winding_number(poly, r, n_per_edge=16) == winding_number(poly, r, n_per_edge=256) == 4

    @given(st.floats(1.41, 1.79), st.floats(-0.9, 9.9))
    def test_subdivision_additive(self, sc, tc):
        poly = dirichlet_polynomial("1-3*2^-s")
        r = Rectangle(1.4, 1.8, -1, 10)
        cells = [Rectangle(1.4, sc, -1, tc), Rectangle(sc, 1.8, -1, tc),
                 Rectangle(1.4, sc, tc, 10), Rectangle(sc, 1.8, tc, 10)]
        try:
            parts = [winding_number(poly, c) for c in cells]
        except BoundaryZeroError:
            return
        assert sum(parts) == winding_number(poly, r)

    def test_polynomial_parser(self):
        F = dirichlet_polynomial("1+0.5*5^-s-2^-s")
        s = 1.3 + 2j
        assert abs(F(s) - (1 + 0.5 * 5**-s - 2**-s)) < 1e-15
        with pytest.raises(DomainError):
            dirichlet_polynomial("1-3*x")


class TestFindZeros:
    def test_closed_form_roots(self, poly):
        rep = find_zeros(poly, Rectangle(1.4, 1.8, -1, 10))
        assert rep.consistent and rep.winding == 2
        for k, z in enumerate(rep.zeros):
            assert abs(z.s - complex(LOG2_3, k * SPACING)) < 1e-9
            assert z.abs_value < 1e-10 and z.winding == 1

    @pytest.mark.parametrize("T", [10, 20, 40])
    def test_count_formula(self, poly, T):
        rep = find_zeros(poly, Rectangle(1.4, 1.8, -0.5, T))
        assert len(rep.zeros) == math.floor(T * math.log(2) / (2 * math.pi)) + 1

    def test_zeta_has_no_zeros(self):
        F = twist_evaluator("unit", Fraction(1))
        rep = find_zeros(F, Rectangle(1.1, 1.5, 0, 30))
        assert rep.winding == 0 and rep.zeros == []
        rep = find_zeros(F, Rectangle(1.05, 1.5, 0.5, 50))
        assert rep.winding == 0

    def test_circle_check(self, poly):
        assert circle_winding(poly, complex(LOG2_3, 0), 1e-3) == 1
        assert circle_winding(poly, complex(LOG2_3 + 0.1, 0), 1e-3) == 0

    def test_csv(self, poly):
        rep = find_zeros(poly, Rectangle(1.4, 1.8, -1, 1))
        lines = rep.to_csv().splitlines()
        assert lines[0] == "sigma,t,abs_F,radius" and len(lines) == 2

    def test_hurwitz_zero_self_consistency(self):
        # alpha = 0.9: zeros of zeta(s, alpha) off the line appear at moderate height
        F = hurwitz_evaluator(0.9)
        rep = find_zeros(F, Rectangle(0.5, 1.05, 1, 60))
        for z in rep.zeros:
            assert z.abs_value < 1e-9 and circle_winding(F, z.s, 1e-3) == 1
        assert rep.winding == len(rep.zeros)


class TestSigmaStar:
    def test_zeta_none_found(self):
        est = sigma_star_estimate(twist_evaluator("unit", Fraction(1)), (1.01, 1.2), 40.0, budget=50_000)
        assert est.status == "none-found" and est.lower_bound is None

    def test_alternating_zeta_none_found(self):
        est = sigma_star_estimate(rational_twist_evaluator(1, 2), (1.01, 1.2), 40.0, budget=50_000)
        assert est.status == "none-found"

    def test_polynomial_lower_bound(self, poly):
        est = sigma_star_estimate(poly, (1.2, 1.7), 12.0, budget=100_000, band=0.25)
        assert est.status == "zero-found"
        assert abs(est.lower_bound - LOG2_3) < 1e-9
        assert est.transcript_jsonl().count("\n") == len(est.transcript)

    def test_continuity_rejects_half(self):
        with pytest.raises(DomainError):
            continuity_experiment("unit", Fraction(1, 2))

    def test_continuity_constant_sequence(self):
        rows = continuity_experiment("unit", Fraction(1, 3), 3, t_max=20.0, budget=20_000)
        assert len(rows) == 4
        assert len({(r["status"], r["lower_bound"]) for r in rows}) == 1
        # the box holds a zero of sum e(n/3) n^-s to the right of sigma = 1
        assert rows[0]["status"] == "zero-found" and rows[0]["lower_bound"] > 1


class TestSymmetry:
    unit = get_source("unit")

    def test_fifths(self):
        assert symmetry_check(self.unit, TwistSpec(Fraction(1, 5)), [1.5 + 3j]).passed

    def test_half_real_on_axis(self):
        from lerchlab.series import twisted_eval

        v = twisted_eval(self.unit, TwistSpec(Fraction(1, 2)), 1.7).value
        assert abs(v.imag) < 1e-14

    def test_decimal_lambda(self):
        rep = symmetry_check(self.unit, TwistSpec(parse_lambda("0.30000000000000000000000000000000000000")), [2 + 1j])
        assert rep.passed and rep.max_deviation < 1e-12

    def test_complex_source_rejected(self):
        with pytest.raises(DomainError):
            symmetry_check(get_source("character:5:1"), TwistSpec(Fraction(1, 5)), [2.0])

    def test_mirror_zeros(self):
        F = rational_twist_evaluator(1, 5)
        G = rational_twist_evaluator(4, 5)
        s = np.array([1.2 + 3j, 0.7 - 4j, 1.05 + 20j])
        assert np.abs(G(s.conj()) - np.conj(F(s))).max() < 1e-12
