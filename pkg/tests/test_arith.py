from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lerchlab.arith import (
    cached_sieve,
    convergents,
    euler_phi,
    factorize,
    is_prime,
    largest_prime_factor,
    parse_lambda,
    prime_denominator_approx,
    primitive_root,
    ramanujan_tau,
    sieve_primes,
    smooth_count,
    smooth_enumerate,
    tau_source,
)
from lerchlab.arith.phases import FixedFraction, e_phase, frac_part, lambda_one_minus
from lerchlab.arith.primes import largest_prime_factor_table
from lerchlab.errors import CapacityError, DomainError, NotFoundError

GOLDEN = "0.61803398874989484820458683436563811772"


def trial_division_primes(n):
    return [p for p in range(2, n + 1) if all(p % d for d in range(2, int(p**0.5) + 1))]


class TestSieve:
    def test_small_limits(self):
        assert sieve_primes(10).primes.tolist() == [2, 3, 5, 7]
        assert sieve_primes(2).primes.tolist() == [2]

    def test_prime_count_to_a_million(self):
        assert len(sieve_primes(10**6).primes) == 78498

    def test_matches_trial_division(self):
        assert sieve_primes(3000).primes.tolist() == trial_division_primes(3000)

    def test_primes_in_half_open_range(self):
        sv = cached_sieve(100)
        assert sv.primes_in(10, 30).tolist() == [11, 13, 17, 19, 23, 29]
        assert sv.primes_in(11, 13).tolist() == [13]

    def test_budget(self):
        with pytest.raises(CapacityError):
            sieve_primes(10**10)

    @given(st.integers(2, 10**12))
    def test_miller_rabin_agrees_with_factorization(self, n):
        f = factorize(n)
        assert math.prod(p**e for p, e in f.items()) == n
        assert is_prime(n) == (f == {n: 1})


class TestLargestPrimeFactor:
    def test_values(self):
        assert largest_prime_factor(1) == 1
        assert largest_prime_factor(12) == 3
        assert largest_prime_factor(97) == 97

    def test_table_matches_scalar(self):
        t = largest_prime_factor_table(2000)
        assert all(t[n] == largest_prime_factor(n) for n in range(1, 2001))

    @given(st.integers(1, 10**6))
    def test_euler_phi_multiplicative_formula(self, n):
        phi = n
        for p in factorize(n):
            phi = phi // p * (p - 1)
        assert euler_phi(n) == phi


class TestSmooth:
    def test_known_counts(self):
        assert smooth_count(10, 2) == 4
        assert smooth_count(100, 5) == 34
        assert smooth_count(50.7, 60) == 50

    def test_enumeration(self):
        assert smooth_enumerate(10, 2).tolist() == [1, 2, 4, 8]
        assert smooth_enumerate(7, 7).tolist() == list(range(1, 8))
        assert len(smooth_enumerate(100, 5)) == 34

    @given(st.integers(1, 10**5), st.integers(2, 400))
    def test_count_matches_enumeration_and_brute_force(self, x, y):
        ys = smooth_enumerate(x, y)
        assert smooth_count(x, y) == len(ys) or y >= x
        assert np.all(np.diff(ys) > 0)
        if x <= 3000:
            brute = [n for n in range(1, x + 1) if largest_prime_factor(n) <= y]
            assert ys.tolist() == brute

    def test_buchstab_recursion_small(self):
        P = largest_prime_factor_table(5000)
        for x in range(1, 5001, 7):
            for y in (2, 3, 11, 50):
                lhs = smooth_count(x, y) if y < x else x
                rhs = 1 + sum(smooth_count(x // p, p) if p < x // p else x // p
                              for p in trial_division_primes(min(y, x)))
                assert lhs == rhs == int(np.sum(P[1 : x + 1] <= y))


def euclid_convergents(num, den, count):
    """Convergents from the Euclidean algorithm on an exact fraction."""
    a, out = [], []
    while den and len(a) < count + 2:
        q, r = divmod(num, den)
        a.append(q)
        num, den = den, r
    h0, h1, k0, k1 = 0, 1, 1, 0
    for ai in a:
        h0, h1 = h1, ai * h1 + h0
        k0, k1 = k1, ai * k1 + k0
        out.append(Fraction(h1, k1))
    return out


class TestPhases:
    def test_rational_convergents_terminate(self):
        assert convergents(Fraction(1, 3), 10) == [Fraction(0, 1), Fraction(1, 3)]

    def test_golden_ratio_convergents(self):
        assert convergents(parse_lambda(GOLDEN), 6)[:6] == [
            Fraction(1, 1), Fraction(1, 2), Fraction(2, 3), Fraction(3, 5), Fraction(5, 8), Fraction(8, 13)
        ]

    def test_convergents_match_euclid_oracle(self):
        lam = parse_lambda(GOLDEN)
        exact = lam.to_fraction()
        ref = euclid_convergents(exact.numerator, exact.denominator, 30)
        ours = convergents(lam, 25)
        # the oracle's first two entries 0/1, 1/1 share denominator 1; later ones coincide
        assert ours[1:20] == ref[2:21]

    @given(st.fractions(min_value=Fraction(1, 10**6), max_value=1 - Fraction(1, 10**6), max_denominator=10**9))
    def test_convergent_properties(self, lam):
        cs = convergents(lam, 12)
        dens = [c.denominator for c in cs]
        assert dens == sorted(set(dens))
        for c in cs:
            assert abs(lam - c) < Fraction(1, c.denominator**2) or lam == c
        for a, b in zip(cs[1:], cs[2:]):
            assert (a - lam) * (b - lam) <= 0

    def test_prime_denominator_for_log10_2(self):
        lam = parse_lambda("0.30102999566398119521373889472449302677")
        a, q = prime_denominator_approx(lam, 0.2, 2, 1000)
        assert is_prime(q) and math.gcd(a, q) == 1
        assert abs(lam.to_fraction() - Fraction(a, q)) < Fraction(q) ** -1 * q**-0.2
        assert prime_denominator_approx(lam, 0.2, 50, 500) == (16, 53)

    def test_prime_denominator_near_one_half_skips_two(self):
        lam = parse_lambda("0.5000000000000000000000000000000001")
        a, q = prime_denominator_approx(lam, 0.1, 2, 50)
        assert q > 2 and math.gcd(a, q) == 1

    def test_prime_denominator_not_found(self):
        lam = parse_lambda(GOLDEN)
        with pytest.raises(NotFoundError):
            prime_denominator_approx(lam, 0.3, 14, 16)

    def test_fixed_point_phase_has_no_drift(self):
        lam = parse_lambda(GOLDEN)
        n = np.array([1, 10**6, 10**7 - 1, 2**31 - 1])
        exact = lam.to_fraction()
        want = [float((exact * int(k)) % 1) for k in n]
        assert np.allclose(frac_part(lam, n), want, atol=1e-15, rtol=0)

    def test_rational_phase_exact(self):
        n = np.arange(1, 50)
        assert np.allclose(e_phase(Fraction(1, 4), n), np.exp(0.5j * np.pi * n), atol=1e-15)

    def test_one_minus(self):
        lam = parse_lambda(GOLDEN)
        assert lambda_one_minus(lam).to_fraction() + lam.to_fraction() == 1
        assert lambda_one_minus(Fraction(1, 5)) == Fraction(4, 5)

    def test_short_decimal_warns(self):
        with pytest.warns(UserWarning):
            parse_lambda("0.3010")

    @given(st.integers(0, 2**128 - 1))
    def test_fixed_fraction_roundtrip(self, raw):
        f = FixedFraction(raw)
        assert FixedFraction.from_fraction(f.to_fraction()).raw == raw


class TestPrimitiveRoot:
    def test_small_cases(self):
        g, nu = primitive_root(5)
        assert g == 2 and nu[4] == 2 and nu[1] == 0
        assert primitive_root(7)[0] == 3
        with pytest.raises(DomainError):
            primitive_root(9)

    @pytest.mark.parametrize("q", [3, 11, 13, 97, 101, 1009])
    def test_least_generator_and_log_law(self, q):
        g, nu = primitive_root(q)
        orders = [min(k for k in range(1, q) if pow(x, k, q) == 1) for x in range(2, g + 1)]
        assert orders[-1] == q - 1 and all(o < q - 1 for o in orders[:-1])
        assert sorted(nu[1:].tolist()) == list(range(q - 1))
        rng = np.random.default_rng(q)
        for m, n in rng.integers(1, q, size=(100, 2)):
            assert nu[m * n % q] == (nu[m] + nu[n]) % (q - 1)


def naive_delta(N):
    """q prod (1 - q^n)^24 by repeated integer polynomial multiplication."""
    c = [0] * (N + 1)
    c[1] = 1
    for n in range(1, N + 1):
        for _ in range(24):
            for i in range(N, n - 1, -1):
                c[i] -= c[i - n]
    return c[1:]


class TestTau:
    def test_against_naive_product(self):
        assert ramanujan_tau(60) == naive_delta(60)

    def test_known_values(self):
        assert ramanujan_tau(10) == [1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920]

    def test_multiplicativity_and_hecke(self):
        t = [0] + ramanujan_tau(3000)
        assert t[6] == t[2] * t[3]
        for m, n in [(4, 9), (5, 49), (7, 11), (16, 27)]:
            assert t[m * n] == t[m] * t[n]
        for p in (2, 3, 5, 7, 11, 13):
            assert t[p * p] == t[p] ** 2 - p**11

    def test_normalized_source(self):
        f = tau_source()
        v = f.values(10**4)
        assert v[1] == 1
        primes = cached_sieve(10**4).primes_in(1, 10**4)
        assert np.all(np.abs(f.prime_values(primes)) <= 2)
        roots = f.local_roots(2)
        assert abs(v[4] - (roots[0] ** 2 + roots[0] * roots[1] + roots[1] ** 2)) < 1e-12
