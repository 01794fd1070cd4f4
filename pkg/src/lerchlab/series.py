"""Dirichlet series with additive twists: direct sums, tails, and identities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .arith.phases import (
    FixedFraction,
    Lambda,
    as_fraction,
    e_phase,
    frac_part,
    lambda_divide,
)
from .arith.primes import euler_phi
from .arith.sources import CoefficientSource, multiplicative_values
from .characters import (
    DirichletCharacter,
    character_family,
    gauss_sum,
    small_modulus_family,
)
from .errors import DomainError, InvariantError, NumericalGuardError
from .hurwitz import hurwitz_vec

SIGMA_MIN = 0.02
MAX_TERMS = 3 * 10**7
_CHUNK = 1 << 20


@dataclass(frozen=True)
class ComplexPoint:
    sigma: float
    t: float

    @property
    def s(self) -> complex:
        return complex(self.sigma, self.t)


@dataclass(frozen=True)
class TwistSpec:
    lam: Lambda
    m: int = 1
    k: int = 1

    def __post_init__(self):
        if self.k < 1 or not 1 <= self.m <= self.k or math.gcd(self.m, self.k) != 1:
            raise DomainError(f"bad residue class m={self.m} mod k={self.k}")
        if isinstance(self.lam, Fraction) and not 0 < self.lam <= 1:
            raise DomainError("lambda must lie in (0, 1]")
        if isinstance(self.lam, FixedFraction) and self.lam.raw == 0:
            raise DomainError("lambda must lie in (0, 1]")


@dataclass(frozen=True)
class EvalResult:
    value: complex
    N: int
    tail_bound: float
    flag: str  # "rigorous" or "heuristic"
    error_estimate: float = 0.0

    def to_json(self, **extra) -> dict:
        d = dict(extra)
        d.update(value=[self.value.real, self.value.imag], N=self.N, tail=self.tail_bound, flag=self.flag)
        return d


@dataclass
class PhaseAssignment:
    """phi(p) = p^(-i t_p); unlisted primes get t_p = 0, or pi/log p above `pi_above`."""

    t: dict[int, float] = field(default_factory=dict)
    pi_above: float | None = None

    def t_of(self, p: int) -> float:
        if p in self.t:
            return self.t[p]
        if self.pi_above is not None and p > self.pi_above:
            return math.pi / math.log(p)
        return 0.0

    def phi_primes(self, primes: np.ndarray) -> np.ndarray:
        primes = np.asarray(primes, dtype=np.int64)
        logp = np.log(primes.astype(np.float64))
        t = np.zeros(len(primes))
        if self.pi_above is not None:
            t = np.where(primes > self.pi_above, np.pi / logp, 0.0)
        if self.t:
            keys = np.fromiter(self.t.keys(), dtype=np.int64)
            vals = np.fromiter(self.t.values(), dtype=np.float64)
            order = np.argsort(keys)
            keys, vals = keys[order], vals[order]
            pos = np.searchsorted(keys, primes)
            pos = np.minimum(pos, len(keys) - 1)
            hit = keys[pos] == primes
            t = np.where(hit, vals[pos], t)
        return np.exp(-1j * t * logp)


class _PhaseSource(CoefficientSource):
    completely_multiplicative = True

    def __init__(self, phases: PhaseAssignment):
        self.phases = phases
        self.label = "phi"

    def value_at_prime_power(self, p, h):
        return complex(np.exp(-1j * self.phases.t_of(p) * h * math.log(p)))

    def prime_values(self, primes):
        return self.phases.phi_primes(primes)


def csum(x: np.ndarray) -> complex:
    """Correctly rounded sum of a complex array."""
    if x.size <= 1 << 12:
        return complex(np.sum(x))
    return complex(math.fsum(x.real), math.fsum(x.imag))


def _check_sigma(s: complex, sigma_min: float = SIGMA_MIN) -> None:
    if s.real < 1 + sigma_min - 1e-15:
        raise DomainError(f"direct summation needs sigma >= {1 + sigma_min}, got {s.real}")


def _distance_to_integer(lam: Lambda, L: int) -> float:
    fr = float(frac_part(lam, np.array([L]))[0])
    if isinstance(lam, Fraction) and (lam * L).denominator == 1:
        return 0.0
    return min(fr, 1.0 - fr)


def _geometric_coeffs(z: complex, count: int) -> np.ndarray:
    """Taylor coefficients of 1 / (1 - z e^u)."""
    c = np.zeros(count, dtype=np.complex128)
    c[0] = 1 / (1 - z)
    fact = [1.0 / math.factorial(i) for i in range(count + 1)]
    for r in range(1, count):
        acc = sum(c[r - i] * fact[i] for i in range(1, r + 1))
        c[r] = z / (1 - z) * acc
    return c


def _direct_block(table: np.ndarray, lam: Lambda | None, s: complex, lo: int, hi: int, shift: float):
    """Sum of table[n mod L] e(lam n) (n + shift)^-s over lo <= n < hi."""
    L = len(table)
    total_re, total_im = [], []
    absmass = 0.0
    for a in range(lo, hi, _CHUNK):
        n = np.arange(a, min(hi, a + _CHUNK), dtype=np.int64)
        c = table[n % L]
        keep = c != 0
        n, c = n[keep], c[keep]
        if n.size == 0:
            continue
        ln = np.log(n + shift)
        term = c * np.exp(-s * ln)
        if lam is not None:
            term = term * e_phase(lam, n)
        total_re.append(math.fsum(term.real))
        total_im.append(math.fsum(term.imag))
        absmass += float(np.abs(term).sum())
    return complex(math.fsum(total_re), math.fsum(total_im)), absmass


def periodic_twisted_sum(
    table: np.ndarray,
    lam: Lambda | None,
    s: complex,
    *,
    shift: float = 0.0,
    start: int = 1,
    N: int | None = None,
    eps: float = 1e-15,
) -> EvalResult:
    """sum_{n >= start} table[n mod L] e(lam n) (n + shift)^-s for a periodic table.

    Direct sum to a multiple of L, then an exact tail: Hurwitz values when
    e(lam L) = 1, otherwise the expansion of sum_j z^j g(j) in derivatives of g.
    Rigorous bound on the uncorrected tail comes from Abel summation.
    """
    s = complex(s)
    table = np.asarray(table, dtype=np.complex128)
    L = len(table)
    dl = 0.0 if lam is None else _distance_to_integer(lam, L)
    if dl == 0.0:
        N0 = L * max(1, math.ceil(200 / L))
    else:
        if dl < 1e-9:
            raise NumericalGuardError("lambda * period is too close to an integer")
        N0 = L * math.ceil(0.7 * (abs(s) + 30) / dl / L) + L * math.ceil(64 / L)
    if N is not None:
        N0 = max(N0, L * math.ceil(N / L))
    if N0 > MAX_TERMS:
        raise NumericalGuardError(f"truncation {N0} exceeds term budget {MAX_TERMS}")
    partial, absmass = _direct_block(table, lam, s, start, start + N0, shift)
    n0 = start + N0 + np.arange(L)
    c0 = table[n0 % L]
    if lam is not None:
        c0 = c0 * e_phase(lam, n0)
    live = c0 != 0
    x0 = (n0 + shift).astype(np.float64)
    if dl == 0.0:
        hz, herr = hurwitz_vec(s, x0[live] / L)
        scale = L ** (-s)
        tail = csum(c0[live] * hz * scale)
        est = float(np.sum(np.abs(c0[live]) * herr)) * abs(scale)
        bound = est + 1e-16 * (absmass + abs(tail))
        return EvalResult(partial + tail, N0, bound, "rigorous", est)
    z = complex(e_phase(lam, np.array([L]))[0])
    R = 80
    coeffs = _geometric_coeffs(z, R)
    xs = x0[live]
    base = c0[live] * np.exp(-s * np.log(xs))
    prod = np.ones(len(xs), dtype=np.complex128)
    tail = 0j
    last = prev = 0.0
    for r in range(R):
        term = coeffs[r] * prod * base
        tail += csum(term)
        prev, last = last, float(np.abs(term).sum())
        # coefficients can vanish at alternate orders (z = -1), so test two in a row
        if r > 2 and max(last, prev) < 1e-18 * max(abs(tail), 1e-300):
            break
        prod = prod * (-s - r) * L / xs
    else:
        if max(last, prev) > 1e-12 * max(abs(tail), 1e-300):
            raise NumericalGuardError("tail expansion did not converge")
    B = float(np.abs(table).sum()) / math.sin(math.pi * dl)
    xmin = float(xs.min()) if len(xs) else float(start + N0 + shift)
    abel = B * xmin ** (-s.real) * (1 + abs(s) / s.real)
    bound = abel + abs(tail) + 1e-16 * absmass
    return EvalResult(partial + tail, N0, bound, "rigorous", max(last, prev) + 1e-16 * absmass)


def _periodic_coefficients(f: CoefficientSource, m: int, k: int, mult: np.ndarray | None = None):
    """Table of f(n) [n == m mod k] mult(n) over one common period."""
    P = f.period
    L = math.lcm(P, k, 1 if mult is None else len(mult))
    n = np.arange(L)
    tab = f.periodic_table()[n % P] * (n % k == m % k)
    if mult is not None:
        tab = tab * mult[n % len(mult)]
    return tab


def _general_direct(
    values: np.ndarray, lam: Lambda | None, s: complex, mask: np.ndarray | None
) -> EvalResult:
    N = len(values) - 1
    n = np.arange(1, N + 1, dtype=np.int64)
    c = values[1:]
    if mask is not None:
        c = c * mask[1:]
    term = c * np.exp(-s * np.log(n.astype(np.float64)))
    if lam is not None:
        term = term * e_phase(lam, n)
    total = csum(term)
    block = term[int(0.9 * N) :]
    tail = 10 * abs(csum(block))
    return EvalResult(total, N, tail, "heuristic", tail)


def _heuristic_N(f: CoefficientSource, s: complex, eps: float, cap: int) -> int:
    theta = f.bound_theta
    ex = s.real - 1 - theta
    if ex <= 0:
        return cap
    N = (f.degree / (ex * eps)) ** (1 / ex)
    return int(min(cap, max(1000, N)))


def local_factor(f: CoefficientSource, p: int, chi, s: complex) -> complex:
    """F_p(s, chi), by the power series and by the product over local roots."""
    s = complex(s)
    x = complex(p ** (-s))
    if abs(x) >= 1:
        raise DomainError("local factor needs |p^-s| < 1")
    c = 1.0 + 0j if chi is None else complex(chi(p) if callable(chi) else chi[p % len(chi)])
    if c == 0:
        return 1.0 + 0j
    total, h, term_mag = 1.0 + 0j, 1, 1.0
    while term_mag > 1e-18 and h < 4000:
        term = f.value_at_prime_power(p, h) * (c * x) ** h
        total += term
        term_mag = abs(x) ** h * max(1.0, f.degree * h ** (f.degree - 1))
        h += 1
    try:
        roots = f.local_roots(p)
    except DomainError:
        return total
    prod = complex(np.prod(1 / (1 - roots * c * x)))
    if abs(prod - total) > 1e-10 * max(1.0, abs(prod)):
        raise InvariantError(f"{f.label}: local factor mismatch at p={p} ({abs(prod - total):.2e})")
    return prod


def series_eval(
    f: CoefficientSource,
    chi=None,
    s: complex = 2.0,
    eps: float = 1e-12,
    *,
    N: int | None = None,
    sigma_min: float = SIGMA_MIN,
) -> EvalResult:
    """F(s, chi) = sum f(n) chi(n) n^-s."""
    s = complex(s)
    _check_sigma(s, sigma_min)
    mult = None if chi is None else (chi.table() if isinstance(chi, DirichletCharacter) else np.asarray(chi))
    if f.period is not None:
        return periodic_twisted_sum(_periodic_coefficients(f, 1, 1, mult), None, s, N=N, eps=eps)
    Nn = N or _heuristic_N(f, s, eps, cap=10**5)
    vals = f.values(Nn)
    if mult is not None:
        vals = vals * mult[np.arange(Nn + 1) % len(mult)]
    return _general_direct(vals, None, s, None)


def twisted_eval(
    f: CoefficientSource,
    twist: TwistSpec,
    s: complex,
    eps: float = 1e-12,
    *,
    N: int | None = None,
    mult: np.ndarray | None = None,
    sigma_min: float = SIGMA_MIN,
) -> EvalResult:
    """F(lam, m, k, s) = sum_{n == m (k)} f(n) e(lam n) n^-s."""
    s = complex(s)
    _check_sigma(s, sigma_min)
    if f.period is not None:
        tab = _periodic_coefficients(f, twist.m, twist.k, mult)
        return periodic_twisted_sum(tab, twist.lam, s, N=N, eps=eps)
    Nn = N or _heuristic_N(f, s, eps, cap=10**5)
    vals = f.values(Nn)
    n = np.arange(Nn + 1)
    mask = (n % twist.k == twist.m % twist.k).astype(np.float64)
    if mult is not None:
        vals = vals * mult[n % len(mult)]
    return _general_direct(vals, twist.lam, s, mask)


def lerch_direct(lam: Lambda, alpha: float, s: complex, N: int | None = None) -> EvalResult:
    """L(lam, alpha, s) = sum_{n >= 0} e(lam n) (n + alpha)^-s from the defining series."""
    s = complex(s)
    _check_sigma(s)
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    return periodic_twisted_sum(np.ones(1), lam, s, shift=alpha, start=0, N=N)


def lerch_rational(a: int, q: int, alpha: float, s: complex) -> complex:
    """L(a/q, alpha, s) = q^-s sum_r e(ar/q) zeta(s, (r + alpha)/q); valid for s != 1."""
    s = complex(s)
    r = np.arange(q)
    hz, _ = hurwitz_vec(s, (r + alpha) / q)
    ph = e_phase(Fraction(a, q), r)
    return complex(q ** (-s) * csum(ph * hz))


def lerch_eval(lam: Lambda, alpha: Fraction, s: complex, eps: float = 1e-12) -> complex:
    """L(lam, m/k, s); twist route k^s e(-lam m/k) F(lam/k, m, k, s), rational route via Hurwitz."""
    from .arith.sources import get_source

    s = complex(s)
    alpha = Fraction(alpha)
    m, k = alpha.numerator, alpha.denominator
    lam_f = as_fraction(lam)
    fast = None
    if isinstance(lam, Fraction):
        fast = lerch_rational(lam.numerator, lam.denominator, float(alpha), s)
    if s.real < 1 + SIGMA_MIN:
        if fast is None:
            raise DomainError("irrational lambda needs sigma >= 1 + sigma_min")
        return fast
    if m == k:
        m = k = 1
    sub = lambda_divide(lam, k) if isinstance(lam, FixedFraction) else lam / k
    res = twisted_eval(get_source("unit"), TwistSpec(sub, m, k), s, eps)
    phase = complex(np.exp(-2j * math.pi * float((lam_f * m / k) % 1)))
    twist_val = k**s * phase * res.value
    if fast is not None:
        tol = max(1e3 * eps, 1e3 * res.tail_bound if res.flag == "heuristic" else 0.0)
        if abs(fast - twist_val) > tol * max(1.0, abs(fast)):
            raise InvariantError(f"Lerch routes disagree by {abs(fast - twist_val):.2e}")
        return fast
    return twist_val


def remainder_R(
    f: CoefficientSource,
    twist: TwistSpec,
    a: int,
    q: int,
    s: complex,
    eps: float = 1e-12,
    *,
    N: int | None = None,
) -> EvalResult:
    """R(s, q) = sum_{n == m (k)} f(n) [e(lam n) - e(an/q)] n^-s."""
    s = complex(s)
    _check_sigma(s)
    approx = Fraction(a, q)
    if isinstance(twist.lam, Fraction) and twist.lam % 1 == approx % 1:
        return EvalResult(0j, 0, 0.0, "rigorous")
    if f.period is not None:
        r1 = twisted_eval(f, twist, s, eps, N=N)
        r2 = twisted_eval(f, TwistSpec(approx, twist.m, twist.k), s, eps, N=r1.N)
        return EvalResult(
            r1.value - r2.value, r1.N, r1.tail_bound + r2.tail_bound, "rigorous",
            r1.error_estimate + r2.error_estimate,
        )
    Nn = N or _heuristic_N(f, s, eps, cap=10**5)
    vals = f.values(Nn)
    n = np.arange(1, Nn + 1)
    mask = n % twist.k == twist.m % twist.k
    diff = e_phase(twist.lam, n) - e_phase(approx, n)
    term = vals[1:] * mask * diff * np.exp(-s * np.log(n.astype(np.float64)))
    tail = 10 * abs(csum(term[int(0.9 * Nn) :]))
    return EvalResult(csum(term), Nn, tail, "heuristic", tail)


def residue_class_sums(
    f: CoefficientSource, modulus: int, s: complex, *, N: int | None = None, eps: float = 1e-14
) -> tuple[np.ndarray, float, str, int]:
    """V_b = sum_{n == b (modulus)} f(n) n^-s for every b, with combined tail bound."""
    s = complex(s)
    if f.period is not None:
        P = f.period
        L = math.lcm(P, modulus)
        base = f.periodic_table()
        V = np.zeros(modulus, dtype=np.complex128)
        bound, Nmax = 0.0, 0
        for r in range(L):
            c = base[r % P]
            if c == 0:
                continue
            tab = np.zeros(L, dtype=np.complex128)
            tab[r] = c
            res = periodic_twisted_sum(tab, None, s, N=N, eps=eps)
            V[r % modulus] += res.value
            bound += res.tail_bound
            Nmax = max(Nmax, res.N)
        return V, bound, "rigorous", Nmax
    Nn = N or _heuristic_N(f, s, eps, cap=10**5)
    vals = f.values(Nn)
    n = np.arange(1, Nn + 1)
    term = vals[1:] * np.exp(-s * np.log(n.astype(np.float64)))
    V = np.bincount(n % modulus, weights=term.real, minlength=modulus) + 1j * np.bincount(
        n % modulus, weights=term.imag, minlength=modulus
    )
    tail = 10 * float(np.abs(term[int(0.9 * Nn) :]).sum()) / max(1, modulus) * modulus
    return V, tail, "heuristic", Nn


@dataclass(frozen=True)
class Decomposition:
    character_part: complex
    principal_correction: complex
    R: complex
    reassembled: complex
    direct: complex
    residual: float
    tolerance: float


def decompose_twist(
    f: CoefficientSource,
    twist: TwistSpec,
    a: int,
    q: int,
    s: complex,
    eps: float = 1e-12,
    *,
    N: int | None = None,
    tolerance: float | None = None,
) -> Decomposition:
    """Split F(lam, m, k, s) into characters mod kq, the principal piece, and R(s, q)."""
    s = complex(s)
    k, m = twist.k, twist.m
    if math.gcd(a, q) != 1:
        raise DomainError("a and q must be coprime")
    fam = character_family(q)
    psis = small_modulus_family(k)
    kq = k * q
    V, vb, vflag, _ = residue_class_sums(f, kq, s, N=N)
    Rres = remainder_R(f, twist, a, q, s, eps, N=N)
    phi_kq = euler_phi(kq)
    b = np.arange(kq)
    char_part = 0j
    principal = 0j
    for psi in psis:
        psi_tab = psi.table()[b % k]
        wm = np.conj(psi(m))
        fq_psi = local_factor(f, q, psi, s) if psi(q) != 0 else 1.0
        for h, chi in enumerate(fam.characters):
            F = csum(psi_tab * chi.table()[b % q] * V)
            if h == 0:
                principal += wm * (1 - (q - 1) * (fq_psi - 1)) * F
            else:
                char_part += wm * chi(a) * gauss_sum(chi.conj()) * F
    char_part /= phi_kq
    principal /= phi_kq
    reassembled = char_part - principal + Rres.value
    direct = twisted_eval(f, twist, s, eps, N=N)
    residual = abs(reassembled - direct.value)
    if tolerance is None:
        tolerance = 10 * (direct.tail_bound + Rres.tail_bound + math.sqrt(q) * 2 * vb) + 1e-12
    if residual > tolerance:
        raise InvariantError(f"decomposition residual {residual:.3e} above tolerance {tolerance:.3e}")
    return Decomposition(char_part, principal, Rres.value, reassembled, direct.value, residual, tolerance)


def phase_values(phases: PhaseAssignment, N: int) -> np.ndarray:
    """phi(n) for 0 <= n <= N (phi(0) = 0)."""
    return multiplicative_values(_PhaseSource(phases), N)


def phased_eval(
    f: CoefficientSource,
    twist: TwistSpec,
    phases: PhaseAssignment,
    sigma: float,
    eps: float = 1e-12,
    *,
    N: int = 10**6,
) -> EvalResult:
    """F^phi(lam, m, k, sigma) by direct summation to N.

    The reported tail bound is sum_{n > N} |f(n)| n^-sigma for |f| <= 1, else heuristic.
    """
    s = complex(sigma)
    _check_sigma(s)
    vals = f.values(N) * phase_values(phases, N)
    n = np.arange(N + 1)
    mask = (n % twist.k == twist.m % twist.k).astype(np.float64)
    n1 = np.arange(1, N + 1)
    term = vals[1:] * mask[1:] * n1.astype(np.float64) ** (-sigma) * e_phase(twist.lam, n1)
    total = csum(term)
    if f.period is not None:
        tail = N ** (1 - sigma) / (sigma - 1) / twist.k + N**-sigma
        return EvalResult(total, N, tail, "rigorous")
    tail = 10 * abs(csum(term[int(0.9 * N) :]))
    return EvalResult(total, N, tail, "heuristic", tail)
