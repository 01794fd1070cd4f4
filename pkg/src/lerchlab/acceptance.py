"""End-to-end acceptance checks, shared by the test suite and the ``verify`` command."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .arith.phases import e_phase, lambda_divide, parse_lambda, prime_denominator_approx
from .arith.primes import cached_sieve, largest_prime_factor_table
from .arith.smooth import smooth_count, smooth_enumerate
from .arith.sources import get_source
from .characters import character_family, gauss_sum, small_modulus_family
from .constructor import (
    build_parameters,
    identity_check,
    run_construction,
    scaling_diagnostics,
    sigma_window,
    spread,
)
from .errors import InfeasibleConstructionError, LerchLabError
from .expsums import HarnessGrid, debruijn_fit, maier_harness
from .hurwitz import hurwitz_em
from .series import TwistSpec, decompose_twist, lerch_direct, lerch_eval, twisted_eval
from .zeros import Rectangle, dirichlet_polynomial, find_zeros, hurwitz_evaluator, sigma_star_estimate, symmetry_check

LOG10_2 = "0.30102999566398119521373889472449302677"
GOLDEN = "0.61803398874989484820458683436563811772"


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float
    limit: float
    reporting_only: bool = False

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if self.reporting_only:
            tag += " (report)"
        return f"[{tag}] {self.number:2d} {self.title}: {self.detail} ({self.seconds:.1f}s / {self.limit:g}s)"


def _timed(number: int, title: str, limit: float, body: Callable[[], tuple[bool, str]], reporting_only=False):
    t0 = time.perf_counter()
    try:
        ok, detail = body()
    except LerchLabError as exc:
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    dt = time.perf_counter() - t0
    if dt > limit and not reporting_only:
        ok, detail = False, detail + f"; runtime {dt:.1f}s over the {limit:g}s limit"
    return CriterionResult(number, title, ok or reporting_only, detail, dt, limit, reporting_only)


def character_algebra() -> tuple[bool, str]:
    worst_orth = worst_gauss = 0.0
    index_ok = True
    for q in cached_sieve(101).primes_in(1, 101):
        q = int(q)
        chars = small_modulus_family(2) if q == 2 else character_family(q).characters
        M = np.array([c.table() for c in chars])
        phi = q - 1
        worst_orth = max(
            worst_orth,
            float(np.abs(M @ M.conj().T - phi * np.eye(len(chars))).max()),
            float(np.abs(M.T @ M.conj() - phi * np.diag([1.0 if n % q else 0.0 for n in range(q)])).max()),
        )
        if q == 2:
            continue
        for c in chars[1:]:
            worst_gauss = max(worst_gauss, abs(abs(gauss_sum(c)) - math.sqrt(q)))
        if q <= 31:
            T = M[:, 1:]  # T[h, n-1] = chi_h(n)
            index_ok &= bool(np.allclose(T, T.T, atol=1e-13, rtol=0))
    ok = worst_orth < 1e-12 and worst_gauss < 1e-10 and index_ok
    return ok, f"orthogonality {worst_orth:.1e}, |tau| - sqrt q {worst_gauss:.1e}, index symmetry {index_ok}"


def _zeta(s):
    return hurwitz_em(s, 1.0)


def special_cases() -> tuple[bool, str]:
    worst = 0.0
    for s in (1.5, 2.0, 2 + 5j):
        s = complex(s)
        chi4 = 4**-s * (hurwitz_em(s, 0.25) - hurwitz_em(s, 0.75))
        worst = max(
            worst,
            abs(lerch_eval(Fraction(1), Fraction(1), s) - _zeta(s)),
            abs(lerch_eval(Fraction(1, 2), Fraction(1), s) - (1 - 2 ** (1 - s)) * _zeta(s)),
            abs(lerch_eval(Fraction(1, 2), Fraction(1, 2), s) - 2**s * chi4),
        )
    return worst < 1e-10, f"max deviation {worst:.2e}"


def reduction_identity() -> tuple[bool, str]:
    f = get_source("unit")
    worst = 0.0
    for lam in (Fraction(1, 3), Fraction(5, 7), parse_lambda(GOLDEN)):
        for s, (m, k) in ((1.5, (1, 3)), (2 + 3j, (2, 5)), (3 - 7j, (3, 4))):
            s = complex(s)
            lhs = lerch_direct(lam, m / k, s).value
            lam_f = Fraction(lam) if isinstance(lam, Fraction) else lam.to_fraction()
            phase = complex(e_phase(-lam_f * Fraction(m, k) % 1, np.array([1]))[0])
            rhs = k**s * phase * twisted_eval(f, TwistSpec(lambda_divide(lam, k), m, k), s).value
            worst = max(worst, abs(lhs - rhs))
    return worst < 1e-10, f"max deviation {worst:.2e} on 9 (lambda, s) points"


def decomposition(N: int = 10**6) -> tuple[bool, str]:
    f = get_source("unit")
    lam = parse_lambda(LOG10_2)
    a, q = prime_denominator_approx(lam, 0.2, 50, 500)
    cases = [
        (TwistSpec(Fraction(1, 5), 1, 1), 1, 5, 2.0),
        (TwistSpec(Fraction(3, 7), 2, 3), 3, 7, 1.8),
        (TwistSpec(lam, 1, 1), a, q, 1.5),
    ]
    res = [decompose_twist(f, tw, a_, q_, s, N=N, tolerance=1e-8).residual for tw, a_, q_, s in cases]
    return max(res) < 1e-8, "residuals " + ", ".join(f"{r:.1e}" for r in res) + f"; q* = {q}, a = {a}"


CONSTRUCTION_QS = (11, 23, 41)


def x_identity() -> tuple[bool, str]:
    cases = [("unit", 1, 1, 5, 1), ("unit", 3, 2, 7, 3)] + [("unit", 1, 1, q, 2) for q in CONSTRUCTION_QS]
    worst = 0.0
    for f, k, m, q, a in cases:
        p = build_parameters(f, k, m, q=q, a=a)
        lo, hi = sigma_window(p)
        for sigma in (1 + lo, 1 + hi, 1.01):
            worst = max(worst, identity_check(p, sigma, tol=1.0))
    return worst < 1e-10, f"max residual {worst:.1e} over {len(cases)} parameter sets"


def smooth_numbers() -> tuple[bool, str]:
    base = smooth_count(100, 5) == 34 and smooth_count(10, 2) == 4
    N = 10**4
    P = largest_prime_factor_table(N)
    primes = cached_sieve(N).primes_in(1, N)
    table = {int(p): np.concatenate([[0], np.cumsum(P[1 : N // int(p) + 1] <= p)]) for p in primes}
    buchstab_ok = True
    for y in (2, 3, 5, 7, 13, 31, 97):
        enum = np.zeros(N + 1, dtype=np.int64)
        enum[smooth_enumerate(N, y)] = 1
        psi = np.cumsum(enum)
        ref = np.concatenate([[0], np.cumsum(P[1 : N + 1] <= y)])
        buchstab_ok &= bool(np.array_equal(psi, ref))
        x = np.arange(N + 1)
        rough = np.zeros(N + 1, dtype=np.int64)
        for p in primes[primes > y]:
            p = int(p)
            rough[p:] += table[p][x[p:] // p]
        buchstab_ok &= bool(np.array_equal(psi, x - rough))
        smooth_part = np.ones(N + 1, dtype=np.int64)
        smooth_part[0] = 0
        for p in primes[primes <= y]:
            p = int(p)
            smooth_part[p:] += table[p][x[p:] // p]
        buchstab_ok &= bool(np.array_equal(psi, smooth_part))
    fit = debruijn_fit([10**3, 10**4, 10**5, 10**6], [1.5, 2.0, 2.5, 3.0, 4.0, 5.0])
    ok = base and buchstab_ok and fit.c > 0 and fit.all_satisfied
    return ok, f"Psi values {base}, Buchstab {buchstab_ok}, de Bruijn c={fit.c:.3f} C={fit.C:.3f}"


def maier(grid: HarnessGrid | None = None) -> tuple[bool, str]:
    summary = maier_harness(grid or HarnessGrid())
    bad = summary.trend_violations(0.2, per_source=False)
    per_f = summary.trend_violations(0.2)
    ok = summary.max_ratio <= 10 and not bad
    detail = (f"max ratio {summary.max_ratio:.3f}, median {summary.median_ratio:.3f}, "
              f"trend violations at fixed r {len(bad)}")
    if bad:
        detail += " [" + "; ".join(f"r={k[1]} x-step {i}: {a:.4f}->{b:.4f}" for k, i, a, b in bad) + "]"
    detail += f"; per single f {len(per_f)}"
    if per_f:
        detail += " [" + "; ".join(f"{k[0]} r={k[1]} x-step {i}: {a:.4f}->{b:.4f}" for k, i, a, b in per_f) + "]"
    return ok, detail


def zero_finder() -> tuple[bool, str]:
    parts, ok = [], True
    for T in (10, 20, 40):
        F = dirichlet_polynomial("1-3*2^-s")
        rep = find_zeros(F, Rectangle(1.4, 1.8, 0.0, float(T)))
        want = math.floor(T * math.log(2) / (2 * math.pi)) + 1
        good = all(z.abs_value < 1e-10 and z.winding == 1 for z in rep.zeros)
        ok &= len(rep.zeros) == want and good and rep.consistent
        parts.append(f"T={T}: {len(rep.zeros)}/{want}")
    rz = find_zeros(hurwitz_evaluator(1.0), Rectangle(1.05, 1.5, 0.0, 50.0))
    ok &= len(rz.zeros) == 0 and rz.winding == 0
    parts.append(f"zeta zeros {len(rz.zeros)}")
    return ok, ", ".join(parts)


def constructor_end_to_end(qs=CONSTRUCTION_QS, p_max: int = 10**6) -> tuple[bool, str]:
    parts, ok = [], True
    for q in qs:
        p = build_parameters("unit", 1, 1, q=q, a=2, p_max=p_max)
        try:
            run = run_construction(p)
        except InfeasibleConstructionError as exc:
            best = max(exc.margins, key=lambda r: r["min_margin"])
            parts.append(
                f"q={q} infeasible (best class-sum/need {best['min_margin']:.2e} at sigma={best['sigma']:.4f}, "
                f"max|W|={best['max_W']:.2f})"
            )
            ok = False
            continue
        st, ver = run.state, run.verification
        good = (
            st.converged
            and st.system_residual < 1e-7
            and ver.passed
        )
        ok &= good
        parts.append(f"q={q} |F|={abs(ver.value):.2e} tail={ver.tail_bound:.2e} control={ver.control_median:.2e}")
    return ok, "; ".join(parts)


def scaling() -> tuple[bool, str]:
    rows = scaling_diagnostics()
    sw = spread([r.W_scaled for r in rows])
    sy = spread([r.Y_scaled for r in rows])
    sr = spread([r.R_scaled for r in rows])
    return max(sw, sy, sr) < 5, f"spreads |W|sqrt(q)/log q {sw:.2f}, |Y|q {sy:.2f}, Rq {sr:.2f}"


def symmetry(samples: int = 10, seed: int = 0) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    f = get_source("unit")
    worst = 0.0
    for _ in range(samples):
        den = int(rng.integers(3, 200))
        lam = Fraction(int(rng.integers(1, den)), den)
        k = int(rng.integers(1, 5))
        m = int(rng.choice([x for x in range(1, k + 1) if math.gcd(x, k) == 1]))
        s = complex(rng.uniform(1.1, 3.0), rng.uniform(-30, 30))
        worst = max(worst, symmetry_check(f, TwistSpec(lam, m, k), [s]).max_deviation)
    return worst < 1e-12, f"max relative deviation {worst:.1e} on {samples} samples"


def zero_existence(budget: int = 1_500_000, t_max: float = 3000.0) -> tuple[bool, str]:
    F = hurwitz_evaluator(1 / 3)
    est = sigma_star_estimate(F, (1.0 + 1e-3, 1.1), t_max, budget, height=20.0)
    if est.status == "zero-found":
        z = est.zeros[0]
        return True, f"zero at {z.s.real:.10f}+{z.s.imag:.6f}i, |F|={z.abs_value:.1e}"
    return True, f"none within budget (t <= {t_max:g}, {F.calls} evaluations)"


CRITERIA = {
    1: ("character algebra", 10, character_algebra, False),
    2: ("special-case identities", 10, special_cases, False),
    3: ("reduction identity", 30, reduction_identity, False),
    4: ("decomposition identity", 120, decomposition, False),
    5: ("X identity", 60, x_identity, False),
    6: ("smooth numbers", 60, smooth_numbers, False),
    7: ("Maier harness", 600, maier, False),
    8: ("zero finder", 120, zero_finder, False),
    9: ("constructor end to end", 900, constructor_end_to_end, False),
    10: ("scaling diagnostics", 1200, scaling, False),
    11: ("symmetry", 30, symmetry, False),
    12: ("zero existence near sigma = 1", 600, zero_existence, True),
}

FAST = (1, 2, 3, 5, 6, 8, 11)


def run_criterion(number: int) -> CriterionResult:
    title, limit, body, reporting_only = CRITERIA[number]
    return _timed(number, title, limit, body, reporting_only)


def run_suite(suite: str = "fast") -> list[CriterionResult]:
    if suite == "fast":
        numbers = FAST
    elif suite == "full":
        numbers = tuple(CRITERIA)
    else:
        raise ValueError(f"unknown suite {suite!r}")
    return [run_criterion(n) for n in numbers]
