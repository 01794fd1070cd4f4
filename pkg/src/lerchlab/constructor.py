"""Desk-scale phase construction for an approximate real zero of a phase-twisted series.

The pipeline runs: parameters, then W/X/Y/E assembly, then sigma selection,
then the mu-split and two-angle inversion, then the fixed-point iteration on z,
and finally verification. Everything is finite: primes beyond ``p_max`` keep
the default phase pi/log p and enter only through a reported tail bound.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.special import exp1

from .arith.phases import Lambda, as_fraction, lambda_label, parse_lambda, prime_denominator_approx
from .arith.primes import cached_sieve, euler_phi, is_prime
from .arith.sources import CoefficientSource, get_source
from .characters import character_family, gauss_sum, small_modulus_family
from .errors import (
    DenominatorTooSmallError,
    DomainError,
    ImageError,
    InfeasibleConstructionError,
    InvariantError,
    NotFoundError,
    NumericalGuardError,
    RadiusViolationError,
)
from .series import PhaseAssignment, TwistSpec, phased_eval, remainder_R

ELL_SEARCH_LIMIT = 100
SIGMA_GRID_POINTS = 32
EXCEPTIONAL_TOL = 1e-8
EXCEPTIONAL_SHIFT = 1e-6
_POWER_CUT = 1e-18


@dataclass(frozen=True)
class ConstructionParams:
    f_label: str
    k: int
    m: int
    q: int
    a: int
    delta: float
    Q: float
    ell: int
    p_max: int
    lam: str
    eta: float = 1.0
    A: float = 7.0
    sigma: float | None = None
    tol: float = 1e-8
    max_iter: int = 200

    @property
    def twist_lambda(self) -> Lambda:
        return parse_lambda(self.lam)

    @property
    def rational(self) -> bool:
        lam = self.twist_lambda
        return isinstance(lam, Fraction) and lam % 1 == Fraction(self.a, self.q) % 1

    @property
    def e_Q(self) -> float:
        return math.exp(self.Q)

    @property
    def J(self) -> int:
        """Number of nontrivial characters carrying a W correction."""
        return int(math.floor(self.Q**2))

    def with_sigma(self, sigma: float) -> "ConstructionParams":
        d = asdict(self)
        d["sigma"] = sigma
        return ConstructionParams(**d)


def build_parameters(
    f_label: str = "unit",
    k: int = 1,
    m: int = 1,
    *,
    q: int | None = None,
    a: int | None = None,
    lam: str | Lambda | None = None,
    delta: float = 0.3,
    p_max: int = 10**6,
    q_range: tuple[int, int] = (11, 10**4),
    eta: float = 1.0,
    A: float = 7.0,
    tol: float = 1e-8,
) -> ConstructionParams:
    """Validate (or search for) the arithmetic data of a construction run.

    Give either an exact pair (a, q), in which case lambda = a/q, or a lambda;
    an irrational lambda picks (a, q) by prime-denominator approximation.
    """
    f = get_source(f_label)
    if not 0 < delta < 1 / 3:
        raise DomainError("delta must lie in (0, 1/3)")
    if (1 + delta) * A <= 8:
        raise DomainError(f"(1 + delta) * A = {(1 + delta) * A:.4g} must exceed 8")
    if k < 1 or math.gcd(m, k) != 1 or not 1 <= m <= k:
        raise DomainError(f"bad residue class m={m} mod k={k}")
    if q is not None:
        if not is_prime(q) or q < 3:
            raise DomainError(f"q={q} is not an odd prime")
        if a is None:
            if lam is None:
                raise DomainError("give a with q, or a lambda")
            a = round(as_fraction(_lam(lam)) * q)
        if lam is None:
            lam = f"{a % q}/{q}" if a % q else f"{q}/{q}"
    else:
        if lam is None:
            raise DomainError("give either (a, q) or lambda")
        a, q = prime_denominator_approx(_lam(lam), delta, *q_range)
    lam_s = lam if isinstance(lam, str) else lambda_label(lam)
    TwistSpec(parse_lambda(lam_s), m, k)
    if math.gcd(a, q) != 1:
        raise DomainError(f"gcd(a, q) = {math.gcd(a, q)} != 1")
    Q = q ** ((1 + delta) / 8)
    if Q**2 >= q - 2:
        raise DomainError(f"q={q} too small: Q^2 = {Q**2:.3f} >= q - 2")
    vals = f.values(ELL_SEARCH_LIMIT)
    ell = next(
        (n for n in range(2, ELL_SEARCH_LIMIT + 1) if math.gcd(n, k) == 1 and abs(vals[n]) > 0),
        None,
    )
    if ell is None:
        raise NotFoundError(f"no admissible ell <= {ELL_SEARCH_LIMIT} for {f_label}")
    if q <= k + ell:
        raise DomainError(f"q={q} must exceed k + ell = {k + ell}")
    if math.exp(Q) >= p_max:
        raise DomainError("e^Q must stay below p_max")
    return ConstructionParams(f_label, k, m, q, a, delta, Q, ell, int(p_max), lam_s, eta, A, None, tol)


def _lam(lam: str | Lambda) -> Lambda:
    return parse_lambda(lam) if isinstance(lam, str) else lam


class _Context:
    """Characters, primes and coefficient data shared by every step of one run."""

    def __init__(self, params: ConstructionParams):
        self.params = params
        p = params
        self.f: CoefficientSource = get_source(p.f_label)
        self.psis = small_modulus_family(p.k)
        self.fam = character_family(p.q)
        self.kq = p.k * p.q
        self.phi_kq = euler_phi(self.kq)
        b = np.arange(self.kq)
        psi_t = np.array([psi.table()[b % p.k] for psi in self.psis])
        chi_t = np.array([chi.table()[b % p.q] for chi in self.fam.characters])
        # chars[i, h, b] = psi_i(b) chi_h(b)
        self.chars = psi_t[:, None, :] * chi_t[None, :, :]
        self.classes = np.array([r for r in range(self.kq) if math.gcd(r, self.kq) == 1])
        self.tau_conj = np.array([gauss_sum(chi.conj()) for chi in self.fam.characters])
        self.chi_a = np.array([chi(p.a) for chi in self.fam.characters])
        self.psi_m_conj = np.array([np.conj(psi(p.m)) for psi in self.psis])
        self.psi_l_conj = np.array([np.conj(psi(p.ell)) for psi in self.psis])
        self.chi_l_conj = np.array([np.conj(chi(p.ell)) for chi in self.fam.characters])
        self.f_ell = complex(self.f.values(p.ell)[p.ell])

        primes = cached_sieve(p.p_max).primes_in(1, p.p_max).astype(np.int64)
        coprime = (self.kq % primes) != 0
        primes = primes[coprime]
        eQ = p.e_Q
        self.small = primes[primes <= eQ]
        self.big = primes[primes > eQ]
        self.big_cls = self.big % self.kq
        self.big_logp = np.log(self.big.astype(np.float64))
        fb = self.f.prime_values(self.big)
        self.big_abs = np.abs(fb)
        self.big_arg = np.where(self.big_abs > 0, np.angle(fb), 0.0)
        self.big_f = fb
        self.all_primes = primes
        self.all_cls = primes % self.kq
        self.all_logp = np.log(primes.astype(np.float64))
        self.class_index = {int(r): np.nonzero(self.big_cls == r)[0] for r in self.classes}
        self.q_roots = np.asarray(self.f.local_roots(p.q), dtype=np.complex128)
        self.f_q = complex(self.f.values(p.q)[p.q]) if p.q <= 10**6 else complex(np.sum(self.q_roots))
        self._powsum: dict[tuple[str, int], np.ndarray] = {}

    def powsum(self, which: str, h: int) -> np.ndarray:
        key = (which, h)
        if key not in self._powsum:
            primes = self.big if which == "big" else self.all_primes
            self._powsum[key] = self.f.local_power_sums(primes, h)
        return self._powsum[key]

    def t_q(self) -> float:
        """Special phase for q: arg f(q) - 2 pi / q - pi over log q, or 0 when f(q) = 0."""
        if abs(self.f_q) == 0:
            return 0.0
        q = self.params.q
        return (cmath.phase(self.f_q) - 2 * math.pi / q - math.pi) / math.log(q)


_CONTEXTS: dict[ConstructionParams, _Context] = {}


def context(params: ConstructionParams) -> _Context:
    key = params.with_sigma(None) if params.sigma is not None else params
    ctx = _CONTEXTS.get(key)
    if ctx is None:
        if len(_CONTEXTS) > 8:
            _CONTEXTS.clear()
        ctx = _CONTEXTS[key] = _Context(key)
    return ctx


def power_class_sums(
    ctx: _Context,
    sigma: float,
    t: np.ndarray | None,
    *,
    h_from: int = 1,
    which: str = "big",
    absolute: bool = False,
) -> np.ndarray:
    """sum_{h >= h_from} (1/h) sum_p (sum_j f_j(p)^h) p^(-h(sigma + i t_p)), binned by p^h mod kq."""
    if which == "big":
        cls, logp = ctx.big_cls, ctx.big_logp
    else:
        cls, logp = ctx.all_cls, ctx.all_logp
    kq = ctx.kq
    out = np.zeros(kq, dtype=np.complex128)
    if len(cls) == 0:
        return out
    r = cls.copy()
    h = 1
    while True:
        # logp is ascending, so the primes with p^(-h sigma) above the cut form a prefix
        n = len(logp) if h == 1 else int(np.searchsorted(logp, -math.log(_POWER_CUT) / (h * sigma)))
        if n == 0:
            break
        r = r[:n]
        if h >= h_from:
            lp = logp[:n]
            w = ctx.powsum(which, h)[:n] * np.exp(-h * sigma * lp) / h
            if absolute:
                w = np.abs(w)
            elif t is not None:
                w = w * np.exp(-1j * h * t[:n] * lp)
            out += np.bincount(r, weights=w.real, minlength=kq)
            out += 1j * np.bincount(r, weights=w.imag, minlength=kq)
        r = (r * cls[:n]) % kq
        h += 1
    return out
    r = cls.copy()
    min_logp = float(logp.min())
    h = 1
    while True:
        if h >= h_from:
            if h > 1 and math.exp(-h * sigma * min_logp) < _POWER_CUT:
                break
            mag = np.exp(-h * sigma * logp)
            sel = mag > _POWER_CUT if h > 1 else slice(None)
            w = ctx.powsum(which, h)[sel] * mag[sel] / h
            if absolute:
                w = np.abs(w)
            elif t is not None:
                w = w * np.exp(-1j * h * t[sel] * logp[sel])
            out += np.bincount(r[sel], weights=w.real, minlength=kq)
            out += 1j * np.bincount(r[sel], weights=w.imag, minlength=kq)
        elif math.exp(-h * sigma * min_logp) < _POWER_CUT:
            break
        r = (r * cls) % kq
        h += 1
    return out


def small_prime_products(ctx: _Context, sigma: float) -> np.ndarray:
    """P[i, h] = prod_{p <= e^Q} F_p(sigma, psi_i chi_h)."""
    P = np.ones(ctx.chars.shape[:2], dtype=np.complex128)
    for p in ctx.small:
        p = int(p)
        roots = np.asarray(ctx.f.local_roots(p), dtype=np.complex128)
        x = ctx.chars[:, :, p % ctx.kq] * p**-sigma
        for alpha in roots:
            P /= 1 - alpha * x
    return P


def local_factor_q(ctx: _Context, sigma: float, t_q: float) -> np.ndarray:
    """F_q(sigma + i t_q, psi) for every psi mod k."""
    q = ctx.params.q
    out = np.ones(len(ctx.psis), dtype=np.complex128)
    for i, psi in enumerate(ctx.psis):
        x = psi(q) * q ** complex(-sigma, -t_q)
        for alpha in ctx.q_roots:
            out[i] /= 1 - alpha * x
    return out


def _remainder(ctx: _Context, sigma: float) -> complex:
    p = ctx.params
    if p.rational:
        return 0j
    twist = TwistSpec(p.twist_lambda, p.m, p.k)
    return remainder_R(ctx.f, twist, p.a, p.q, complex(sigma)).value


@dataclass
class WTable:
    sigma: float
    W: np.ndarray  # shape (n_psi, J), column j-1 holds W_{psi, j}
    numerator: complex
    denominator: complex
    denominator_floor: float
    R_value: complex

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.W).max()) if self.W.size else 0.0


def build_W(params: ConstructionParams, sigma: float, *, guard: bool = True) -> WTable:
    """W_{psi,j}(sigma, q) for 1 <= j <= Q^2 and every psi mod k."""
    ctx = context(params)
    P = small_prime_products(ctx, sigma)
    R = _remainder(ctx, sigma)
    J = params.J
    num_inner = (ctx.chi_a * ctx.tau_conj)[None, :] * P
    num = R + np.sum(ctx.psi_m_conj * num_inner.sum(axis=1)) / ctx.phi_kq
    den_inner = ctx.chi_l_conj[None, 1 : J + 1] * P[:, 1 : J + 1]
    den = np.sum(ctx.psi_l_conj * den_inner.sum(axis=1)) / ctx.phi_kq
    floor = 0.5 * abs(ctx.f_ell) * params.ell ** -(1 + params.eta)
    if guard and abs(den) < floor:
        raise DenominatorTooSmallError(f"|denominator| = {abs(den):.3e} below {floor:.3e}")
    j = np.arange(1, J + 1)
    pref = (ctx.psi_l_conj[:, None] * ctx.chi_l_conj[None, j]) / (
        ctx.psi_m_conj[:, None] * ctx.chi_a[None, j] * ctx.tau_conj[None, j]
    )
    return WTable(sigma, pref * num / den, complex(num), complex(den), floor, R)


def build_X(params: ConstructionParams, sigma: float, wt: WTable | None = None) -> np.ndarray:
    """X[i, j] = (1 - W_{psi_i, j}) prod_{p <= e^Q} F_p(sigma, psi_i chi_j); W = 0 off 1..Q^2."""
    ctx = context(params)
    wt = wt or build_W(params, sigma)
    X = small_prime_products(ctx, sigma)
    J = params.J
    X[:, 1 : J + 1] *= 1 - wt.W
    return X


def identity_check(params: ConstructionParams, sigma: float, tol: float = 1e-10) -> float:
    """Residual of the X-combination that must vanish identically."""
    ctx = context(params)
    wt = build_W(params, sigma, guard=False)
    X = build_X(params, sigma, wt)
    c = (ctx.chi_a * ctx.tau_conj)[None, 1:] * X[:, 1:]
    total = np.sum(ctx.psi_m_conj * c.sum(axis=1)) - np.sum(ctx.psi_m_conj * X[:, 0])
    residual = abs(total / ctx.phi_kq + wt.R_value)
    if residual > tol:
        raise InvariantError(f"X identity residual {residual:.3e} above {tol:.1e}")
    return residual


@dataclass
class ClassSums:
    sigma: float
    classes: np.ndarray
    totals: np.ndarray
    max_terms: np.ndarray
    counts: np.ndarray


def prime_class_sums(params: ConstructionParams, sigma: float) -> ClassSums:
    """sum over e^Q < p <= p_max, p == b (kq) of |f(p)| p^-sigma, per class b."""
    ctx = context(params)
    w = ctx.big_abs * np.exp(-sigma * ctx.big_logp)
    tot = np.bincount(ctx.big_cls, weights=w, minlength=ctx.kq)
    mx = np.zeros(ctx.kq)
    np.maximum.at(mx, ctx.big_cls, w)
    cnt = np.bincount(ctx.big_cls, weights=(w > 0).astype(float), minlength=ctx.kq)
    cls = ctx.classes
    if np.any(cnt[cls] == 0):
        empty = [int(b) for b in cls if cnt[b] == 0]
        raise NotFoundError(f"residue classes {empty[:5]} have no primes; increase p_max")
    return ClassSums(sigma, cls, tot[cls], mx[cls], cnt[cls].astype(int))


def annulus(params: ConstructionParams, b: int, sigma: float) -> tuple[float, float]:
    """Exact value set of the class-b prime sum over all phases: inner and outer radius."""
    cs = prime_class_sums(params, sigma)
    i = int(np.nonzero(cs.classes == b)[0][0])
    outer = float(cs.totals[i])
    return max(0.0, 2 * float(cs.max_terms[i]) - outer), outer


@dataclass
class YTable:
    sigma: float
    Y: np.ndarray  # over ctx.classes
    t_q: float
    q_factor: np.ndarray
    W: WTable


def build_Y(params: ConstructionParams, sigma: float, *, strict: bool = True) -> YTable:
    """Y_b from the W logs and the q-correction, for every class b coprime to kq.

    ``strict`` rejects |W| >= 1, where the logarithm leaves the proven regime;
    the non-strict form uses principal logs and is meant for diagnostics.
    """
    ctx = context(params)
    wt = build_W(params, sigma, guard=strict)
    if strict and wt.max_abs >= 1:
        raise NumericalGuardError(f"max |W| = {wt.max_abs:.3f} >= 1")
    tq = ctx.t_q()
    Fq = local_factor_q(ctx, sigma, tq)
    corr = 1 - (params.q - 1) * (Fq - 1)
    if np.any(np.abs(corr) < EXCEPTIONAL_TOL):
        raise _ExceptionalSigma(sigma)
    J = params.J
    logW = np.log(1 - wt.W)
    cls = ctx.classes
    ch = np.conj(ctx.chars[:, 1 : J + 1, :][:, :, cls])  # (psi, j, b)
    main = np.einsum("ij,ijb->b", logW, ch)
    psi_b = np.conj(ctx.chars[:, 0, :][:, cls])
    qpart = np.einsum("i,ib->b", np.log(corr), psi_b)
    return YTable(sigma, (main - qpart) / ctx.phi_kq, tq, Fq, wt)


class _ExceptionalSigma(Exception):
    def __init__(self, sigma):
        self.sigma = sigma


def _with_exceptional_retry(fn, params, sigma, *args, **kw):
    s = sigma
    for _ in range(4):
        try:
            return fn(params, s, *args, **kw), s
        except _ExceptionalSigma:
            s += EXCEPTIONAL_SHIFT
    raise NumericalGuardError(f"sigma={sigma} sits on an exceptional line after 3 shifts")


def higher_power_terms(params: ConstructionParams, sigma: float, t: np.ndarray | None, absolute=False):
    """sum_j sum_{h >= 2} sum_{e^Q < p <= p_max, p^h == b} f_j(p)^h / (h p^(h(sigma + i t_p)))."""
    ctx = context(params)
    H = power_class_sums(ctx, sigma, t, h_from=2, absolute=absolute)
    return H[ctx.classes].real if absolute else H[ctx.classes]


@dataclass
class ETable:
    sigma: float
    E: np.ndarray
    R: float


def build_E(params: ConstructionParams, sigma: float, t: np.ndarray | None, yt: YTable | None = None) -> ETable:
    """E_b = Y_b minus the higher prime-power terms, plus the radius R.

    R is 1.25 times the largest phase-independent bound |Y_b| + sum |higher terms|,
    so every phase choice keeps |E_b| <= R / 1.25.
    """
    yt = yt or build_Y(params, sigma, strict=False)
    E = yt.Y - higher_power_terms(params, sigma, t)
    sup = np.abs(yt.Y) + higher_power_terms(params, sigma, None, absolute=True)
    return ETable(sigma, E, 1.25 * float(sup.max()))


@dataclass
class BigEnoughReport:
    sigma: float
    passed: bool
    R: float
    need: float
    min_margin: float
    worst_class: int
    max_W: float
    denominator_ok: bool
    W_ok: bool

    def row(self) -> dict:
        return asdict(self)


def check_big_enough(params: ConstructionParams, sigma: float) -> BigEnoughReport:
    """Class sums against max(18 R, 2 d e^(-Q sigma)), with margins (ratio sum / need)."""
    ctx = context(params)
    yt, sigma = _with_exceptional_retry(build_Y, params, sigma, strict=False)
    et = build_E(params, sigma, None, yt)
    cs = prime_class_sums(params, sigma)
    need = max(18 * et.R, 2 * ctx.f.degree * math.exp(-params.Q * sigma))
    margins = cs.totals / need
    i = int(np.argmin(margins))
    den_ok = abs(yt.W.denominator) >= yt.W.denominator_floor
    W_ok = yt.W.max_abs < 1
    passed = bool(margins.min() >= 1 and den_ok and W_ok)
    return BigEnoughReport(
        sigma, passed, et.R, need, float(margins.min()), int(cs.classes[i]), yt.W.max_abs, den_ok, W_ok
    )


def sigma_window(params: ConstructionParams) -> tuple[float, float]:
    return params.Q**-1.5, min(params.eta, 5 / params.Q)


def select_sigma(params: ConstructionParams, *, force: bool = False) -> tuple[float, list[BigEnoughReport]]:
    """Best sigma on a geometric grid of sigma - 1; raise with the margin table if none passes."""
    lo, hi = sigma_window(params)
    grid = 1 + np.geomspace(lo, hi, SIGMA_GRID_POINTS)
    reports = [check_big_enough(params, float(s)) for s in grid]
    passing = [r for r in reports if r.passed]
    if passing:
        return max(passing, key=lambda r: r.min_margin).sigma, reports
    if force:
        return max(reports, key=lambda r: r.min_margin).sigma, reports
    best = max(reports, key=lambda r: r.min_margin)
    raise InfeasibleConstructionError(
        f"no sigma in 1 + [{lo:.3g}, {hi:.3g}] passes; best margin {best.min_margin:.3g} at sigma={best.sigma:.6g}",
        [r.row() for r in reports],
    )


@dataclass(frozen=True)
class MuSplit:
    b: int
    total: float
    mu0: float
    mu1: float
    mu2: float
    i1: int  # position of p1 within the class
    i2: int
    p1: int
    p2: int


def mu_split(params: ConstructionParams, b: int, sigma: float) -> MuSplit:
    """Split the class-b primes into thirds by running |f(p)| p^-sigma mass."""
    ctx = context(params)
    idx = ctx.class_index[int(b)]
    w = ctx.big_abs[idx] * np.exp(-sigma * ctx.big_logp[idx])
    if np.count_nonzero(w) < 3:
        raise InfeasibleConstructionError(f"class {b} has fewer than 3 primes")
    c = np.cumsum(w)
    T = float(c[-1])
    i1 = int(np.searchsorted(c, T / 3))
    before1 = float(c[i1 - 1]) if i1 else 0.0
    i2 = int(np.searchsorted(c, float(c[i1]) + T / 3))
    if i2 >= len(c):
        raise InfeasibleConstructionError(f"class {b}: no second third")
    mu1 = before1 / T
    mu2 = (float(c[i2 - 1]) - float(c[i1])) / T
    mu0 = 1 - mu1 - mu2
    if mu1 + mu2 - mu0 <= 1 / 9:
        raise InfeasibleConstructionError(f"class {b}: mu1 + mu2 - mu0 = {mu1 + mu2 - mu0:.4f} <= 1/9")
    return MuSplit(int(b), T, mu0, mu1, mu2, i1, i2, int(ctx.big[idx[i1]]), int(ctx.big[idx[i2]]))


def invert_G(mu1: float, mu2: float, w: complex, tol: float = 1e-12) -> tuple[float, float]:
    """Solve mu1 e^(i th1) + mu2 e^(-i th2) = w with both angles in (0, pi/2)."""
    r = abs(w)
    cphi = (r * r - mu1 * mu1 - mu2 * mu2) / (2 * mu1 * mu2)
    if not -1 <= cphi <= 1:
        raise ImageError(f"|w|={r:.6g} outside [|mu1-mu2|, mu1+mu2]")
    phi = math.acos(cphi)
    th1 = cmath.phase(w) + math.atan2(mu2 * math.sin(phi), mu1 + mu2 * math.cos(phi))
    th = np.array([th1, phi - th1])
    for _ in range(20):
        g = mu1 * cmath.exp(1j * th[0]) + mu2 * cmath.exp(-1j * th[1]) - w
        if abs(g) < tol * 1e-2:
            break
        jac = np.array(
            [[-mu1 * math.sin(th[0]), mu2 * math.sin(th[1])], [mu1 * math.cos(th[0]), -mu2 * math.cos(th[1])]]
        )
        th = th - np.linalg.solve(jac, [g.real, g.imag])
    res = abs(mu1 * cmath.exp(1j * th[0]) + mu2 * cmath.exp(-1j * th[1]) - w)
    if res >= tol or not (0 < th[0] < math.pi / 2 and 0 < th[1] < math.pi / 2):
        raise ImageError(f"no inversion in the open square: theta={th.tolist()}, residual={res:.2e}")
    return float(th[0]), float(th[1])


def phases_from_z(
    params: ConstructionParams, sigma: float, splits: dict[int, MuSplit], z: np.ndarray
) -> np.ndarray:
    """t_p for every prime in (e^Q, p_max] so the class-b prime sum equals z_b."""
    ctx = context(params)
    t = (ctx.big_arg + math.pi) / ctx.big_logp
    for i, b in enumerate(ctx.classes):
        sp = splits[int(b)]
        w = sp.mu0 + z[i] / sp.total
        if abs(w - sp.mu0) > 1 / 18:
            raise ImageError(f"class {b}: |z_b| / total = {abs(w - sp.mu0):.4f} exceeds 1/18")
        th1, th2 = invert_G(sp.mu1, sp.mu2, w)
        idx = ctx.class_index[int(b)]
        lo, mid = idx[: sp.i1], idx[sp.i1 + 1 : sp.i2]
        t[lo] = (ctx.big_arg[lo] - th1) / ctx.big_logp[lo]
        t[mid] = (ctx.big_arg[mid] + th2) / ctx.big_logp[mid]
    return t


def linear_class_sums(params: ConstructionParams, sigma: float, t: np.ndarray) -> np.ndarray:
    """sum over e^Q < p <= p_max in class b of f(p) p^-(sigma + i t_p)."""
    ctx = context(params)
    v = ctx.big_f * np.exp(-(sigma + 1j * t) * ctx.big_logp)
    s = np.bincount(ctx.big_cls, weights=v.real, minlength=ctx.kq) + 1j * np.bincount(
        ctx.big_cls, weights=v.imag, minlength=ctx.kq
    )
    return s[ctx.classes]


def assignment(params: ConstructionParams, t: np.ndarray) -> PhaseAssignment:
    """Explicit PhaseAssignment: solved primes, the special t_q, pi/log p beyond p_max."""
    ctx = context(params)
    d = dict(zip(ctx.big.tolist(), t.tolist()))
    if abs(ctx.f_q):
        d[params.q] = ctx.t_q()
    return PhaseAssignment(d, pi_above=float(params.p_max))


@dataclass
class ConstructionState:
    params: ConstructionParams
    sigma: float
    W: np.ndarray
    Y: np.ndarray
    E: np.ndarray
    R: float
    annuli: list[tuple[float, float]]
    splits: dict[int, MuSplit]
    z: np.ndarray
    t: np.ndarray
    t_q: float
    transcript: list[dict] = field(default_factory=list)
    converged: bool = False
    system_residual: float = float("nan")
    linear_residual: float = float("nan")


def fixed_point_solve(
    params: ConstructionParams,
    sigma: float,
    max_iter: int | None = None,
    tol: float | None = None,
    *,
    plain_iter: int = 50,
    gamma: float = 0.5,
    yt: YTable | None = None,
) -> ConstructionState:
    """Iterate z <- E(phases(z)) from z = 0, falling back to damping z <- (1 - g) z + g E(z)."""
    ctx = context(params)
    max_iter = max_iter or params.max_iter
    tol = tol or params.tol
    if yt is None:
        yt, sigma = _with_exceptional_retry(build_Y, params, sigma, strict=False)
    R = build_E(params, sigma, None, yt).R
    splits = {int(b): mu_split(params, int(b), sigma) for b in ctx.classes}
    z = np.zeros(len(ctx.classes), dtype=np.complex128)
    transcript = []
    converged = False
    t = phases_from_z(params, sigma, splits, z)
    for it in range(1, max_iter + 1):
        mode = "plain" if it <= plain_iter else "damped"
        Ez = yt.Y - higher_power_terms(params, sigma, t)
        z_new = Ez if mode == "plain" else (1 - gamma) * z + gamma * Ez
        step = float(np.abs(z_new - z).max())
        zmax = float(np.abs(z_new).max())
        transcript.append({"iter": it, "mode": mode, "sup_step": step, "max_abs_z": zmax, "R": R})
        if zmax > R:
            raise RadiusViolationError(f"iterate {it} left the ball: {zmax:.3e} > R = {R:.3e}")
        z = z_new
        t = phases_from_z(params, sigma, splits, z)
        if step < tol:
            converged = True
            break
    Ez = yt.Y - higher_power_terms(params, sigma, t)
    lin = linear_class_sums(params, sigma, t)
    cs = prime_class_sums(params, sigma)
    return ConstructionState(
        params.with_sigma(sigma), sigma, yt.W.W, yt.Y, Ez, R,
        [(max(0.0, 2 * mt - tot), tot) for mt, tot in zip(cs.max_terms, cs.totals)],
        splits, z, t, yt.t_q, transcript, converged,
        float(np.abs(lin - Ez).max()), float(np.abs(lin - z).max()),
    )


def _euler_value(ctx: _Context, sigma: float, t_big: np.ndarray | None, t_q: float) -> tuple[complex, float]:
    """F^phi(a/q, m, k, sigma) through its character decomposition over primes <= p_max.

    Returns the value and a bound for the primes above p_max (all with phase pi/log p).
    """
    p = ctx.params
    t_all = np.zeros(len(ctx.all_primes))
    if t_big is not None:
        t_all[ctx.all_primes > p.e_Q] = t_big
    else:
        t_all[ctx.all_primes > p.e_Q] = (ctx.big_arg + math.pi) / ctx.big_logp
    A = power_class_sums(ctx, sigma, t_all, which="all")
    logF = np.einsum("ihb,b->ih", ctx.chars, A)
    F = np.exp(logF)
    Fq = local_factor_q(ctx, sigma, t_q)
    corr = 1 - (p.q - 1) * (Fq - 1)
    c = ctx.chi_a[1:] * ctx.tau_conj[1:]
    pieces = np.abs(c[None, :] * F[:, 1:]).sum(axis=1) + np.abs(corr * F[:, 0])
    value = np.sum(ctx.psi_m_conj * ((c[None, :] * F[:, 1:]).sum(axis=1) - corr * F[:, 0])) / ctx.phi_kq
    logP = math.log(p.p_max)
    B = ctx.f.degree * (float(exp1((sigma - 1) * logP)) + 1 / p.p_max)
    tail = float(pieces.sum()) / ctx.phi_kq * math.expm1(B)
    return complex(value), tail


@dataclass
class VerificationReport:
    sigma: float
    value: complex
    tail_bound: float
    direct_value: complex | None
    direct_tail: float | None
    control_median: float
    control_fraction_above: float
    passed: bool

    def row(self) -> dict:
        d = asdict(self)
        d["value"] = [self.value.real, self.value.imag]
        if self.direct_value is not None:
            d["direct_value"] = [self.direct_value.real, self.direct_value.imag]
        d["abs_value"] = abs(self.value)
        return d


def verify_construction(
    params: ConstructionParams,
    sigma: float,
    t: np.ndarray,
    eps: float = 1e-6,
    *,
    controls: int = 100,
    seed: int = 0,
    direct_N: int | None = None,
) -> VerificationReport:
    """|F^phi(lambda, m, k, sigma)| for the solved phases, its tail budget, and random controls."""
    ctx = context(params)
    tq = ctx.t_q()
    direct_value = direct_tail = None
    if direct_N:
        twist = TwistSpec(params.twist_lambda, params.m, params.k)
        res = phased_eval(ctx.f, twist, assignment(params, t), sigma, N=direct_N)
        direct_value, direct_tail = res.value, res.tail_bound
    if params.rational:
        value, tail = _euler_value(ctx, sigma, t, tq)
    else:
        value, tail = direct_value, direct_tail
        if value is None:
            twist = TwistSpec(params.twist_lambda, params.m, params.k)
            res = phased_eval(ctx.f, twist, assignment(params, t), sigma, N=params.p_max)
            value, tail = res.value, res.tail_bound
    rng = np.random.default_rng(seed)
    ctrl = []
    for _ in range(controls):
        tr = rng.uniform(0, 2 * np.pi, len(ctx.big)) / ctx.big_logp
        if params.rational:
            ctrl.append(abs(_euler_value(ctx, sigma, tr, tq)[0]))
        else:
            twist = TwistSpec(params.twist_lambda, params.m, params.k)
            ph = PhaseAssignment(dict(zip(ctx.big.tolist(), tr.tolist())), pi_above=float(params.p_max))
            ctrl.append(abs(phased_eval(ctx.f, twist, ph, sigma, N=min(params.p_max, 10**5)).value))
    ctrl = np.array(ctrl) if ctrl else np.array([np.inf])
    med = float(np.median(ctrl))
    passed = abs(value) < tail + eps and abs(value) < med
    return VerificationReport(
        sigma, value, tail, direct_value, direct_tail, med, float(np.mean(ctrl > abs(value))), bool(passed)
    )


@dataclass
class ConstructionRun:
    params: ConstructionParams
    sigma_reports: list[BigEnoughReport]
    state: ConstructionState | None
    verification: VerificationReport | None
    identity_residual: float | None
    feasible: bool


def run_construction(params: ConstructionParams, *, force: bool = False, controls: int = 100, seed: int = 0):
    """Full pipeline. Infeasible parameters raise unless ``force`` keeps going at the best sigma."""
    ident = identity_check(params, 1 + sigma_window(params)[0]) if params.rational else None
    sigma, reports = select_sigma(params, force=force)
    feasible = any(r.passed for r in reports)
    state = fixed_point_solve(params.with_sigma(sigma), sigma)
    ver = verify_construction(params, state.sigma, state.t, controls=controls, seed=seed)
    return ConstructionRun(params.with_sigma(state.sigma), reports, state, ver, ident, feasible)


def save_run(path: str | Path, run: ConstructionRun, header: dict | None = None) -> None:
    """Line-delimited JSON: header, sigma scan rows, iteration rows, verification, phases."""
    ctx = context(run.params)
    lines = [{"kind": "header", **(header or {}), "params": asdict(run.params), "feasible": run.feasible}]
    lines += [{"kind": "sigma_scan", **r.row()} for r in run.sigma_reports]
    if run.state is not None:
        lines += [{"kind": "iteration", **row} for row in run.state.transcript]
        lines.append({"kind": "state", "sigma": run.state.sigma, "R": run.state.R,
                      "converged": run.state.converged, "system_residual": run.state.system_residual,
                      "z": [[c.real, c.imag] for c in run.state.z]})
    if run.verification is not None:
        lines.append({"kind": "verification", **run.verification.row()})
    if run.state is not None:
        lines.append({"kind": "phases", "primes": ctx.big.tolist(), "t": run.state.t.tolist(),
                      "t_q": run.state.t_q})
    with open(path, "w") as fh:
        for row in lines:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_run(path: str | Path) -> tuple[ConstructionParams, float, np.ndarray]:
    """Parameters, sigma and solved phases from a saved run."""
    params = sigma = t = None
    try:
        with open(path) as fh:
            for line in fh:
                row = json.loads(line)
                if row["kind"] == "header":
                    params = ConstructionParams(**row["params"])
                elif row["kind"] == "state":
                    sigma = row["sigma"]
                elif row["kind"] == "phases":
                    t = np.array(row["t"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"{path}: malformed run file ({exc!r})") from None
    if params is None or sigma is None or t is None:
        raise DomainError(f"{path} is not a complete construction run")
    if len(t) != len(context(params).big):
        raise DomainError("phase count does not match the parameters")
    return params, sigma, t


@dataclass(frozen=True)
class ScalingRow:
    q: int
    a: int
    Q: float
    sigma: float
    max_W: float
    W_scaled: float
    max_Y: float
    Y_scaled: float
    R: float
    R_scaled: float


def scaling_diagnostics(
    qs=(11, 23, 41, 61, 101), *, f_label="unit", k=1, m=1, delta=0.3, p_max=10**6, lam0=math.log10(2)
) -> list[ScalingRow]:
    """|W| sqrt(q)/log q, |Y| q and R q at sigma = 1 + Q^(-3/2), a the nearest numerator to lam0 q."""
    rows = []
    for q in qs:
        a = _coprime_near(round(lam0 * q), q)
        p = build_parameters(f_label, k, m, q=q, a=a, delta=delta, p_max=p_max)
        sigma = 1 + p.Q**-1.5
        yt, sigma = _with_exceptional_retry(build_Y, p, sigma, strict=False)
        et = build_E(p, sigma, None, yt)
        mW, mY = yt.W.max_abs, float(np.abs(yt.Y).max())
        rows.append(ScalingRow(q, a, p.Q, sigma, mW, mW * math.sqrt(q) / math.log(q), mY, mY * q, et.R, et.R * q))
    return rows


def _coprime_near(a: int, q: int) -> int:
    a = max(1, min(q - 1, a))
    return a


def spread(values) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    return float(v.max() / v.min())
