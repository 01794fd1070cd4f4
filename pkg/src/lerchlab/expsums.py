"""Exponential sums over integers and smooth integers, and bound harnesses."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .arith.phases import Lambda, e_phase
from .arith.primes import cached_sieve, euler_phi, is_prime
from .arith.smooth import smooth_count, smooth_enumerate_with_values
from .arith.sources import CoefficientSource, get_source
from .characters import character_family
from .errors import CapacityError, DomainError
from .series import csum

EXPSUM_BUDGET = 10**8
_CHUNK = 1 << 21


@dataclass(frozen=True)
class ExpSumReport:
    x: float
    y: float | None
    alpha: str
    f: str
    value: complex
    bound_rhs: float
    ratio: float
    r: int | None = None
    s: int | None = None

    def row(self) -> list:
        return [self.x, "" if self.y is None else self.y, self.r, self.s, self.f,
                abs(self.value), self.bound_rhs, self.ratio]


def exp_sum(f: CoefficientSource, x: float, alpha: Lambda) -> complex:
    """S(x, alpha, f) = sum_{n <= x} f(n) e(alpha n)."""
    X = int(math.floor(x))
    if X > EXPSUM_BUDGET:
        raise CapacityError(f"x = {X} exceeds budget {EXPSUM_BUDGET}")
    if X < 1:
        return 0j
    if f.period is None:
        vals = f.values(X)[1:]
        return csum(vals * e_phase(alpha, np.arange(1, X + 1)))
    tab = f.periodic_table()
    parts = []
    for a in range(1, X + 1, _CHUNK):
        n = np.arange(a, min(X + 1, a + _CHUNK))
        parts.append(csum(tab[n % len(tab)] * e_phase(alpha, n)))
    return complex(math.fsum(p.real for p in parts), math.fsum(p.imag for p in parts))


def smooth_values(f: CoefficientSource, x: float, y: float) -> tuple[np.ndarray, np.ndarray]:
    return smooth_enumerate_with_values(x, y, f.value_at_prime_power)


def smooth_exp_sum(f: CoefficientSource, x: float, y: float, alpha: Lambda) -> complex:
    """S(x, y, alpha, f) = sum over n <= x with P(n) <= y of f(n) e(alpha n)."""
    ns, vals = smooth_values(f, x, y)
    return csum(vals * e_phase(alpha, ns))


def mv_rhs(x: float, q: int) -> float:
    return x / math.log(2 * x) + x / math.sqrt(euler_phi(q)) + math.sqrt(q * x) * math.log(2 * x / q) ** 1.5


def mv_harness(f: CoefficientSource, q: int, a: int, xs) -> list[ExpSumReport]:
    """|S(x, a/q, f)| against the Montgomery-Vaughan right-hand side."""
    out = []
    for x in xs:
        if x < q:
            raise DomainError(f"bound requires x >= q (x={x}, q={q})")
        v = exp_sum(f, x, Fraction(a, q))
        rhs = mv_rhs(x, q)
        out.append(ExpSumReport(x, None, f"{a}/{q}", f.label, v, rhs, abs(v) / rhs, q, a))
    return out


@dataclass(frozen=True)
class HarnessGrid:
    xs: tuple[int, ...] = (10**3, 10**4, 10**5, 10**6)
    y_exponent: float = 2 / 3
    rs: tuple[int, ...] = tuple(p for p in range(2, 98) if is_prime(p))
    f_labels: tuple[str, ...] = ("unit", "character:3:1", "tau")
    eps0: float = 2 / 3
    A: float = 8 / 1.3

    def y_of(self, x: float) -> float:
        return math.exp(math.log(x) ** self.y_exponent)

    def check(self, x: float, y: float, r: int) -> None:
        """Admissible window; y on the lower edge exp((log x)^eps0) is accepted."""
        lower = math.exp(math.log(x) ** self.eps0)
        if y < lower * (1 - 1e-12):
            raise DomainError(f"y={y:.4g} below exp((log x)^eps0)={lower:.4g}")
        if y > x:
            raise DomainError(f"y={y:.4g} exceeds x={x}")
        if r > math.log(x) ** self.A:
            raise DomainError(f"r={r} exceeds (log x)^A")
        if not is_prime(r):
            raise DomainError(f"r={r} is not prime")


def maier_rhs(sq_all: float, psi_all: int, sq_r: float, psi_r: int, fr: float, r: int) -> float:
    return math.sqrt(sq_all) * math.sqrt(psi_all / math.sqrt(r)) + abs(fr) * math.sqrt(sq_r) * math.sqrt(psi_r)


def maier_point(f: CoefficientSource, x: float, y: float, r: int, ns=None, vals=None) -> list[ExpSumReport]:
    """All residues s mod r at one (x, y, r): smooth sums S(x, y, s/r, f) and the bound."""
    if ns is None:
        ns, vals = smooth_values(f, x, y)
    mod = ns % r
    B = np.bincount(mod, weights=vals.real, minlength=r) + 1j * np.bincount(mod, weights=vals.imag, minlength=r)
    # S(s) = sum_c B_c e(sc/r)
    S = np.fft.ifft(B) * r
    absq = np.abs(vals) ** 2
    sq_all = math.fsum(absq)
    cut = np.searchsorted(ns, math.floor(x / r), side="right")
    sq_r = math.fsum(absq[:cut])
    # f(r) enters the bound whether or not r is y-smooth
    fr = f.value_at_prime_power(r, 1)
    rhs = maier_rhs(sq_all, len(ns), sq_r, int(cut), abs(fr), r)
    return [
        ExpSumReport(x, y, f"{s}/{r}", f.label, complex(S[s]), rhs, abs(S[s]) / rhs, r, s)
        for s in range(1, r)
    ]


@dataclass
class MaierSummary:
    reports: list[ExpSumReport]
    max_by_key: dict = field(default_factory=dict)  # (f, r) -> list of max ratio per x

    @property
    def max_ratio(self) -> float:
        return max(r.ratio for r in self.reports)

    @property
    def median_ratio(self) -> float:
        return float(np.median([r.ratio for r in self.reports]))

    def max_by_r(self) -> dict:
        """r -> max ratio per x, taken over every f and residue at that r."""
        out: dict = {}
        for (_, r), seq in self.max_by_key.items():
            cur = out.setdefault(r, list(seq))
            out[r] = [max(a, b) for a, b in zip(cur, seq)]
        return out

    def trend_violations(self, noise: float = 0.2, per_source: bool = True) -> list[tuple]:
        """Steps where a max ratio grew by more than ``noise``; keyed (f, r), or r alone."""
        bad = []
        series = self.max_by_key if per_source else {("*", r): v for r, v in self.max_by_r().items()}
        for key, seq in series.items():
            for i in range(1, len(seq)):
                if seq[i] > seq[i - 1] * (1 + noise):
                    bad.append((key, i, seq[i - 1], seq[i]))
        return bad

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "r", "s", "f", "abs_S", "rhs", "ratio"])
        for rep in self.reports:
            w.writerow(rep.row())
        return buf.getvalue()

    def summary_json(self) -> dict:
        return {
            "max_ratio": self.max_ratio,
            "median_ratio": self.median_ratio,
            "max_by_f_r": {f"{k[0]}|{k[1]}": v for k, v in self.max_by_key.items()},
            "trend_violations": [[f"{k[0]}|{k[1]}", i, a, b] for k, i, a, b in self.trend_violations()],
            "trend_violations_fixed_r": [[k[1], i, a, b] for k, i, a, b in self.trend_violations(per_source=False)],
        }


def maier_harness(grid: HarnessGrid = HarnessGrid()) -> MaierSummary:
    reports: list[ExpSumReport] = []
    maxima: dict = {}
    for label in grid.f_labels:
        f = get_source(label)
        for x in grid.xs:
            y = grid.y_of(x)
            ns, vals = smooth_values(f, x, y)
            for r in grid.rs:
                grid.check(x, y, r)
                pts = maier_point(f, x, y, r, ns, vals)
                reports.extend(pts)
                maxima.setdefault((label, r), []).append(max(p.ratio for p in pts))
    return MaierSummary(reports, maxima)


def update_history(path: str | Path, summary: MaierSummary, noise: float = 0.2) -> list[str]:
    """Merge per-(f, r) maxima into a JSON history file; return keys that regressed."""
    path = Path(path)
    hist = json.loads(path.read_text()) if path.exists() else {}
    regressed = []
    for (label, r), seq in summary.max_by_key.items():
        key = f"{label}|{r}"
        new = max(seq)
        old = hist.get(key)
        if old is not None and new > old * (1 + noise):
            regressed.append(key)
        hist[key] = max(new, old or 0.0)
    path.write_text(json.dumps(hist, indent=1, sort_keys=True))
    return regressed


@dataclass(frozen=True)
class DeBruijnFit:
    c: float
    C: float
    C_least_squares: float
    points: list  # (x, Q, psi, bound)
    residuals: list
    excluded: list

    @property
    def all_satisfied(self) -> bool:
        return all(psi <= bound * (1 + 1e-12) for _, _, psi, bound in self.points)


def debruijn_fit(xs, Qs) -> DeBruijnFit:
    """Fit Psi(x, e^Q) <= C x^(1 - c/Q) on a grid."""
    used, excluded = [], []
    for x in xs:
        for Q in Qs:
            if math.exp(Q) >= x:
                excluded.append((x, Q, math.floor(x)))
                continue
            used.append((x, Q, smooth_count(x, math.exp(Q))))
    u = np.array([math.log(x) / Q for x, Q, _ in used])
    if len(used) < 2 or np.ptp(u) == 0:
        raise DomainError("de Bruijn fit needs at least two points with distinct log x / Q")
    yv = np.array([math.log(p) - math.log(x) for x, _, p in used])
    A = np.column_stack([np.ones_like(u), -u])
    (logC, c), *_ = np.linalg.lstsq(A, yv, rcond=None)
    resid = yv - A @ np.array([logC, c])
    logC_env = logC + max(0.0, float(resid.max()))
    C = math.exp(logC_env) * (1 + 1e-12)
    pts = [(x, Q, p, C * x ** (1 - c / Q)) for x, Q, p in used]
    return DeBruijnFit(float(c), C, math.exp(logC), pts, resid.tolist(), excluded)


@dataclass(frozen=True)
class FdReport:
    label: str
    d: float
    x_max: int
    member: bool
    prime_violations: list
    mean_square_violations: list
    checkpoints: list


def fd_membership(f: CoefficientSource, d: float, x_max: int) -> FdReport:
    """Finite check of |f(p)| <= d and sum_{n<=x} |f(n)|^2 <= d^2 x."""
    primes = cached_sieve(max(x_max, 2)).primes_in(0, x_max)
    fp = np.abs(f.prime_values(primes))
    pv = [int(p) for p in primes[fp > d * (1 + 1e-12)]]
    vals = np.abs(f.values(x_max)) ** 2
    cums = np.cumsum(vals)
    checks, sv = [], []
    x = 10
    marks = []
    while x < x_max:
        marks.append(x)
        x *= 10
    marks.append(x_max)
    for x in marks:
        tot = float(cums[x])
        checks.append((x, tot, d * d * x))
        if tot > d * d * x * (1 + 1e-12):
            sv.append(x)
    return FdReport(f.label, d, x_max, not pv and not sv, pv, sv, checks)


def prime_character_diagnostic(f: CoefficientSource, qs=(3, 5, 7, 11, 13), xs=(10**5, 10**6, 10**7)) -> list[dict]:
    """Ratio of |sum_{p<=x} |f(p)|^2 chi(p)| to x / (phi(q) log^2 x) over nonprincipal chi."""
    out = []
    sv = cached_sieve(max(xs))
    for q in qs:
        fam = character_family(q)
        for x in xs:
            p = sv.primes_in(0, x)
            w = np.abs(f.prime_values(p)) ** 2
            counts = np.bincount(p % q, weights=w, minlength=q)
            ref = x / (euler_phi(q) * math.log(x) ** 2)
            worst = max(abs(csum(chi.table() * counts)) for chi in fam.characters[1:])
            out.append({"q": q, "x": x, "max_abs_sum": worst, "reference": ref, "ratio": worst / ref})
    return out
