"""Argument-principle zero counting and refinement, sigma* search experiments."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .arith.phases import Lambda, convergents, e_phase, lambda_label, lambda_one_minus
from .arith.sources import CoefficientSource, get_source
from .errors import BoundaryZeroError, DomainError, NumericalGuardError
from .hurwitz import hurwitz_grid
from .series import TwistSpec, twisted_eval

GUARD = 1e-8
MAX_BOUNDARY_POINTS = 1 << 20
_GOLDEN = (math.sqrt(5) - 1) / 2


class Evaluator:
    """Vectorized s -> F(s) with an evaluation counter."""

    def __init__(self, label: str, fn: Callable[[np.ndarray], np.ndarray], sigma_floor: float | None = None):
        self.label = label
        self._fn = fn
        self.sigma_floor = sigma_floor
        self.calls = 0

    def __call__(self, s):
        arr = np.atleast_1d(np.asarray(s, dtype=np.complex128))
        self.calls += arr.size
        out = self._fn(arr)
        return out if np.ndim(s) else complex(out[0])


def dirichlet_polynomial(text: str) -> Evaluator:
    """Parse e.g. '1-3*2^-s+0.5*5^-s' into sum c_n n^-s."""
    body = text.replace(" ", "")
    terms = re.findall(r"([+-]?[^+-]+(?:\^-s)?)", body.replace("^-s", "^~s"))
    coeffs: dict[int, float] = {}
    for term in terms:
        term = term.replace("^~s", "^-s")
        m = re.fullmatch(r"([+-]?)(?:(\d+(?:\.\d*)?)\*?)?(?:(\d+)\^-s)?", term)
        if not m or (m.group(2) is None and m.group(3) is None):
            raise DomainError(f"cannot parse term {term!r} in {text!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        c = float(m.group(2)) if m.group(2) else 1.0
        n = int(m.group(3)) if m.group(3) else 1
        coeffs[n] = coeffs.get(n, 0.0) + sign * c
    ns = np.array(sorted(coeffs), dtype=np.float64)
    cs = np.array([coeffs[int(n)] for n in ns])

    def fn(s):
        return (cs[None, :] * np.exp(-s[:, None] * np.log(ns)[None, :])).sum(axis=1)

    return Evaluator(f"poly:{text}", fn)


def hurwitz_evaluator(alpha: float) -> Evaluator:
    def fn(s):
        return hurwitz_grid(s, np.array([alpha]))[:, 0]

    return Evaluator(f"hurwitz:{alpha:g}", fn)


def rational_twist_evaluator(a: int, q: int, m: int = 1, k: int = 1) -> Evaluator:
    """F(a/q, m, k, s) for f = unit through Hurwitz values; valid for every s != 1."""
    L = math.lcm(q, k)
    r = np.arange(1, L + 1)
    keep = r % k == m % k
    r = r[keep]
    c = e_phase(Fraction(a, q), r)

    def fn(s):
        hz = hurwitz_grid(s, r / L)
        return np.exp(-s * math.log(L)) * (hz * c[None, :]).sum(axis=1)

    return Evaluator(f"unit:{a}/{q}:{m}:{k}", fn)


def series_evaluator(f: CoefficientSource, twist: TwistSpec) -> Evaluator:
    def fn(s):
        return np.array([twisted_eval(f, twist, complex(v)).value for v in s])

    return Evaluator(f"{f.label}:{lambda_label(twist.lam)}:{twist.m}:{twist.k}", fn, sigma_floor=1.02)


def twist_evaluator(f_label: str, lam: Lambda, m: int = 1, k: int = 1) -> Evaluator:
    f = get_source(f_label)
    if f_label == "unit" and isinstance(lam, Fraction):
        return rational_twist_evaluator(lam.numerator, lam.denominator, m, k)
    return series_evaluator(f, TwistSpec(lam, m, k))


@dataclass(frozen=True)
class Rectangle:
    s1: float
    s2: float
    t1: float
    t2: float

    def __post_init__(self):
        if not (self.s1 < self.s2 and self.t1 < self.t2):
            raise DomainError("rectangle needs s1 < s2 and t1 < t2")

    @property
    def corners(self):
        return [complex(self.s1, self.t1), complex(self.s2, self.t1),
                complex(self.s2, self.t2), complex(self.s1, self.t2)]

    def contains(self, z: complex) -> bool:
        return self.s1 < z.real < self.s2 and self.t1 < z.imag < self.t2

    def edge_moved(self, edge: int, amount: float) -> "Rectangle":
        """Move one edge outward (0 bottom, 1 right, 2 top, 3 left)."""
        s1, s2, t1, t2 = self.s1, self.s2, self.t1, self.t2
        if edge == 0:
            t1 -= amount
        elif edge == 1:
            s2 += amount
        elif edge == 2:
            t2 += amount
        else:
            s1 -= amount
        return Rectangle(s1, s2, t1, t2)


def _check_floor(F: Evaluator, sigma: float):
    if F.sigma_floor is not None and sigma < F.sigma_floor - 1e-15:
        raise DomainError(f"{F.label} is only valid for sigma >= {F.sigma_floor}")


def _path_argument(F: Evaluator, path: Callable[[np.ndarray], np.ndarray], n0: int, guard: float, budget: list):
    """Total change of arg F along path(u), u in [0, 1], with adaptive refinement."""
    u = np.linspace(0.0, 1.0, n0 + 1)
    v = F(path(u))
    budget[0] += u.size
    while True:
        small = np.abs(v) < guard
        if small.any():
            i = int(np.argmax(small))
            raise BoundaryZeroError(f"|F| < {guard:g} on the contour", point=complex(path(u[i:i + 1])[0]))
        d = np.angle(v[1:] / v[:-1])
        bad = np.abs(d) >= math.pi / 2
        if not bad.any():
            return float(d.sum())
        mids = (u[:-1][bad] + u[1:][bad]) / 2
        if budget[0] + mids.size > MAX_BOUNDARY_POINTS:
            raise NumericalGuardError("boundary point cap reached")
        vm = F(path(mids))
        budget[0] += mids.size
        u = np.concatenate([u, mids])
        v = np.concatenate([v, vm])
        order = np.argsort(u, kind="stable")
        u, v = u[order], v[order]


def winding_number(F: Evaluator, rect: Rectangle, n_per_edge: int = 64, guard: float = GUARD) -> int:
    _check_floor(F, rect.s1)
    c = rect.corners
    total = 0.0
    budget = [0]
    for e in range(4):
        a, b = c[e], c[(e + 1) % 4]
        length = abs(b - a)
        n0 = max(8, int(n_per_edge * max(1.0, length)))
        try:
            total += _path_argument(F, lambda u, a=a, b=b: a + (b - a) * u, n0, guard, budget)
        except BoundaryZeroError as exc:
            exc.edge = e
            raise
    w = total / (2 * math.pi)
    if abs(w - round(w)) > 0.05:
        raise NumericalGuardError(f"non-integral winding {w:.4f}")
    return int(round(w))


def circle_winding(F: Evaluator, center: complex, radius: float, n: int = 64, guard: float = GUARD) -> int:
    budget = [0]
    total = _path_argument(F, lambda u: center + radius * np.exp(2j * np.pi * u), n, guard, budget)
    return int(round(total / (2 * math.pi)))


@dataclass
class FoundZero:
    s: complex
    abs_value: float
    radius: float
    winding: int


@dataclass
class ZeroReport:
    rect: Rectangle
    winding: int
    zeros: list[FoundZero]
    evaluations: int
    flagged: list[Rectangle] = field(default_factory=list)
    adjustments: list[str] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.winding == len(self.zeros) and not self.flagged

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma", "t", "abs_F", "radius"])
        for z in self.zeros:
            w.writerow([repr(z.s.real), repr(z.s.imag), repr(z.abs_value), repr(z.radius)])
        return buf.getvalue()


class _Jitter:
    """Deterministic quasi-random offsets in [lo, hi]."""

    def __init__(self, lo: float = 0.5e-4, hi: float = 1e-4):
        self.lo, self.hi, self.k = lo, hi, 0

    def __call__(self) -> float:
        self.k += 1
        return self.lo + (self.hi - self.lo) * ((self.k * _GOLDEN) % 1.0)


def robust_winding(F: Evaluator, rect: Rectangle, jitter: _Jitter, log: list, tries: int = 8):
    """Winding number, moving an edge outward whenever a boundary zero is suspected."""
    for _ in range(tries):
        try:
            return winding_number(F, rect), rect
        except BoundaryZeroError as exc:
            amount = jitter()
            log.append(f"edge {exc.edge} moved by {amount:.3e} near {exc.point}")
            rect = rect.edge_moved(exc.edge, amount)
    raise NumericalGuardError("could not find a zero-free contour")


def newton(F: Evaluator, z0: complex, tol: float, max_iter: int = 60) -> tuple[complex, float, bool]:
    z = complex(z0)
    fz = F(z)
    for _ in range(max_iter):
        if abs(fz) < tol:
            return z, abs(fz), True
        h = 1e-6 * max(1.0, abs(z))
        d = (F(z + h) - F(z - h)) / (2 * h)
        if d == 0:
            break
        step = fz / d
        if abs(step) > 0.5:
            step *= 0.5 / abs(step)
        z_new = _clamp(F, z - step, h)
        f_new = F(z_new)
        # backtrack once if the step made things worse
        if abs(f_new) > abs(fz):
            z_new = _clamp(F, z - step / 4, h)
            f_new = F(z_new)
        z, fz = z_new, f_new
    return z, abs(fz), abs(fz) < tol


def _clamp(F: Evaluator, z: complex, h: float) -> complex:
    """Keep Newton iterates (and their difference stencil) inside the evaluator's domain."""
    if F.sigma_floor is not None and z.real < F.sigma_floor + 2 * h:
        return complex(F.sigma_floor + 2 * h, z.imag)
    return z


def _split(rect: Rectangle, jitter: _Jitter) -> list[Rectangle]:
    sm = rect.s1 + (rect.s2 - rect.s1) * (0.5 + 0.01 * (jitter() / 1e-4 - 0.75))
    tm = rect.t1 + (rect.t2 - rect.t1) * (0.5 + 0.01 * (jitter() / 1e-4 - 0.75))
    return [
        Rectangle(rect.s1, sm, rect.t1, tm), Rectangle(sm, rect.s2, rect.t1, tm),
        Rectangle(rect.s1, sm, tm, rect.t2), Rectangle(sm, rect.s2, tm, rect.t2),
    ]


def _grid_start(F: Evaluator, rect: Rectangle, n: int = 9) -> complex:
    ss = np.linspace(rect.s1, rect.s2, n + 2)[1:-1]
    ts = np.linspace(rect.t1, rect.t2, n + 2)[1:-1]
    pts = (ss[None, :] + 1j * ts[:, None]).ravel()
    vals = np.abs(F(pts))
    return complex(pts[int(np.argmin(vals))])


def find_zeros(
    F: Evaluator, rect: Rectangle, tol: float = 1e-10, *, max_depth: int = 14, verify_radius: float = 1e-3
) -> ZeroReport:
    """Count zeros by the argument principle, isolate them by subdivision, refine by Newton."""
    jitter = _Jitter()
    log: list[str] = []
    start_calls = F.calls
    w, rect = robust_winding(F, rect, jitter, log)
    zeros: list[FoundZero] = []
    flagged: list[Rectangle] = []

    def visit(cell: Rectangle, wc: int, depth: int):
        if wc == 0:
            return
        if wc == 1:
            for z0 in (complex((cell.s1 + cell.s2) / 2, (cell.t1 + cell.t2) / 2), _grid_start(F, cell)):
                z, fz, ok = newton(F, z0, tol)
                if ok and cell.contains(z):
                    r = min(verify_radius, 0.49 * min(z.real - cell.s1, cell.s2 - z.real, z.imag - cell.t1, cell.t2 - z.imag))
                    r = max(r, 1e-6)
                    try:
                        cw = circle_winding(F, z, r)
                    except BoundaryZeroError:
                        cw = circle_winding(F, z, r * 0.7)
                    zeros.append(FoundZero(z, fz, r, cw))
                    return
        if depth >= max_depth:
            flagged.append(cell)
            return
        for sub in _split(cell, jitter):
            try:
                ws = winding_number(F, sub)
            except BoundaryZeroError:
                # a zero sits on an interior split line; retry with a fresh split
                return visit_resplit(cell, wc, depth)
            visit(sub, ws, depth + 1)

    def visit_resplit(cell, wc, depth, tries=6):
        for _ in range(tries):
            subs = _split(cell, jitter)
            try:
                ws = [winding_number(F, sub) for sub in subs]
            except BoundaryZeroError:
                continue
            if sum(ws) != wc:
                continue
            for sub, wsub in zip(subs, ws):
                visit(sub, wsub, depth + 1)
            return
        flagged.append(cell)

    visit(rect, w, 0)
    zeros.sort(key=lambda z: (z.s.imag, z.s.real))
    return ZeroReport(rect, w, zeros, F.calls - start_calls, flagged, log)


@dataclass
class SigmaStarEstimate:
    label: str
    lower_bound: float | None
    box: tuple[float, float, float, float]
    status: str  # "zero-found" or "none-found"
    zeros: list[FoundZero]
    transcript: list[dict]

    def transcript_jsonl(self) -> str:
        return "".join(json.dumps(row) + "\n" for row in self.transcript)


def sigma_star_estimate(
    F: Evaluator,
    sigma_window: tuple[float, float],
    t_max: float,
    budget: int = 200_000,
    *,
    band: float | None = None,
    height: float = 10.0,
    t_min: float = 0.0,
) -> SigmaStarEstimate:
    """Scan boxes from high sigma down; report the largest certified real part found."""
    lo, hi = sigma_window
    band = band or (hi - lo)
    edges = []
    top = hi
    while top > lo + 1e-15:
        edges.append((max(lo, top - band), top))
        top -= band
    transcript, found = [], []
    start = F.calls
    status = "none-found"
    for s1, s2 in edges:
        t = t_min
        while t < t_max:
            if F.calls - start > budget:
                transcript.append({"event": "budget", "calls": F.calls - start})
                break
            rect = Rectangle(s1, s2, t, min(t + height, t_max))
            try:
                rep = find_zeros(F, rect, tol=1e-10)
            except NumericalGuardError as exc:
                transcript.append({"box": [s1, s2, t, rect.t2], "error": str(exc)})
                t += height
                continue
            good = [z for z in rep.zeros if z.winding == 1 and z.abs_value < 1e-8 and z.s.real > 1]
            transcript.append({"box": [rep.rect.s1, rep.rect.s2, rep.rect.t1, rep.rect.t2],
                               "winding": rep.winding, "zeros": [[z.s.real, z.s.imag] for z in good],
                               "calls": F.calls - start})
            found.extend(good)
            t += height
        if found:
            status = "zero-found"
            break
    lb = max((z.s.real for z in found), default=None)
    return SigmaStarEstimate(F.label, lb, (lo, hi, t_min, t_max), status, found, transcript)


def continuity_experiment(
    f_label: str, lam: Lambda, count: int = 4, *, sigma_window=(1.02, 1.2), t_max: float = 100.0, budget: int = 100_000
) -> list[dict]:
    """sigma*-estimates along the convergents of lam and at lam itself."""
    if isinstance(lam, Fraction) and lam == Fraction(1, 2):
        raise DomainError("lambda = 1/2 is excluded")
    if isinstance(lam, Fraction):
        xs = [lam] * count  # a rational lambda is its own approximating sequence
    else:
        xs = [x for x in convergents(lam, count + 1) if x > 0][:count]
    points = list(xs) + [lam]
    rows = []
    for x in points:
        F = twist_evaluator(f_label, x)
        est = sigma_star_estimate(F, sigma_window, t_max, budget)
        rows.append({"x": lambda_label(x), "status": est.status, "lower_bound": est.lower_bound,
                     "zeros": [[z.s.real, z.s.imag] for z in est.zeros]})
    return rows


@dataclass
class SymmetryReport:
    max_deviation: float
    rows: list
    passed: bool


def symmetry_check(f: CoefficientSource, twist: TwistSpec, samples, tol: float = 1e-12) -> SymmetryReport:
    """F(1 - lam, m, k, conj s) against conj F(lam, m, k, s)."""
    if not f.real_valued:
        raise DomainError("symmetry needs a real-valued source")
    mirror = TwistSpec(lambda_one_minus(twist.lam), twist.m, twist.k)
    rows = []
    worst = 0.0
    for s in samples:
        s = complex(s)
        a = twisted_eval(f, twist, s).value
        b = twisted_eval(f, mirror, s.conjugate()).value
        dev = abs(b - a.conjugate()) / max(1.0, abs(a))
        worst = max(worst, dev)
        rows.append((s, a, b, dev))
    return SymmetryReport(worst, rows, worst < tol)
