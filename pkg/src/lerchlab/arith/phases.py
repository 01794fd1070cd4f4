"""Exact and 128-bit fixed-point representations of twist parameters."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from ..errors import DomainError, NotFoundError
from .primes import cached_sieve, is_prime

SCALE_BITS = 128
_SCALE = 1 << SCALE_BITS
_M64 = (1 << 64) - 1

Rational = Fraction


@dataclass(frozen=True)
class FixedFraction:
    """A number in [0, 1) stored as ``raw / 2**128``."""

    raw: int

    def __post_init__(self):
        if not 0 <= self.raw < _SCALE:
            raise DomainError("raw value out of range")

    @classmethod
    def from_fraction(cls, x: Fraction) -> "FixedFraction":
        y = x - math.floor(x)
        return cls(int(round(y * _SCALE)) % _SCALE)

    @classmethod
    def from_decimal(cls, text: str) -> "FixedFraction":
        return cls.from_fraction(Fraction(text.strip()))

    def to_fraction(self) -> Fraction:
        return Fraction(self.raw, _SCALE)

    def __float__(self) -> float:
        return self.raw / _SCALE

    def one_minus(self) -> "FixedFraction":
        return FixedFraction((_SCALE - self.raw) % _SCALE)

    def divide(self, k: int) -> "FixedFraction":
        return FixedFraction((self.raw + k // 2) // k % _SCALE)

    def __str__(self) -> str:
        return f"{float(self):.17g}~"


Lambda = Union[Fraction, FixedFraction]


def parse_lambda(text: str) -> Lambda:
    """'a/q' or an integer gives an exact Fraction; a decimal gives a FixedFraction."""
    text = text.strip()
    if "/" in text or text.lstrip("+-").isdigit():
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"bad rational {text!r}") from exc
    try:
        value = Fraction(text)
    except ValueError as exc:
        raise DomainError(f"bad decimal {text!r}") from exc
    digits = len(text.split(".")[-1]) if "." in text else 0
    if digits < 20:
        warnings.warn(f"lambda given with only {digits} decimals", stacklevel=2)
    return FixedFraction.from_fraction(value)


def as_fraction(lam: Lambda) -> Fraction:
    return lam if isinstance(lam, Fraction) else lam.to_fraction()


def lambda_float(lam: Lambda) -> float:
    return float(lam)


def lambda_one_minus(lam: Lambda) -> Lambda:
    return 1 - lam if isinstance(lam, Fraction) else lam.one_minus()


def lambda_divide(lam: Lambda, k: int) -> Lambda:
    return lam / k if isinstance(lam, Fraction) else lam.divide(k)


def lambda_label(lam: Lambda) -> str:
    if isinstance(lam, Fraction):
        return f"{lam.numerator}/{lam.denominator}"
    return format_fixed(lam)


def format_fixed(lam: FixedFraction, digits: int = 38) -> str:
    num = lam.raw * 10**digits
    return "0." + str((num + _SCALE // 2) // _SCALE).rjust(digits, "0")


def frac_part(lam: Lambda, n: np.ndarray) -> np.ndarray:
    """``lam * n mod 1`` as float64, with exact reduction before rounding."""
    n = np.asarray(n, dtype=np.int64)
    if isinstance(lam, Fraction):
        a, q = lam.numerator, lam.denominator
        if q == 1:
            return np.zeros(n.shape)
        if q < 2**31:
            r = ((a % q) * (n % q)) % q
            return r / q
        r = np.array([(a * int(v)) % q for v in n.ravel()], dtype=object)
        return np.array([float(Fraction(int(v), q)) for v in r]).reshape(n.shape)
    if n.size and (n.min() < 0 or n.max() >= 2**31):
        raise DomainError("fixed-point phase reduction requires 0 <= n < 2**31")
    hi = np.uint64(lam.raw >> 64)
    l1 = np.uint64((lam.raw >> 32) & 0xFFFFFFFF)
    l0 = np.uint64(lam.raw & 0xFFFFFFFF)
    nn = n.astype(np.uint64)
    with np.errstate(over="ignore"):
        u = l1 * nn
        v = l0 * nn
        low = (u & np.uint64(0xFFFFFFFF)) << np.uint64(32)
        c_lo = low + v
        carry = (c_lo < low).astype(np.uint64)
        c_hi = (u >> np.uint64(32)) + carry
        top = hi * nn + c_hi
    frac = (top.astype(np.float64) + c_lo.astype(np.float64) / 2.0**64) / 2.0**64
    return np.where(frac >= 1.0, frac - 1.0, frac)


def e_phase(lam: Lambda, n: np.ndarray) -> np.ndarray:
    """e(lam n) = exp(2 pi i lam n)."""
    return np.exp(2j * np.pi * frac_part(lam, n))


def convergents(lam: Lambda, count: int) -> list[Fraction]:
    """Continued-fraction convergents of lam with strictly increasing denominators."""
    x = as_fraction(lam)
    if not 0 < x < 1:
        raise DomainError("convergents need 0 < lambda < 1")
    # beyond this denominator the fixed-point value no longer pins the convergent
    rmax = _SCALE if isinstance(lam, Fraction) else 2**58
    out: list[Fraction] = []
    p0, q0, p1, q1 = 0, 1, 1, 0
    rem = x
    while len(out) < count:
        a = math.floor(rem)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        if q1 > rmax:
            break
        c = Fraction(p1, q1)
        if out and out[-1].denominator == q1:
            out[-1] = c
        else:
            out.append(c)
        frac = rem - a
        if frac == 0:
            break
        rem = 1 / frac
    return out[:count]


def prime_denominator_approx(lam: Lambda, delta: float, q_min: int, q_max: int) -> tuple[int, int]:
    """Smallest odd prime q in range with |lam - a/q| < q^-(1+delta), a nearest to lam q."""
    if not 0 < delta < 1 / 3:
        raise DomainError("delta must lie in (0, 1/3)")
    x = as_fraction(lam)
    lo = max(q_min, 3)
    for q in cached_sieve(max(q_max, 3)).primes_in(lo - 1, q_max):
        q = int(q)
        a = round(x * q)
        if math.gcd(a, q) != 1:
            continue
        if float(abs(x - Fraction(a, q))) < q ** -(1 + delta):
            return a, q
    raise NotFoundError(f"no prime q in [{q_min}, {q_max}] with the required approximation")


__all__ = [
    "FixedFraction", "Rational", "Lambda", "parse_lambda", "frac_part", "e_phase",
    "convergents", "prime_denominator_approx", "is_prime",
]
