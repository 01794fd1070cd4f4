"""Hurwitz zeta by Euler-Maclaurin summation."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainError


@lru_cache(maxsize=1)
def _bernoulli_even(count: int = 40) -> tuple[float, ...]:
    """B_{2j}/(2j)! for j = 1..count."""
    n_max = 2 * count
    a = [Fraction(0)] * (n_max + 1)
    B = []
    for m in range(n_max + 1):
        a[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
        B.append(a[0])
    return tuple(float(B[2 * j] / math.factorial(2 * j)) for j in range(1, count + 1))


def hurwitz_vec(s: complex, x: np.ndarray, eps: float = 1e-16, terms: int | None = None):
    """zeta(s, x) for an array of x > 0; returns (values, error_estimate array)."""
    s = complex(s)
    if s == 1:
        raise DomainError("pole of the Hurwitz zeta function at s = 1")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(x <= 0):
        raise DomainError("Hurwitz parameter must be positive")
    coef = _bernoulli_even()
    K = terms if terms is not None else min(len(coef) - 1, max(8, 12 + int(abs(s.imag) // 50)))
    M = int(math.ceil(abs(s) + 2 * K + 10))
    # shift: direct terms for n < M - floor(x), then tail from a = x + shift
    shift = np.maximum(0, M - np.floor(x)).astype(np.int64)
    out = np.zeros(x.shape, dtype=np.complex128)
    smax = int(shift.max())
    for n in range(smax):
        active = shift > n
        out[active] += np.exp(-s * np.log(x[active] + n))
    a = x + shift
    la = np.log(a)
    a_pow = np.exp(-s * la)
    out += a * a_pow / (s - 1) + a_pow / 2
    rising = s  # (s)_{2j-1}
    pw = a_pow / a
    last = np.zeros(x.shape)
    for j in range(1, K + 2):
        term = coef[j - 1] * rising * pw
        if j == K + 1:
            last = np.abs(term) * abs(s + 2 * K + 1) / (s.real + 2 * K + 1)
            break
        out += term
        rising *= (s + 2 * j - 1) * (s + 2 * j)
        pw = pw / (a * a)
    err = last + 4e-16 * (np.abs(out) + x**-s.real)
    return out, err


def hurwitz_em(s: complex, alpha: float, eps: float = 1e-15) -> complex:
    """zeta(s, alpha) = sum_{n>=0} (n + alpha)^-s, alpha in (0, 1]."""
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    K = 8
    while True:
        v, err = hurwitz_vec(s, np.array([alpha]), terms=K)
        if err[0] <= eps * max(1.0, abs(v[0])) or K >= 38:
            return complex(v[0])
        K += 6


def hurwitz_em_with_error(s: complex, alpha: float) -> tuple[complex, float]:
    v, err = hurwitz_vec(s, np.array([alpha]))
    return complex(v[0]), float(err[0])


def hurwitz_grid(s: np.ndarray, x: np.ndarray, K: int = 14) -> np.ndarray:
    """zeta(s_i, x_j) on the outer grid of an array of s and an array of x > 0."""
    s = np.atleast_1d(np.asarray(s, dtype=np.complex128))[:, None]
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))[None, :]
    if np.any(s == 1):
        raise DomainError("pole of the Hurwitz zeta function at s = 1")
    coef = _bernoulli_even()
    M = int(math.ceil(np.abs(s).max() + 2 * K + 10))
    shift = np.maximum(0, M - np.floor(x)).astype(np.int64)
    out = np.zeros(np.broadcast_shapes(s.shape, x.shape), dtype=np.complex128)
    for n in range(int(shift.max())):
        active = (shift > n).astype(np.float64)
        out += active * np.exp(-s * np.log(x + n))
    a = x + shift
    a_pow = np.exp(-s * np.log(a))
    out += a * a_pow / (s - 1) + a_pow / 2
    rising = s.copy()
    pw = a_pow / a
    for j in range(1, K + 1):
        out += coef[j - 1] * rising * pw
        rising = rising * (s + 2 * j - 1) * (s + 2 * j)
        pw = pw / (a * a)
    return out
