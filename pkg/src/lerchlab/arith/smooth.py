"""Enumeration and counting of y-smooth integers."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..errors import CapacityError, DomainError
from .primes import cached_sieve

SMOOTH_BUDGET = 6 * 10**7


def _grow(x: int, y: float, prime_power_value: Callable[[int, int], complex] | None):
    ns = np.ones(1, dtype=np.int64)
    vals = np.ones(1, dtype=np.complex128) if prime_power_value else None
    ymax = min(int(math.floor(y)), x)
    if ymax < 2:
        return ns, vals
    for p in cached_sieve(max(ymax, 2)).primes_in(0, ymax):
        p = int(p)
        parts = [ns]
        vparts = [vals] if vals is not None else None
        pk, h = p, 1
        while pk <= x:
            sel = ns <= x // pk
            if not sel.any():
                break
            parts.append(ns[sel] * pk)
            if vals is not None:
                vparts.append(vals[sel] * prime_power_value(p, h))
            pk *= p
            h += 1
        ns = np.concatenate(parts)
        if ns.size > SMOOTH_BUDGET:
            raise CapacityError(f"more than {SMOOTH_BUDGET} smooth numbers below {x}")
        if vals is not None:
            vals = np.concatenate(vparts)
    return ns, vals


def smooth_enumerate_with_values(
    x: float, y: float, prime_power_value: Callable[[int, int], complex]
) -> tuple[np.ndarray, np.ndarray]:
    """Sorted y-smooth n <= x together with f(n) built from f(p^h)."""
    if x < 1:
        raise DomainError("x must be at least 1")
    ns, vals = _grow(int(math.floor(x)), y, prime_power_value)
    order = np.argsort(ns, kind="stable")
    return ns[order], vals[order]


def smooth_enumerate(x: float, y: float) -> np.ndarray:
    if x < 1:
        raise DomainError("x must be at least 1")
    ns, _ = _grow(int(math.floor(x)), y, None)
    ns.sort()
    return ns


def smooth_count(x: float, y: float) -> int:
    """Psi(x, y)."""
    if x < 1:
        return 0
    if y >= x:
        return int(math.floor(x))
    return int(smooth_enumerate(x, y).size)
