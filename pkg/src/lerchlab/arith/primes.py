"""Prime sieve and elementary multiplicative functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import CapacityError, DomainError

SIEVE_BUDGET = 2 * 10**8


@dataclass(frozen=True)
class PrimeSieve:
    limit: int
    is_prime: np.ndarray = field(repr=False)
    primes: np.ndarray = field(repr=False)

    def __contains__(self, n: int) -> bool:
        return 0 <= n <= self.limit and bool(self.is_prime[n])

    def primes_in(self, lo: float, hi: float) -> np.ndarray:
        """Primes p with lo < p <= hi."""
        a = np.searchsorted(self.primes, lo, side="right")
        b = np.searchsorted(self.primes, hi, side="right")
        return self.primes[a:b]


def sieve_primes(limit: int) -> PrimeSieve:
    if limit < 2:
        raise DomainError("sieve limit must be at least 2")
    if limit > SIEVE_BUDGET:
        raise CapacityError(f"sieve limit {limit} exceeds budget {SIEVE_BUDGET}")
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    flags[4::2] = False
    for p in range(3, math.isqrt(limit) + 1, 2):
        if flags[p]:
            flags[p * p :: 2 * p] = False
    flags.setflags(write=False)
    primes = np.flatnonzero(flags).astype(np.int64)
    primes.setflags(write=False)
    return PrimeSieve(limit, flags, primes)


_sieve_cache: dict[int, PrimeSieve] = {}


def cached_sieve(limit: int) -> PrimeSieve:
    """Shared read-only sieve covering at least `limit`."""
    for lim, sv in _sieve_cache.items():
        if lim >= limit:
            return sv
    size = max(limit, 1 << 16)
    sv = sieve_primes(size)
    _sieve_cache[size] = sv
    return sv


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def factorize(n: int) -> dict[int, int]:
    if n < 1:
        raise DomainError("n must be positive")
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def largest_prime_factor(n: int) -> int:
    """P(n), with P(1) = 1."""
    if n < 1:
        raise DomainError("n must be positive")
    return max(factorize(n), default=1)


def largest_prime_factor_table(N: int) -> np.ndarray:
    """P(n) for 0 <= n <= N (entries 0 and 1 are 1)."""
    P = np.ones(N + 1, dtype=np.int64)
    for p in cached_sieve(max(N, 2)).primes_in(0, N):
        P[p::p] = p
    return P


def euler_phi(n: int) -> int:
    if n < 1:
        raise DomainError("n must be positive")
    result = n
    for p in factorize(n):
        result -= result // p
    return result


def primitive_root(q: int) -> tuple[int, np.ndarray]:
    """Least primitive root g mod an odd prime q and the index table.

    ``nu[n]`` is the index of n for 1 <= n <= q-1; ``nu[0]`` is -1.
    """
    if q < 3 or not is_prime(q):
        raise DomainError(f"{q} is not an odd prime")
    factors = list(factorize(q - 1))
    g = 2
    while any(pow(g, (q - 1) // r, q) == 1 for r in factors):
        g += 1
    nu = np.full(q, -1, dtype=np.int64)
    x = 1
    for e in range(q - 1):
        nu[x] = e
        x = x * g % q
    return g, nu
