"""Multiplicative coefficient sources f(n) given through their prime powers."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from ..errors import CapacityError, DomainError, InvariantError
from .primes import cached_sieve
from .tau import TAU_BUDGET, ramanujan_tau

VALUES_BUDGET = 5 * 10**7


def complete_homogeneous(roots: np.ndarray, hmax: int) -> np.ndarray:
    """Coefficients of prod_j (1 - r_j X)^-1 up to X^hmax."""
    c = np.zeros(hmax + 1, dtype=np.complex128)
    c[0] = 1.0
    for r in roots:
        for h in range(1, hmax + 1):
            c[h] += r * c[h - 1]
    return c


class CoefficientSource:
    """f(n) multiplicative, described by f(p^h) and the local roots f_j(p).

    Subclasses set ``label``, ``degree`` and implement ``local_roots``; the
    defaults derive prime-power values from the roots.
    """

    label: str = "?"
    degree: int = 1
    real_valued: bool = False
    completely_multiplicative: bool = False
    # |f(n)| <= C n^theta, used only for heuristic truncation choices
    bound_theta: float = 0.0

    def local_roots(self, p: int) -> np.ndarray:
        raise NotImplementedError

    def value_at_prime_power(self, p: int, h: int) -> complex:
        if h == 0:
            return 1.0 + 0j
        return complex(complete_homogeneous(self.local_roots(p), h)[h])

    def prime_values(self, primes: np.ndarray) -> np.ndarray:
        return np.array([self.value_at_prime_power(int(p), 1) for p in primes], dtype=np.complex128)

    def local_power_sums(self, primes: np.ndarray, h: int) -> np.ndarray:
        """sum_j f_j(p)^h for each prime."""
        return np.array([np.sum(self.local_roots(int(p)) ** h) for p in primes], dtype=np.complex128)

    @property
    def period(self) -> int | None:
        """Modulus L when f(n) depends only on n mod L (completely multiplicative sources)."""
        return None

    def periodic_table(self) -> np.ndarray:
        raise DomainError(f"{self.label} is not periodic")

    def values(self, N: int) -> np.ndarray:
        """f(0..N) with f(0) = 0, assembled multiplicatively from prime powers."""
        if N > VALUES_BUDGET:
            raise CapacityError(f"values budget is N <= {VALUES_BUDGET}")
        if self.period is not None:
            table = self.periodic_table()
            out = table[np.arange(N + 1) % self.period].astype(np.complex128)
            out[0] = 0
            return out
        return multiplicative_values(self, N)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.label}>"


def multiplicative_values(src: CoefficientSource, N: int) -> np.ndarray:
    f = np.ones(N + 1, dtype=np.complex128)
    f[0] = 0
    if N < 2:
        return f
    rem = np.arange(N + 1, dtype=np.int64)
    root = math.isqrt(N)
    primes = cached_sieve(max(N, 2)).primes_in(0, N)
    for p in primes[primes <= root]:
        p = int(p)
        pk, h = p, 1
        while pk <= N:
            idx = np.arange(pk, N + 1, pk)
            idx = idx[(idx // pk) % p != 0]
            f[idx] *= src.value_at_prime_power(p, h)
            rem[idx] //= pk
            pk *= p
            h += 1
    big = primes[primes > root]
    fbig = np.zeros(N + 1, dtype=np.complex128)
    fbig[1] = 1
    fbig[big] = src.prime_values(big)
    f *= fbig[rem]
    return f


class UnitSource(CoefficientSource):
    label = "unit"
    degree = 1
    real_valued = True
    completely_multiplicative = True

    def local_roots(self, p):
        return np.ones(1, dtype=np.complex128)

    def value_at_prime_power(self, p, h):
        return 1.0 + 0j

    def prime_values(self, primes):
        return np.ones(len(primes), dtype=np.complex128)

    def local_power_sums(self, primes, h):
        return np.ones(len(primes), dtype=np.complex128)

    @property
    def period(self):
        return 1

    def periodic_table(self):
        return np.ones(1, dtype=np.complex128)


class PeriodicMultiplicativeSource(CoefficientSource):
    """Completely multiplicative, periodic: f(n) = table[n mod L]."""

    degree = 1
    completely_multiplicative = True

    def __init__(self, table: np.ndarray, label: str, real_valued: bool | None = None):
        self._table = np.asarray(table, dtype=np.complex128)
        self.label = label
        if real_valued is None:
            real_valued = bool(np.all(np.abs(self._table.imag) < 1e-15))
        self.real_valued = real_valued

    @property
    def period(self):
        return len(self._table)

    def periodic_table(self):
        return self._table

    def local_roots(self, p):
        return np.array([self._table[p % self.period]])

    def value_at_prime_power(self, p, h):
        return complex(self._table[p % self.period] ** h)

    def prime_values(self, primes):
        return self._table[np.asarray(primes) % self.period]

    def local_power_sums(self, primes, h):
        return self.prime_values(primes) ** h


class TwistedSource(CoefficientSource):
    """f(n) chi(n) for a character-like multiplier given as a periodic table."""

    def __init__(self, base: CoefficientSource, table: np.ndarray, label: str):
        self.base = base
        self.table = np.asarray(table, dtype=np.complex128)
        self.label = f"{base.label}*{label}"
        self.degree = base.degree
        self.bound_theta = base.bound_theta
        self.completely_multiplicative = base.completely_multiplicative
        self.real_valued = base.real_valued and bool(np.all(np.abs(self.table.imag) < 1e-15))

    def _chi(self, n):
        return self.table[np.asarray(n) % len(self.table)]

    @property
    def period(self):
        if self.base.period is None:
            return None
        return math.lcm(self.base.period, len(self.table))

    def periodic_table(self):
        L = self.period
        n = np.arange(L)
        return self.base.periodic_table()[n % self.base.period] * self._chi(n)

    def local_roots(self, p):
        return self.base.local_roots(p) * self._chi(p)

    def value_at_prime_power(self, p, h):
        return complex(self.base.value_at_prime_power(p, h) * self._chi(p) ** h)

    def prime_values(self, primes):
        return self.base.prime_values(primes) * self._chi(primes)

    def local_power_sums(self, primes, h):
        return self.base.local_power_sums(primes, h) * self._chi(primes) ** h

    def values(self, N):
        if self.period is not None:
            return super().values(N)
        out = self.base.values(N)
        return out * self._chi(np.arange(N + 1))


@lru_cache(maxsize=4)
def _tau_table(N: int) -> np.ndarray:
    t = ramanujan_tau(N)
    return np.array([0] + t, dtype=object)


class TauSource(CoefficientSource):
    """f(n) = tau(n) n^(-11/2), degree 2, local roots on the unit circle."""

    label = "tau"
    degree = 2
    real_valued = True
    bound_theta = 0.25

    def __init__(self, limit: int = 20000):
        self._limit = 0
        self._ensure(limit)

    def _ensure(self, n: int) -> None:
        if n <= self._limit:
            return
        if n > TAU_BUDGET:
            raise CapacityError(f"tau values needed up to {n}, budget is {TAU_BUDGET}")
        N = min(TAU_BUDGET, max(n, 2 * self._limit))
        exact = _tau_table(N)
        self._exact = exact
        nn = np.arange(N + 1, dtype=np.float64)
        nn[0] = 1
        self._normalized = np.array([float(v) for v in exact]) * nn**-5.5
        p = cached_sieve(max(N, 2)).primes_in(0, N)
        bad = [int(x) for x in p if abs(exact[x]) > 2 * int(x) ** 5.5]
        if bad:
            raise InvariantError(f"|tau(p)| > 2 p^(11/2) at p = {bad[:5]}")
        self._limit = N

    def tau(self, n: int) -> int:
        self._ensure(n)
        return int(self._exact[n])

    def _fp(self, p: int) -> float:
        self._ensure(p)
        return float(self._normalized[p])

    def local_roots(self, p):
        c = self._fp(p) / 2
        theta = math.acos(max(-1.0, min(1.0, c)))
        roots = np.array([np.exp(1j * theta), np.exp(-1j * theta)])
        if np.any(np.abs(np.abs(roots) - 1) > 1e-12):
            raise InvariantError("local roots off the unit circle")
        return roots

    def value_at_prime_power(self, p, h):
        a = self._fp(p)
        prev, cur = 1.0, a
        if h == 0:
            return 1.0 + 0j
        for _ in range(h - 1):
            prev, cur = cur, a * cur - prev
        return complex(cur)

    def prime_values(self, primes):
        primes = np.asarray(primes, dtype=np.int64)
        if primes.size:
            self._ensure(int(primes.max()))
        return self._normalized[primes].astype(np.complex128)

    def local_power_sums(self, primes, h):
        a = np.clip(self.prime_values(primes).real / 2, -1.0, 1.0)
        return (2 * np.cos(h * np.arccos(a))).astype(np.complex128)

    def values(self, N):
        self._ensure(N)
        return self._normalized[: N + 1].astype(np.complex128) * (np.arange(N + 1) > 0)


class MobiusSource(CoefficientSource):
    """mu(n), a stress source without an inverse-polynomial Euler factor."""

    label = "mobius"
    degree = 1
    real_valued = True

    def local_roots(self, p):
        raise DomainError("mobius has no local roots of the form (1 - f_j X)^-1")

    def value_at_prime_power(self, p, h):
        return {0: 1.0, 1: -1.0}.get(h, 0.0) + 0j

    def prime_values(self, primes):
        return -np.ones(len(primes), dtype=np.complex128)


class ScaledSource(CoefficientSource):
    """c f(n), not multiplicative for c != 1; a constructed counterexample."""

    def __init__(self, c: float, base: CoefficientSource):
        self.c = c
        self.base = base
        self.label = f"{c:g}*{base.label}"
        self.degree = base.degree
        self.real_valued = base.real_valued

    def local_roots(self, p):
        return self.base.local_roots(p)

    def value_at_prime_power(self, p, h):
        return self.c * self.base.value_at_prime_power(p, h)

    def prime_values(self, primes):
        return self.c * self.base.prime_values(primes)

    def values(self, N):
        return self.c * self.base.values(N)


_source_cache: dict[str, CoefficientSource] = {}


def character_source(q: int, h: int) -> PeriodicMultiplicativeSource:
    from ..characters import character_family, small_modulus_family
    from .primes import is_prime

    if q > 2 and is_prime(q):
        chars = character_family(q).characters
    else:
        chars = small_modulus_family(q)
    if not 0 <= h < len(chars):
        raise DomainError(f"character index {h} out of range for modulus {q}")
    return PeriodicMultiplicativeSource(chars[h].table(), f"character:{q}:{h}")


def get_source(label: str) -> CoefficientSource:
    """Resolve a label: unit, tau, mobius, character:q:h, or c*label."""
    label = label.strip()
    if label in _source_cache:
        return _source_cache[label]
    if label == "unit":
        src: CoefficientSource = UnitSource()
    elif label == "tau":
        src = TauSource()
    elif label == "mobius":
        src = MobiusSource()
    elif label.startswith("character:"):
        parts = label.split(":")
        if len(parts) != 3:
            raise DomainError(f"bad character label {label!r}")
        src = character_source(int(parts[1]), int(parts[2]))
    elif "*" in label:
        c, rest = label.split("*", 1)
        src = ScaledSource(float(c), get_source(rest))
    else:
        raise DomainError(f"unknown coefficient source {label!r}")
    _source_cache[label] = src
    return src


def tau_source() -> TauSource:
    return get_source("tau")  # type: ignore[return-value]
