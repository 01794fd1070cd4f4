"""Dirichlet characters stored as exact exponents, Gauss sums, orthogonality."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .arith.primes import euler_phi, is_prime, primitive_root
from .errors import DomainError, InvariantError


def _unit_root(j: int, n: int) -> complex:
    j %= n
    return complex(math.cos(2 * math.pi * j / n), math.sin(2 * math.pi * j / n))


@dataclass(frozen=True)
class DirichletCharacter:
    """chi(n) = e(exponents[n mod q] / denominator), or 0 where exponents is -1."""

    modulus: int
    denominator: int
    exponents: tuple[int, ...] = field(repr=False)
    primitive: bool = False
    index: int = 0

    def __call__(self, n: int) -> complex:
        e = self.exponents[n % self.modulus]
        return 0j if e < 0 else _unit_root(e, self.denominator)

    @property
    def order(self) -> int:
        g = self.denominator
        for e in self.exponents:
            if e >= 0:
                g = math.gcd(g, e)
        return self.denominator // g

    @property
    def is_principal(self) -> bool:
        return all(e <= 0 for e in self.exponents)

    @property
    def is_real(self) -> bool:
        return all(e < 0 or (2 * e) % self.denominator == 0 for e in self.exponents)

    def table(self) -> np.ndarray:
        return _table(self.denominator, self.exponents)

    def conj(self) -> "DirichletCharacter":
        ex = tuple(e if e < 0 else (-e) % self.denominator for e in self.exponents)
        return DirichletCharacter(self.modulus, self.denominator, ex, self.primitive, -self.index)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "re", "im"])
        t = self.table()
        for n in range(1, self.modulus + 1):
            v = t[n % self.modulus]
            w.writerow([n, repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


@lru_cache(maxsize=4096)
def _table(denominator: int, exponents: tuple[int, ...]) -> np.ndarray:
    ex = np.array(exponents, dtype=np.int64)
    ang = 2 * np.pi * (np.maximum(ex, 0) % denominator) / denominator
    t = np.where(ex >= 0, np.exp(1j * ang), 0)
    t.setflags(write=False)
    return t


@dataclass(frozen=True)
class CharacterFamily:
    """All characters mod an odd prime q, chi_h(n) = e(nu(h+1) nu(n) / (q-1))."""

    q: int
    g: int
    nu: np.ndarray = field(repr=False)
    characters: tuple[DirichletCharacter, ...] = field(repr=False)

    def __getitem__(self, h: int) -> DirichletCharacter:
        return self.characters[h]

    def __len__(self) -> int:
        return len(self.characters)

    def gauss(self, h: int) -> complex:
        return _gauss_cached(self.characters[h])


@lru_cache(maxsize=256)
def character_family(q: int) -> CharacterFamily:
    if q < 3 or not is_prime(q):
        raise DomainError(f"{q} is not an odd prime")
    g, nu = primitive_root(q)
    chars = []
    for h in range(q - 1):
        ex = [-1] + [int(nu[h + 1] * nu[n] % (q - 1)) for n in range(1, q)]
        chars.append(DirichletCharacter(q, q - 1, tuple(ex), primitive=h > 0, index=h))
    return CharacterFamily(q, g, nu, tuple(chars))


def _element_order(x: int, k: int) -> int:
    o, y = 1, x % k
    while y != 1 % k:
        y = y * x % k
        o += 1
    return o


@lru_cache(maxsize=64)
def small_modulus_family(k: int) -> tuple[DirichletCharacter, ...]:
    """All phi(k) characters mod k, built by extending along generators found by search."""
    if k < 1 or k > 10**6:
        raise DomainError("modulus must satisfy 1 <= k <= 10^6")
    if k == 1:
        return (DirichletCharacter(1, 1, (0,), primitive=True, index=0),)
    units = [b for b in range(1, k) if math.gcd(b, k) == 1]
    E = 1
    for b in units:
        E = math.lcm(E, _element_order(b, k))
    # each character: dict unit -> exponent mod E, defined on the subgroup H built so far
    H = [1]
    chars: list[dict[int, int]] = [{1: 0}]
    in_H = {1}
    while len(H) < len(units):
        best, best_m = None, 0
        for g in units:
            if g in in_H:
                continue
            m, y = 1, g
            while y not in in_H:
                y = y * g % k
                m += 1
            if m > best_m:
                best, best_m = g, m
        g, m = best, best_m
        gm = pow(g, m, k)
        newH, new_chars = [], []
        for c in chars:
            v = c[gm]
            for w in (w for w in range(E) if (m * w - v) % E == 0):
                nc = {}
                gj = 1
                for j in range(m):
                    for h in H:
                        nc[gj * h % k] = (c[h] + j * w) % E
                    gj = gj * g % k
                new_chars.append(nc)
        gj = 1
        for j in range(m):
            newH.extend(gj * h % k for h in H)
            gj = gj * g % k
        H, chars = newH, new_chars
        in_H = set(H)
    if len(chars) != euler_phi(k):
        raise InvariantError("character count mismatch")
    out = []
    for i, c in enumerate(chars):
        ex = tuple(c.get(n, -1) for n in range(k))
        out.append(DirichletCharacter(k, E, ex, primitive=False, index=i))
    out.sort(key=lambda ch: (not ch.is_principal, ch.index))
    return tuple(out)


def gauss_sum(chi: DirichletCharacter) -> complex:
    """tau(chi) = sum_b chi(b) e(b/q), accumulated over exact exponents."""
    return _gauss_cached(chi)


@lru_cache(maxsize=8192)
def _gauss_cached(chi: DirichletCharacter) -> complex:
    q, D = chi.modulus, chi.denominator
    M = math.lcm(D, q)
    counts: dict[int, int] = {}
    for b in range(1, q + 1):
        e = chi.exponents[b % q]
        if e < 0:
            continue
        j = (e * (M // D) + b * (M // q)) % M
        counts[j] = counts.get(j, 0) + 1
    re = math.fsum(c * math.cos(2 * math.pi * j / M) for j, c in counts.items())
    im = math.fsum(c * math.sin(2 * math.pi * j / M) for j, c in counts.items())
    return complex(re, im)


@dataclass(frozen=True)
class OrthogonalityMatrix:
    k: int
    q: int
    residues: np.ndarray
    matrix: np.ndarray
    inverse: np.ndarray


def product_table(psi: DirichletCharacter, chi: DirichletCharacter) -> np.ndarray:
    """Values of psi*chi on residues mod lcm of the moduli, evaluated pointwise."""
    L = math.lcm(psi.modulus, chi.modulus)
    n = np.arange(L)
    return psi.table()[n % psi.modulus] * chi.table()[n % chi.modulus]


def orthogonality_matrix(k: int, q: int) -> OrthogonalityMatrix:
    if math.gcd(k, q) != 1:
        raise DomainError("k and q must be coprime")
    psis = small_modulus_family(k)
    fam = character_family(q)
    kq = k * q
    b = np.array([x for x in range(1, kq + 1) if math.gcd(x, kq) == 1])
    rows = [product_table(psi, chi)[b % kq] for psi in psis for chi in fam.characters]
    M = np.array(rows)
    n = len(b)
    inv = M.conj().T / n
    err = np.abs(M @ inv - np.eye(n)).max()
    if err > 1e-10:
        raise InvariantError(f"character matrix inverse check failed ({err:.2e})")
    return OrthogonalityMatrix(k, q, b, M, inv)
