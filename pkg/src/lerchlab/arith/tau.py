"""Ramanujan tau via exact power-series arithmetic on big integers."""

from __future__ import annotations

import gmpy2
import numpy as np

from ..errors import CapacityError, DomainError

TAU_BUDGET = 10**5
# |tau(n)| < d(n) n^(11/2) stays far below 2^159 for n <= 10^6
_SLOT_BITS = 160
_SLOT_BYTES = _SLOT_BITS // 8


def _pack(coeffs: list[int]) -> gmpy2.mpz:
    """Sum of c_i 2^(B i) for signed c_i (Kronecker substitution)."""
    pos = b"".join(max(c, 0).to_bytes(_SLOT_BYTES, "little") for c in coeffs)
    neg = b"".join(max(-c, 0).to_bytes(_SLOT_BYTES, "little") for c in coeffs)
    return gmpy2.mpz(int.from_bytes(pos, "little")) - gmpy2.mpz(int.from_bytes(neg, "little"))


def _unpack(value: gmpy2.mpz, count: int) -> list[int]:
    """First `count` signed base-2^B digits of value, each assumed below 2^(B-1)."""
    slots = max(count, int(gmpy2.bit_length(abs(value))) // _SLOT_BITS + 2)
    offset = int.from_bytes((b"\x00" * (_SLOT_BYTES - 1) + b"\x80") * slots, "little")
    shifted = int(value) + offset
    if shifted < 0:
        raise ArithmeticError("slot width too small for coefficients")
    raw = shifted.to_bytes(slots * _SLOT_BYTES + 1, "little")
    half = 1 << (_SLOT_BITS - 1)
    return [
        int.from_bytes(raw[i * _SLOT_BYTES : (i + 1) * _SLOT_BYTES], "little") - half
        for i in range(count)
    ]


def eta_cubed(n_terms: int) -> list[int]:
    """Coefficients of prod (1 - q^n)^3 up to q^(n_terms-1), by Jacobi's identity."""
    c = [0] * n_terms
    k = 0
    while k * (k + 1) // 2 < n_terms:
        c[k * (k + 1) // 2] = (-1) ** k * (2 * k + 1)
        k += 1
    return c


def ramanujan_tau(N: int) -> list[int]:
    """[tau(1), ..., tau(N)] from q * prod (1 - q^n)^24."""
    if N < 1:
        raise DomainError("N must be positive")
    if N > TAU_BUDGET:
        raise CapacityError(f"tau budget is N <= {TAU_BUDGET}")
    coeffs = eta_cubed(N)
    for _ in range(3):
        packed = _pack(coeffs)
        coeffs = _unpack(packed * packed, N)
    return coeffs


def tau_normalized(N: int) -> np.ndarray:
    """tau(n) n^(-11/2) for n = 0..N (index 0 is 0)."""
    t = ramanujan_tau(N)
    out = np.zeros(N + 1)
    n = np.arange(1, N + 1, dtype=np.float64)
    out[1:] = np.array([float(v) for v in t]) * n**-5.5
    return out
