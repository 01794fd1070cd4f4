from .phases import (
    FixedFraction,
    Lambda,
    Rational,
    convergents,
    e_phase,
    frac_part,
    parse_lambda,
    prime_denominator_approx,
)
from .primes import (
    PrimeSieve,
    cached_sieve,
    euler_phi,
    factorize,
    is_prime,
    largest_prime_factor,
    primitive_root,
    sieve_primes,
)
from .smooth import smooth_count, smooth_enumerate, smooth_enumerate_with_values
from .sources import CoefficientSource, get_source, tau_source
from .tau import ramanujan_tau

__all__ = [
    "FixedFraction", "Lambda", "Rational", "convergents", "e_phase", "frac_part",
    "parse_lambda", "prime_denominator_approx", "PrimeSieve", "cached_sieve", "euler_phi",
    "factorize", "is_prime", "largest_prime_factor", "primitive_root", "sieve_primes",
    "smooth_count", "smooth_enumerate", "smooth_enumerate_with_values",
    "CoefficientSource", "get_source", "tau_source", "ramanujan_tau",
]
