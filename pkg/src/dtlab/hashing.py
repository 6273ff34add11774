"""4-wise independent hashing h: [n'] -> [m] by cubic polynomials over GF(P).

The polynomial value is uniform on ``0..P-1`` and 4-wise independent; the
final ``mod m`` step makes buckets only approximately uniform.  The exact
collision rates of that reduction are exposed so callers can compare
against the family itself rather than the ideal ``1/m``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from dtlab import kernels
from dtlab.core_dist import DiscreteDistribution, Rng, ceil_log2
from dtlab.errors import DomainMismatchError, InvalidDomainError, InvalidParameterError

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
MAX_PRIME = (1 << 31) - 1


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for all n < 3.3e24."""
    if n < 2:
        return False
    for b in _MR_BASES:
        if n % b == 0:
            return n == b
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


def least_prime_at_least(n: int) -> int:
    k = max(n, 2)
    while not is_prime(k):
        k += 1
    return k


@dataclass(frozen=True)
class FourWiseHash:
    domain_n: int
    prime_modulus: int
    coefficients: tuple[int, int, int, int]  # highest degree first
    range_m: int

    @property
    def representation_bits(self) -> int:
        """Bits to store the four field elements."""
        return 4 * ceil_log2(self.prime_modulus)

    def __call__(self, x: int) -> int:
        return apply_hash(self, x)

    def apply_many(self, xs: np.ndarray) -> np.ndarray:
        return kernels.poly_hash(xs, self.coefficients, self.prime_modulus, self.range_m)


def sample_hash(domain_n: int, range_m: int, rng: Rng) -> FourWiseHash:
    if domain_n < 1 or range_m < 1:
        raise InvalidParameterError("domain and range sizes must be positive")
    prime = least_prime_at_least(max(domain_n, range_m))
    if prime > MAX_PRIME:
        raise InvalidParameterError(f"domain {domain_n} too large for 64-bit polynomial evaluation")
    coeffs = tuple(int(c) for c in rng.integers(0, prime, size=4))
    return FourWiseHash(domain_n, prime, coeffs, range_m)


def apply_hash(h: FourWiseHash, x: int) -> int:
    if not 1 <= x <= h.domain_n:
        raise InvalidDomainError(f"element {x} outside [1, {h.domain_n}]")
    acc = 0
    for c in h.coefficients:
        acc = (acc * x + c) % h.prime_modulus
    return acc % h.range_m + 1


def push_forward(h: FourWiseHash, p: DiscreteDistribution) -> DiscreteDistribution:
    """Distribution of h(X) for X ~ p."""
    if p.n != h.domain_n:
        raise DomainMismatchError(f"distribution over [{p.n}], hash over [{h.domain_n}]")
    buckets = h.apply_many(np.arange(1, p.n + 1, dtype=np.int64))
    mass = np.bincount(buckets, weights=p.mass, minlength=h.range_m + 1)[1:]
    exact = None
    if p.is_exact:
        acc = [Fraction(0)] * h.range_m
        for b, v in zip(buckets.tolist(), p.exact):
            acc[b - 1] += v
        exact = tuple(acc)
    return DiscreteDistribution(mass / mass.sum() if exact is None else mass, exact)


def residue_class_sizes(prime: int, m: int) -> np.ndarray:
    """How many residues in ``0..prime-1`` land in each bucket after ``mod m``."""
    return np.bincount(np.arange(prime) % m, minlength=m)


def collision_rate(prime: int, m: int) -> Fraction:
    """Pr[h(x) = h(y)] for fixed x != y, exactly, for this family."""
    c = residue_class_sizes(prime, m)
    return Fraction(int(np.sum(c.astype(object) ** 2)), prime**2)


def triple_collision_rate(prime: int, m: int) -> Fraction:
    """Pr[h(x) = h(y) = h(z)] for distinct x, y, z."""
    c = residue_class_sizes(prime, m)
    return Fraction(int(np.sum(c.astype(object) ** 3)), prime**3)


def hashed_sq_norm_moments(v: np.ndarray, rho: float, rho3: float) -> tuple[float, float]:
    """Mean and variance over the family of ||h(v)||_2^2 for a real vector ``v``.

    ``rho`` and ``rho3`` are the pair and triple collision rates.  With the
    ideal rates 1/m and 1/m^2 the variance reduces to
    (2/m)(1 - 1/m)(||v||_2^4 - ||v||_4^4).
    """
    v = np.asarray(v, dtype=np.float64)
    s1, s2, s4 = v.sum(), np.sum(v**2), np.sum(v**4)
    mean = s2 + rho * (s1 * s1 - s2)
    pairs = s2 * s2 - s4
    triples = np.sum(v**2 * ((s1 - v) ** 2 - (s2 - v**2)))
    var = 2 * (rho - rho * rho) * pairs + 4 * (rho3 - rho * rho) * triples
    return float(mean), float(var)
