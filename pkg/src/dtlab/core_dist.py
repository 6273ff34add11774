"""Exact discrete distributions, seeded sampling, norms and collision primitives.

Elements of a domain of size ``n`` are the integers ``1..n``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb
from typing import Mapping, Sequence

import numpy as np

from dtlab import kernels
from dtlab.errors import DomainMismatchError, InvalidDomainError, InvalidParameterError

MASK64 = (1 << 64) - 1
SUM_TOLERANCE = 1e-12


def ceil_log2(n: int) -> int:
    """Bits needed to name one of ``n`` values, i.e. ceil(log2 n)."""
    if n < 1:
        raise InvalidParameterError(f"ceil_log2 needs n >= 1, got {n}")
    return (n - 1).bit_length()


class Rng:
    """Splittable seeded generator.

    ``(seed, stream_id)`` plus an optional path of child keys identify a
    stream; numpy's SeedSequence spawn keys make distinct paths
    statistically independent.  Instances are not thread-safe.
    """

    def __init__(self, seed: int, stream_id: int = 0, path: tuple[int, ...] = ()):
        self.seed = int(seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        self.path = tuple(int(k) for k in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.path))
        self.generator = np.random.Generator(np.random.PCG64DXSM(ss))

    def substream(self, *keys: int) -> "Rng":
        return Rng(self.seed, self.stream_id, self.path + keys)

    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def poisson(self, lam, size=None):
        return self.generator.poisson(lam, size)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability vector over ``[n]``; ``exact`` holds Fractions in rational mode."""

    mass: np.ndarray
    exact: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        mass = np.array(self.mass, dtype=np.float64)
        if mass.ndim != 1 or mass.size == 0:
            raise InvalidDomainError("a distribution needs a non-empty 1-D mass vector")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise InvalidParameterError("probabilities must be finite and non-negative")
        if self.exact is not None:
            if (len(self.exact) != mass.size or sum(self.exact) != 1
                    or np.max(np.abs(np.array([float(v) for v in self.exact]) - mass)) > SUM_TOLERANCE):
                raise InvalidParameterError("exact masses must match the float vector and sum to 1")
        if abs(float(mass.sum()) - 1.0) > SUM_TOLERANCE:
            raise InvalidParameterError(f"probabilities sum to {mass.sum()!r}, not 1")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_fractions(cls, values: Sequence[Fraction | int | str]) -> "DiscreteDistribution":
        exact = tuple(Fraction(v) for v in values)
        return cls(np.array([float(v) for v in exact]), exact)

    @property
    def n(self) -> int:
        return int(self.mass.size)

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    @cached_property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass)

    @cached_property
    def _last_support(self) -> int:
        return int(np.flatnonzero(self.mass)[-1])

    @cached_property
    def alias_table(self) -> tuple[np.ndarray, np.ndarray]:
        return _vose_alias(self.mass)

    def sample_cdf(self, rng: Rng, count: int) -> np.ndarray:
        """``count`` i.i.d. draws by binary search on the cumulative table."""
        u = rng.random(count)
        idx = np.searchsorted(self.cdf, u, side="right")
        np.minimum(idx, self._last_support, out=idx)
        return idx.astype(np.int64) + 1

    def sample_alias(self, u: np.ndarray) -> np.ndarray:
        """Transform uniforms into draws via the alias table (O(1) per draw)."""
        prob, alias = self.alias_table
        return kernels.alias_transform(u, prob, alias)


@dataclass(frozen=True, eq=False)
class PaninskiDistribution(DiscreteDistribution):
    """Paired-bin perturbation of uniform; ``signs`` is the hidden Y vector."""

    signs: np.ndarray = field(default=None)
    eps: float = 0.0

    @cached_property
    def alias_table(self) -> tuple[np.ndarray, np.ndarray]:
        # Each light bin borrows from its partner; heavy bins are then exactly full.
        n = self.n
        scaled = self.mass * n
        prob = np.ones(n)
        alias = np.arange(n, dtype=np.int64)
        light = np.flatnonzero(scaled < 1.0)
        partner = light ^ 1
        prob[light] = scaled[light]
        alias[light] = partner
        return prob, alias


def _vose_alias(mass: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = mass.size
    scaled = mass * n
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [int(i) for i in np.flatnonzero(scaled < 1.0)]
    large = [int(i) for i in np.flatnonzero(scaled >= 1.0)]
    work = scaled.tolist()
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = work[s]
        alias[s] = g
        work[g] = (work[g] + work[s]) - 1.0
        (small if work[g] < 1.0 else large).append(g)
    # Leftovers are 1 up to rounding.
    for i in small:
        prob[i] = 1.0
    # Zero-mass bins must never be emitted, even via rounding.
    zero = mass == 0.0
    if zero.any():
        prob[zero] = 0.0
        bad = zero[alias]
        if bad.any():
            alias[bad] = int(np.argmax(mass))
    return prob, alias


@dataclass(frozen=True)
class SampleMultiset:
    domain_n: int
    counts: Mapping[int, int]
    total: int

    def __post_init__(self):
        if self.total != sum(self.counts.values()):
            raise InvalidParameterError("total must equal the sum of multiplicities")
        if any(not 1 <= e <= self.domain_n for e in self.counts):
            raise InvalidDomainError(f"multiset element outside [1, {self.domain_n}]")

    @classmethod
    def from_samples(cls, samples, domain_n: int) -> "SampleMultiset":
        arr = np.asarray(samples, dtype=np.int64)
        if arr.size and (arr.min() < 1 or arr.max() > domain_n):
            raise InvalidDomainError(f"sample outside [1, {domain_n}]")
        values, mult = np.unique(arr, return_counts=True)
        counts = {int(v): int(c) for v, c in zip(values, mult)}
        return cls(domain_n, counts, int(arr.size))

    @classmethod
    def from_elements(cls, elements: Sequence[int], domain_n: int) -> "SampleMultiset":
        counts = dict(Counter(int(e) for e in elements))
        return cls(domain_n, counts, len(elements))

    def multiplicities(self) -> np.ndarray:
        """Length ``domain_n + 1`` vector of multiplicities; index 0 is unused."""
        a = np.zeros(self.domain_n + 1, dtype=np.int64)
        for e, c in self.counts.items():
            a[e] = c
        return a


def make_uniform(n: int) -> DiscreteDistribution:
    if n < 1:
        raise InvalidDomainError(f"domain size must be positive, got {n}")
    return DiscreteDistribution(np.full(n, 1.0 / n), tuple([Fraction(1, n)] * n))


def make_paninski_instance(pairs: int, eps: float, rng: Rng, exact: bool = False) -> PaninskiDistribution:
    """Random perturbation of uniform on ``2 * pairs`` elements at l1 distance ``eps``.

    Pair i gets masses ((1 + Y_i eps)/(2 pairs), (1 - Y_i eps)/(2 pairs)) with
    uniform random signs Y_i.
    """
    if pairs < 1:
        raise InvalidDomainError(f"need at least one pair, got {pairs}")
    if not 0 < eps <= 1:
        raise InvalidParameterError(f"eps must lie in (0, 1], got {eps}")
    signs = np.where(rng.integers(0, 2, size=pairs) == 1, 1, -1).astype(np.int64)
    return paninski_from_signs(signs, eps, exact=exact)


def paninski_from_signs(signs, eps: float, exact: bool = False) -> PaninskiDistribution:
    signs = np.asarray(signs, dtype=np.int64)
    pairs = signs.size
    interleaved = np.empty(2 * pairs, dtype=np.int64)
    interleaved[0::2] = signs
    interleaved[1::2] = -signs
    mass = (1.0 + interleaved * eps) / (2 * pairs)
    fr = None
    if exact:
        e = Fraction(eps)
        fr = tuple((1 + int(y) * e) / (2 * pairs) for y in interleaved)
    signs.setflags(write=False)
    return PaninskiDistribution(mass, fr, signs=signs, eps=float(eps))


def make_zipf(n: int, exponent: float = 1.0) -> DiscreteDistribution:
    if n < 1:
        raise InvalidDomainError(f"domain size must be positive, got {n}")
    w = 1.0 / np.arange(1, n + 1, dtype=np.float64) ** exponent
    return DiscreteDistribution(w / w.sum())


def make_half_uniform(n: int, upper: bool = False) -> DiscreteDistribution:
    """Uniform on the lower (or upper) half of ``[n]``; ``n`` must be even."""
    if n < 2 or n % 2:
        raise InvalidDomainError(f"half-uniform needs an even domain, got {n}")
    half = n // 2
    mass = np.zeros(n)
    exact = [Fraction(0)] * n
    lo = half if upper else 0
    mass[lo:lo + half] = 1.0 / half
    for i in range(lo, lo + half):
        exact[i] = Fraction(1, half)
    return DiscreteDistribution(mass, tuple(exact))


def load_distribution(path, tolerance: float = 1e-9) -> DiscreteDistribution:
    """Read one probability per line; the total must be 1 within ``tolerance``."""
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise InvalidParameterError(f"{path}:{lineno}: not a number: {text!r}") from None
    mass = np.array(values)
    if mass.size == 0:
        raise InvalidDomainError(f"{path}: no probabilities found")
    if np.any(mass < 0):
        raise InvalidParameterError(f"{path}: negative probability")
    if abs(mass.sum() - 1.0) > tolerance:
        raise InvalidParameterError(f"{path}: probabilities sum to {mass.sum()!r}")
    return DiscreteDistribution(mass / mass.sum())


def _check_same_domain(p: DiscreteDistribution, q: DiscreteDistribution):
    if p.n != q.n:
        raise DomainMismatchError(f"domain sizes differ: {p.n} vs {q.n}")


def lp_distance(p: DiscreteDistribution, q: DiscreteDistribution, k: int = 1):
    """(sum |p_i - q_i|^k)^(1/k).  Exact Fraction when both inputs are exact and k == 1."""
    _check_same_domain(p, q)
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    if k == 1 and p.is_exact and q.is_exact:
        return sum((abs(a - b) for a, b in zip(p.exact, q.exact)), Fraction(0))
    d = np.abs(p.mass - q.mass)
    if k == 1:
        return float(d.sum())
    return float(np.sum(d**k) ** (1.0 / k))


def tv_distance(p: DiscreteDistribution, q: DiscreteDistribution):
    return lp_distance(p, q, 1) / 2


def lp_norm(p: DiscreteDistribution, k: int = 2) -> float:
    return float(np.sum(p.mass**k) ** (1.0 / k))


def draw(p: DiscreteDistribution, rng: Rng, count: int) -> SampleMultiset:
    if count < 0:
        raise InvalidParameterError(f"count must be non-negative, got {count}")
    return SampleMultiset.from_samples(p.sample_cdf(rng, count), p.n)


def multiset_mass(p: DiscreteDistribution, s: SampleMultiset) -> float:
    """Sum over elements of multiplicity times probability."""
    if s.domain_n != p.n:
        raise DomainMismatchError(f"multiset over [{s.domain_n}] vs distribution over [{p.n}]")
    if p.is_exact:
        return float(sum((c * p.exact[e - 1] for e, c in s.counts.items()), Fraction(0)))
    return float(sum(c * p.mass[e - 1] for e, c in s.counts.items()))


def count_pairwise_collisions(s: SampleMultiset) -> int:
    return sum(comb(c, 2) for c in s.counts.values())
