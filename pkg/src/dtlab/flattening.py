"""Split-distribution ("flattening") machinery.

Element ``i`` with multiplicity ``a_i`` in the flattening sample is split
into ``a_i + 1`` equal sub-bins.  Sub-bins of element ``i`` are the
contiguous range ``offsets[i-1] + 1 .. offsets[i]`` of the new domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dtlab import kernels
from dtlab.core_dist import DiscreteDistribution, Rng, SampleMultiset
from dtlab.errors import DomainMismatchError, InvalidDomainError


@dataclass(frozen=True, eq=False)
class Flattener:
    original_n: int
    split_counts: np.ndarray
    offsets: np.ndarray

    @property
    def new_n(self) -> int:
        return int(self.offsets[-1])

    def sub_bins(self, x: int) -> range:
        return range(int(self.offsets[x - 1]) + 1, int(self.offsets[x]) + 1)


def build_flattener(flatten_samples, n: int) -> Flattener:
    """Flattener from a SampleMultiset or a raw array of elements in ``[n]``."""
    if isinstance(flatten_samples, SampleMultiset):
        if flatten_samples.domain_n != n:
            raise DomainMismatchError(f"samples over [{flatten_samples.domain_n}], flattener over [{n}]")
        mult = flatten_samples.multiplicities()[1:]
    else:
        arr = np.asarray(flatten_samples, dtype=np.int64)
        if arr.size and (arr.min() < 1 or arr.max() > n):
            raise InvalidDomainError(f"flattening sample outside [1, {n}]")
        mult = np.bincount(arr, minlength=n + 1)[1:]
    splits = mult.astype(np.int64) + 1
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(splits, out=offsets[1:])
    splits.setflags(write=False)
    offsets.setflags(write=False)
    return Flattener(n, splits, offsets)


def identity_flattener(n: int) -> Flattener:
    return build_flattener(np.empty(0, dtype=np.int64), n)


def flatten_distribution(p: DiscreteDistribution, f: Flattener) -> DiscreteDistribution:
    if p.n != f.original_n:
        raise DomainMismatchError(f"distribution over [{p.n}], flattener over [{f.original_n}]")
    mass = np.repeat(p.mass / f.split_counts, f.split_counts)
    exact = None
    if p.is_exact:
        exact = tuple(
            share
            for v, s in zip(p.exact, f.split_counts.tolist())
            for share in [v / s] * s
        )
    elif abs(mass.sum() - 1.0) > 1e-12:
        mass = mass / mass.sum()
    return DiscreteDistribution(mass, exact)


def flatten_sample(x: int, f: Flattener, rng: Rng) -> int:
    """A uniformly random sub-bin of ``x``."""
    if not 1 <= x <= f.original_n:
        raise InvalidDomainError(f"element {x} outside [1, {f.original_n}]")
    return int(flatten_samples(np.array([x]), f, rng.random(1))[0])


def flatten_samples(xs: np.ndarray, f: Flattener, u: np.ndarray) -> np.ndarray:
    """Vectorised :func:`flatten_sample` driven by explicit uniforms ``u``."""
    return kernels.flatten_indices(xs, f.offsets, f.split_counts, u)
