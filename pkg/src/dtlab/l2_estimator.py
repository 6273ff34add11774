"""Unbiased l2-distance estimation from per-bucket counts.

Two sampling modes share one interface:

* Poissonized (default): each side draws Poisson(n_param) samples, so
  bucket counts are independent Poissons and
  ``sum((X - Y)^2 - X - Y) / n_param^2`` is exactly unbiased for
  ``||a - b||_2^2``.
* Fixed count: totals are known constants and the pairwise U-statistic is
  used instead, which is exactly unbiased under multinomial sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dtlab.constants import L2_SAMPLE_CONSTANT
from dtlab.core_dist import Rng
from dtlab.errors import InvalidParameterError
from dtlab.verdict import Decision, TestVerdict


@dataclass(frozen=True, eq=False)
class BucketCounts:
    range_m: int
    x_counts: np.ndarray
    y_counts: np.ndarray
    n_param: float
    poissonized: bool = True

    def __post_init__(self):
        x = np.asarray(self.x_counts, dtype=np.int64)
        y = np.asarray(self.y_counts, dtype=np.int64)
        if x.shape != (self.range_m,) or y.shape != (self.range_m,):
            raise InvalidParameterError(f"count vectors must both have length {self.range_m}")
        if np.any(x < 0) or np.any(y < 0):
            raise InvalidParameterError("bucket counts must be non-negative")
        object.__setattr__(self, "x_counts", x)
        object.__setattr__(self, "y_counts", y)


def estimate_l2_sq(counts: BucketCounts) -> float:
    x = counts.x_counts.astype(np.float64)
    y = counts.y_counts.astype(np.float64)
    if counts.poissonized:
        if counts.n_param <= 0:
            raise InvalidParameterError(f"n_param must be positive, got {counts.n_param}")
        return float(np.sum((x - y) ** 2 - x - y) / counts.n_param**2)
    nx, ny = x.sum(), y.sum()
    if nx < 2 or ny < 2:
        raise InvalidParameterError("fixed-count mode needs at least two samples per side")
    return float(
        np.sum(x * (x - 1)) / (nx * (nx - 1))
        + np.sum(y * (y - 1)) / (ny * (ny - 1))
        - 2.0 * np.dot(x, y) / (nx * ny)
    )


def null_std(counts: BucketCounts) -> float:
    """Plug-in standard deviation of the estimate when both sides are equal.

    Uses the pooled counts to estimate ``||a||_2^2`` without bias.
    """
    z = (counts.x_counts + counts.y_counts).astype(np.float64)
    pooled_pairs = float(np.sum(z * (z - 1)))
    if counts.poissonized:
        return math.sqrt(max(2.0 * pooled_pairs, 0.0)) / counts.n_param**2
    nx, ny = float(counts.x_counts.sum()), float(counts.y_counts.sum())
    total = nx + ny
    sq_norm = pooled_pairs / (total * (total - 1))
    return math.sqrt(max(2.0 * sq_norm, 0.0)) * (1.0 / nx + 1.0 / ny)


def l2_closeness_test(counts: BucketCounts, threshold: float, null_z: float | None = None) -> TestVerdict:
    """Reject iff the estimate reaches ``threshold^2 / 2``.

    With ``null_z`` set, the cut-off is additionally raised to
    ``null_z`` plug-in null standard deviations.
    """
    if threshold <= 0:
        raise InvalidParameterError(f"threshold must be positive, got {threshold}")
    est = estimate_l2_sq(counts)
    cut = threshold * threshold / 2.0
    if null_z is not None:
        cut = max(cut, null_z * null_std(counts))
    decision = Decision.REJECT if est >= cut else Decision.ACCEPT
    used = int(counts.x_counts.sum() + counts.y_counts.sum())
    return TestVerdict(decision, used, statistic=est, threshold=cut)


def required_samples(norm_bound: float, eps: float, constant: float = L2_SAMPLE_CONSTANT) -> int:
    """Per-side intensity ``constant * b / eps^2`` for an l2 test at distance ``eps``."""
    if eps <= 0 or norm_bound <= 0:
        raise InvalidParameterError("norm bound and eps must be positive")
    return math.ceil(constant * norm_bound / (eps * eps))


def simulate_counts(a, b, n_param: float, rng: Rng, poissonized: bool = True) -> BucketCounts:
    """Bucket counts for sampling ``a`` and ``b`` directly (test and calibration helper)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if poissonized:
        x = rng.poisson(n_param * a)
        y = rng.poisson(n_param * b)
    else:
        k = int(round(n_param))
        x = rng.generator.multinomial(k, a / a.sum())
        y = rng.generator.multinomial(k, b / b.sum())
    return BucketCounts(a.size, x, y, n_param, poissonized)
