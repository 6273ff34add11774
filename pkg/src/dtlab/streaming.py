"""One-pass streaming runtime with bit-exact memory accounting.

Hosts the bipartite collision tester (central and memory-bounded) and the
memory-bounded closeness tester.  ``log n`` in every bit charge means
``ceil(log2 n)``.
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction

import numpy as np

from dtlab import constants, kernels
from dtlab.core_dist import DiscreteDistribution, Rng, ceil_log2
from dtlab.errors import (
    BudgetExceededError,
    InsufficientSamplesError,
    InvalidParameterError,
    RegimeWarning,
    StreamRewindError,
)
from dtlab.flattening import build_flattener, flatten_samples
from dtlab.hashing import sample_hash
from dtlab.l2_estimator import BucketCounts, l2_closeness_test
from dtlab.verdict import Decision, TestVerdict

STREAM_CHUNK = 1 << 16


class MemoryLedger:
    """Live and peak bit counts for a streaming algorithm's state.

    Charges are labelled so a phase can release exactly what it took.
    """

    def __init__(self, budget_bits: int | None = None):
        if budget_bits is not None and budget_bits < 0:
            raise InvalidParameterError(f"budget must be non-negative, got {budget_bits}")
        self.budget_bits = budget_bits
        self.live_bits = 0
        self.peak_bits = 0
        self._by_label: dict[str, int] = {}

    def charge(self, bits: int, label: str = "") -> None:
        bits = int(bits)
        if bits < 0:
            raise InvalidParameterError(f"cannot charge a negative amount ({bits})")
        after = self.live_bits + bits
        if self.budget_bits is not None and after > self.budget_bits:
            raise BudgetExceededError(
                f"charging {bits} bits for {label or 'state'} needs {after} > budget {self.budget_bits}"
            )
        self.live_bits = after
        self._by_label[label] = self._by_label.get(label, 0) + bits
        self.peak_bits = max(self.peak_bits, after)

    def release(self, bits: int | None = None, label: str = "") -> None:
        """Release ``bits`` from ``label``; ``None`` releases all of it."""
        held = self._by_label.get(label, 0)
        bits = held if bits is None else int(bits)
        if bits < 0 or bits > held:
            raise InvalidParameterError(f"cannot release {bits} bits from {label!r} holding {held}")
        self._by_label[label] = held - bits
        self.live_bits -= bits

    def held(self, label: str = "") -> int:
        return self._by_label.get(label, 0)

    def __repr__(self):
        return f"MemoryLedger(live={self.live_bits}, peak={self.peak_bits}, budget={self.budget_bits})"


class SampleStream:
    """Seeded single-pass sample source.

    Samples are generated in chunks with the alias method and handed out in
    order.  ``lookahead`` inspects upcoming samples without consuming them,
    which lets batch code decide how far to advance; nothing ever moves the
    read position backwards.
    """

    def __init__(self, dist: DiscreteDistribution, rng: Rng, limit: int | None = None):
        self.dist = dist
        self.rng = rng
        self.limit = limit
        self.drawn = 0
        self._buf = np.empty(0, dtype=np.int64)
        self._pos = 0

    @property
    def n(self) -> int:
        return self.dist.n

    def _ensure(self, k: int) -> None:
        if self.limit is not None and self.drawn + k > self.limit:
            raise InsufficientSamplesError(
                f"stream holds {self.limit} samples, {self.drawn + k} requested"
            )
        have = self._buf.size - self._pos
        if have >= k:
            return
        fresh = self.dist.sample_alias(self.rng.random(max(k - have, STREAM_CHUNK)))
        self._buf = np.concatenate([self._buf[self._pos:], fresh])
        self._pos = 0

    def lookahead(self, k: int) -> np.ndarray:
        self._ensure(k)
        view = self._buf[self._pos:self._pos + k]
        view.flags.writeable = False
        return view

    def advance(self, k: int) -> None:
        self._ensure(k)
        self._pos += k
        self.drawn += k

    def read(self, k: int) -> np.ndarray:
        out = self.lookahead(k).copy()
        self.advance(k)
        return out

    def read_one(self) -> int:
        return int(self.read(1)[0])

    def seek(self, position: int) -> None:
        """Skip forward to an absolute position; going back is an error."""
        if position < self.drawn:
            raise StreamRewindError(f"position {position} already consumed (drawn={self.drawn})")
        self.advance(position - self.drawn)


def _warn_regime(message: str) -> None:
    warnings.warn(message, RegimeWarning, stacklevel=3)


def bipartite_threshold(N1: int, n: int, eps) -> Fraction:
    """T = (N1/n)(1 + eps^2/50), exactly."""
    e = Fraction(eps)
    return Fraction(N1, n) * (1 + e * e / constants.THRESHOLD_SLACK)


def default_central_sizes(n: int, eps: float, samples: int | None = None) -> tuple[int, int]:
    """(N1, N2) for the central tester with N1 * N2 ~ K_BIP * n / eps^4."""
    product = constants.K_BIP * n / eps**4
    n1 = max(1, min(int(n**constants.CENTRAL_N1_EXPONENT), math.ceil(math.sqrt(product))))
    if samples is not None:
        if samples <= n1:
            raise InvalidParameterError(f"{samples} samples leave nothing for S2 after N1 = {n1}")
        return n1, samples - n1
    return n1, math.ceil(product / n1)


def bipartite_collision_uniformity(
    stream: SampleStream,
    n: int,
    eps: float,
    N1: int,
    N2: int,
    ledger: MemoryLedger | None = None,
) -> TestVerdict:
    """Bipartite collision uniformity test.

    Stores S1, rejects if any element repeats more than 10 times, then
    streams S2 and compares the mean S1-multiplicity of S2 samples with
    T = (N1/n)(1 + eps^2/50).  Ties reject.
    """
    if N1 < 1 or N2 < 1:
        raise InvalidParameterError(f"N1 and N2 must be positive, got {N1}, {N2}")
    if stream.n != n:
        raise InvalidParameterError(f"stream over [{stream.n}] but n = {n}")
    L = ceil_log2(n)
    sum_bits = ceil_log2(constants.MAX_MULTIPLICITY * N2) + 1
    if ledger is not None:
        ledger.charge(N1.bit_length(), "index")
    s1 = stream.read(N1)
    if ledger is not None:
        ledger.charge(N1 * L, "S1")
    # a_j is recomputable from the stored S1 list, so it costs nothing extra.
    mult = np.bincount(s1, minlength=n + 1)
    threshold = bipartite_threshold(N1, n, eps)

    def finish(decision, used, statistic=None, reason=""):
        return TestVerdict(
            decision,
            used,
            peak_memory_bits=None if ledger is None else ledger.peak_bits,
            statistic=statistic,
            threshold=float(threshold),
            reason=reason,
        )

    if int(mult.max()) > constants.MAX_MULTIPLICITY:
        return finish(Decision.REJECT, N1, reason="multiplicity screen")

    if ledger is not None:
        ledger.release(label="index")
        ledger.charge(N2.bit_length(), "index")
        ledger.charge(sum_bits, "sum")
    total = 0
    done = 0
    while done < N2:
        k = min(STREAM_CHUNK * 4, N2 - done)
        total += kernels.gather_sum(mult, stream.read(k))
        done += k
    if ledger is not None:
        ledger.release(label="index")
    z = Fraction(total, N2)
    decision = Decision.REJECT if z >= threshold else Decision.ACCEPT
    return finish(decision, N1 + N2, statistic=float(z))


def streaming_sizes(n: int, m_bits: int, eps: float, k: float | None = None) -> tuple[int, int]:
    L = ceil_log2(n)
    k = constants.K_STREAM if k is None else k
    n1 = m_bits // (2 * L)
    n2 = math.ceil(Fraction(k) * n * L / (m_bits * Fraction(eps) ** 4))
    return n1, n2


def streaming_uniformity(
    stream: SampleStream,
    n: int,
    m_bits: int,
    eps: float,
    ledger: MemoryLedger | None = None,
    samples: int | None = None,
) -> TestVerdict:
    """Single-pass uniformity test within ``m_bits`` of memory.

    ``samples`` fixes the total sample count (N2 = samples - N1) instead of
    the default N2 formula; the trade-off grid sweeps it.
    """
    if n < 2:
        raise InvalidParameterError("streaming uniformity needs n >= 2")
    L = ceil_log2(n)
    if ledger is None:
        ledger = MemoryLedger(m_bits)
    in_regime = L / eps**6 <= m_bits <= n**0.9 * L
    if not in_regime:
        _warn_regime(f"m = {m_bits} bits is outside [log n / eps^6, n^0.9 log n] for n = {n}")
    n1, n2 = streaming_sizes(n, m_bits, eps)
    if n1 < 1:
        raise InvalidParameterError(f"m = {m_bits} bits cannot hold a single sample of {L} bits")
    if samples is not None:
        if samples <= n1:
            raise InvalidParameterError(f"{samples} samples leave nothing for S2 after N1 = {n1}")
        n2 = samples - n1
    v = bipartite_collision_uniformity(stream, n, eps, n1, n2, ledger)
    return TestVerdict(
        v.decision, v.samples_used, ledger.peak_bits,
        statistic=v.statistic, threshold=v.threshold, in_regime=in_regime, reason=v.reason,
    )


def closeness_memory_sizes(n: int, m_buckets: int, eps: float) -> tuple[int, int]:
    """(flattening samples per side, Poisson intensity per side)."""
    k_flat = constants.CLOSENESS_MEM_C1 * m_buckets
    n_param = math.ceil(constants.CLOSENESS_MEM_C2 * n / (math.sqrt(m_buckets) * eps * eps))
    return k_flat, n_param


def closeness_memory(
    stream_p: SampleStream,
    stream_q: SampleStream,
    n: int,
    m_buckets: int,
    eps: float,
    ledger: MemoryLedger | None = None,
    rng: Rng | None = None,
) -> TestVerdict:
    """Closeness test in O(m log n) bits: flatten, hash to m buckets, l2-test.

    ``rng`` supplies the algorithm's own randomness (hash, Poisson totals,
    sub-bin choice); it defaults to a fixed stream so runs stay seeded.
    """
    if m_buckets < 1:
        raise InvalidParameterError(f"need at least one bucket, got {m_buckets}")
    if stream_p.n != n or stream_q.n != n:
        raise InvalidParameterError("both streams must range over [n]")
    rng = Rng(0) if rng is None else rng
    ledger = MemoryLedger() if ledger is None else ledger
    L = ceil_log2(n)
    in_regime = 1 < m_buckets <= min(n, n ** (2 / 3) / eps ** (4 / 3))
    if not in_regime:
        _warn_regime(f"m = {m_buckets} buckets outside 1 << m << min(n, n^(2/3)/eps^(4/3))")
    k_flat, n_param = closeness_memory_sizes(n, m_buckets, eps)

    flat_p = stream_p.read(k_flat)
    flat_q = stream_q.read(k_flat)
    ledger.charge(2 * k_flat * L, "flatten samples")
    f = build_flattener(np.concatenate([flat_p, flat_q]), n)

    h = sample_hash(f.new_n, m_buckets, rng.substream(1))
    ledger.charge(h.representation_bits, "hash")

    totals = rng.substream(2).poisson(n_param, size=2)
    n_p, n_q = int(totals[0]), int(totals[1])
    ledger.charge(n_p.bit_length() + n_q.bit_length(), "totals")
    # A bucket count never exceeds its side's total.
    ledger.charge(m_buckets * (n_p.bit_length() + n_q.bit_length()), "counts")

    sub = rng.substream(3)
    counts = []
    for stream, total in ((stream_p, n_p), (stream_q, n_q)):
        c = np.zeros(m_buckets + 1, dtype=np.int64)
        done = 0
        while done < total:
            k = min(STREAM_CHUNK * 4, total - done)
            xs = flatten_samples(stream.read(k), f, sub.random(k))
            c += np.bincount(h.apply_many(xs), minlength=m_buckets + 1)
            done += k
        counts.append(c[1:])

    bc = BucketCounts(m_buckets, counts[0], counts[1], float(n_param))
    threshold = eps / (2 * math.sqrt(f.new_n))
    v = l2_closeness_test(bc, threshold)
    return TestVerdict(
        v.decision,
        2 * k_flat + n_p + n_q,
        ledger.peak_bits,
        statistic=v.statistic,
        threshold=v.threshold,
        in_regime=in_regime,
    )
