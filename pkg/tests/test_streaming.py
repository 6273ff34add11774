import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from dtlab import constants
from dtlab.constants import K_BIP, MEMORY_FOOTPRINT_CONSTANT
from dtlab.core_dist import (
    DiscreteDistribution,
    Rng,
    SampleMultiset,
    make_half_uniform,
    make_paninski_instance,
    make_uniform,
    make_zipf,
    multiset_mass,
)
from dtlab.errors import (
    BudgetExceededError,
    InsufficientSamplesError,
    InvalidParameterError,
    RegimeWarning,
    StreamRewindError,
)
from dtlab.streaming import (
    MemoryLedger,
    SampleStream,
    bipartite_collision_uniformity,
    bipartite_threshold,
    closeness_memory,
    streaming_sizes,
    streaming_uniformity,
)
from dtlab.verdict import Decision


class PrefixStream:
    """Stream that replays a fixed prefix, then draws fresh samples."""

    def __init__(self, prefix, dist, rng):
        self.prefix, self.tail = np.asarray(prefix), SampleStream(dist, rng)
        self.n, self.drawn = dist.n, 0

    def read(self, k):
        head = self.prefix[self.drawn:self.drawn + k]
        self.drawn += k
        return np.concatenate([head, self.tail.read(k - head.size)])


# ---------------------------------------------------------------- ledger


def test_ledger_accounting():
    led = MemoryLedger(100)
    led.charge(40, "a")
    led.charge(50, "b")
    assert led.live_bits == 90 and led.peak_bits == 90
    led.release(label="a")
    assert led.live_bits == 50 and led.peak_bits == 90 and led.held("a") == 0
    led.charge(30, "a")
    assert led.peak_bits == 90
    with pytest.raises(BudgetExceededError):
        led.charge(21, "c")
    assert led.live_bits == 80
    with pytest.raises(InvalidParameterError):
        led.release(31, "a")
    with pytest.raises(InvalidParameterError):
        led.charge(-1)


# ---------------------------------------------------------------- stream


def test_stream_is_one_pass():
    s = SampleStream(make_uniform(10), Rng(0))
    first = s.read(5)
    assert s.drawn == 5
    s.read_one()
    assert s.drawn == 6
    with pytest.raises(StreamRewindError):
        s.seek(2)
    s.seek(10)
    assert s.drawn == 10
    replay = SampleStream(make_uniform(10), Rng(0))
    assert np.array_equal(replay.read(5), first)


def test_stream_lookahead_does_not_consume():
    s = SampleStream(make_zipf(20), Rng(1))
    peek = s.lookahead(7)
    with pytest.raises(ValueError):
        peek[0] = 1
    assert s.drawn == 0
    assert np.array_equal(s.read(7), peek)


def test_stream_limit():
    s = SampleStream(make_uniform(4), Rng(0), limit=10)
    s.read(8)
    with pytest.raises(InsufficientSamplesError):
        s.read(3)


def test_stream_chunking_is_invisible():
    a = SampleStream(make_zipf(100), Rng(3))
    b = SampleStream(make_zipf(100), Rng(3))
    whole = a.read(200_000)
    parts = np.concatenate([b.read(1), b.read(70_000), b.read(129_999)])
    assert np.array_equal(whole, parts)


# ---------------------------------------------------------------- bipartite


def test_threshold_example():
    assert bipartite_threshold(100, 1000, 0.5) == Fraction(201, 2000)
    assert float(bipartite_threshold(100, 1000, 0.5)) == 0.1005


def test_multiplicity_screen_rejects_before_s2():
    p = DiscreteDistribution([1.0] + [0.0] * 9)
    s = SampleStream(p, Rng(0))
    v = bipartite_collision_uniformity(s, 10, 0.5, N1=11, N2=1000)
    assert v.decision is Decision.REJECT and v.samples_used == 11 and s.drawn == 11
    assert v.reason == "multiplicity screen"
    # Exactly 10 copies passes the screen.
    v = bipartite_collision_uniformity(SampleStream(p, Rng(0)), 10, 0.5, N1=10, N2=5)
    assert v.reason != "multiplicity screen" and v.samples_used == 15


def test_tie_rejects():
    # Point mass, N1 = 10 copies: every b_k = 10, Z = 10 >= T = 1.0 * (1 + 1/50) exactly.
    p = DiscreteDistribution([1.0] + [0.0] * 9)
    v = bipartite_collision_uniformity(SampleStream(p, Rng(0)), 10, 1.0, N1=10, N2=3)
    assert v.statistic == 10 and v.decision is Decision.REJECT
    # Z equal to T exactly: n = 50, N1 = 50 -> T = 1.02; construct b's averaging 1.02.
    s1 = np.arange(1, 51)
    s2 = np.concatenate([np.full(49, 7), np.full(1, 3)])  # each hits 1 copy -> Z = 1
    pre = PrefixStream(np.concatenate([s1, s2]), make_uniform(50), Rng(0))
    v = bipartite_collision_uniformity(pre, 50, 1.0, N1=50, N2=50)
    assert v.statistic == 1.0 and v.decision is Decision.ACCEPT


def test_statistic_matches_replay():
    p, n, N1, N2 = make_uniform(500), 500, 40, 500
    v = bipartite_collision_uniformity(SampleStream(p, Rng(21)), n, 0.5, N1, N2)
    replay = SampleStream(p, Rng(21))
    s1, s2 = replay.read(N1), replay.read(N2)
    z = Fraction(sum(int((s1 == x).sum()) for x in s2), N2)
    assert v.statistic == float(z)
    assert v.decision is (Decision.REJECT if z >= bipartite_threshold(N1, n, 0.5) else Decision.ACCEPT)


def test_insufficient_samples():
    s = SampleStream(make_uniform(100), Rng(0), limit=50)
    with pytest.raises(InsufficientSamplesError):
        bipartite_collision_uniformity(s, 100, 0.5, 30, 30)


def test_z_mean_is_mass_of_s1():
    p, N1, N2, runs = make_zipf(50), 30, 20, 10**4
    s1 = SampleStream(p, Rng(2)).read(N1)
    target = multiset_mass(p, SampleMultiset.from_samples(s1, 50))
    rng = Rng(3)
    zs = np.array([bipartite_collision_uniformity(PrefixStream(s1, p, rng.substream(i)), 50, 1.0, N1, N2).statistic
                   for i in range(runs)])
    assert abs(zs.mean() - target) <= 5 * zs.std(ddof=1) / math.sqrt(runs)


def _rates(make_stream, n, eps, N1, N2, trials):
    rejects = sum(
        bipartite_collision_uniformity(make_stream(t), n, eps, N1, N2).decision is Decision.REJECT
        for t in range(trials)
    )
    return rejects / trials


def test_bipartite_accept_and_reject_rates():
    n, eps, N1 = 10**4, 0.5, 600
    N2 = math.ceil(K_BIP * n / (N1 * eps**4))
    u = make_uniform(n)
    pan = make_paninski_instance(5000, eps, Rng(1))
    assert 1 - _rates(lambda t: SampleStream(u, Rng(100, t)), n, eps, N1, N2, 400) >= 2 / 3
    assert _rates(lambda t: SampleStream(pan, Rng(200, t)), n, eps, N1, N2, 400) >= 2 / 3


def test_screen_rarely_fires_on_uniform():
    n = 2**14
    N1 = int(n**0.9)
    u = make_uniform(n)
    fired = sum(
        bipartite_collision_uniformity(SampleStream(u, Rng(7, t)), n, 0.5, N1, 1).reason == "multiplicity screen"
        for t in range(400)
    )
    assert fired / 400 < 0.10


def test_threshold_separation_on_paninski():
    n, eps, N1 = 2**12, 0.5, 300
    N2 = math.ceil(K_BIP * n / (N1 * eps**4))
    pan = make_paninski_instance(n // 2, eps, Rng(9))
    T = float(bipartite_threshold(N1, n, eps))
    above = sum(
        bipartite_collision_uniformity(SampleStream(pan, Rng(10, t)), n, eps, N1, N2).statistic > T
        for t in range(200)
    )
    assert above / 200 >= 2 / 3


# ---------------------------------------------------------------- streaming


def test_streaming_sizes_example():
    n1, n2 = streaming_sizes(1024, 2048, 0.5)
    assert n1 == 102
    assert n2 == math.ceil(constants.K_STREAM * 1024 * 10 / (2048 * 0.5**4))


def test_streaming_ledger_and_budget():
    n, m = 2**12, 2**11
    led = MemoryLedger(m)
    v = streaming_uniformity(SampleStream(make_uniform(n), Rng(0)), n, m, 0.5, led)
    assert v.peak_memory_bits == led.peak_bits <= m
    n1, _ = streaming_sizes(n, m, 0.5)
    assert led.peak_bits >= n1 * 12
    # Releasing the per-phase counter leaves S1 and the running sum live.
    assert led.held("index") == 0 and led.live_bits == led.held("S1") + led.held("sum")
    with pytest.raises(BudgetExceededError):
        streaming_uniformity(SampleStream(make_uniform(n), Rng(0)), n, m, 0.5, MemoryLedger(m // 2))


def test_streaming_regime_warning():
    with pytest.warns(RegimeWarning):
        v = streaming_uniformity(SampleStream(make_uniform(1024), Rng(0)), 1024, 64, 0.5, samples=2000)
    assert not v.in_regime
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        v = streaming_uniformity(SampleStream(make_uniform(2**14), Rng(0)), 2**14, 2**13, 0.5)
    assert v.in_regime


def test_streaming_samples_override():
    v = streaming_uniformity(SampleStream(make_uniform(2**12), Rng(0)), 2**12, 2**11, 0.5, samples=5000)
    assert v.samples_used == 5000
    with pytest.raises(InvalidParameterError):
        streaming_uniformity(SampleStream(make_uniform(2**12), Rng(0)), 2**12, 2**11, 0.5, samples=10)


def test_streaming_peak_within_budget_in_regime():
    n, m = 2**14, 2**13
    for t in range(20):
        led = MemoryLedger(m)
        streaming_uniformity(SampleStream(make_zipf(n), Rng(30, t)), n, m, 0.5, led)
        assert led.peak_bits <= m


# ---------------------------------------------------------------- closeness


def _closeness_rejects(p, q, trials, seed, n=4096, m=64, eps=0.5):
    out, peaks = 0, []
    for t in range(trials):
        rng = Rng(seed, t)
        led = MemoryLedger()
        v = closeness_memory(SampleStream(p, rng.substream(2)), SampleStream(q, rng.substream(3)),
                             n, m, eps, led, rng.substream(4))
        out += v.decision is Decision.REJECT
        peaks.append(v.peak_memory_bits)
    return out / trials, max(peaks)


def test_closeness_memory_equal_inputs():
    rate, peak = _closeness_rejects(make_zipf(4096), make_zipf(4096), 400, 40)
    assert rate <= 1 / 3
    assert peak <= MEMORY_FOOTPRINT_CONSTANT * 64 * 12


def test_closeness_memory_disjoint_halves():
    n = 4096
    lo = make_half_uniform(n)
    hi = DiscreteDistribution(lo.mass[::-1].copy())
    rate, _ = _closeness_rejects(lo, hi, 400, 41)
    assert rate >= 2 / 3


def test_closeness_memory_is_one_pass_and_seeded():
    n, p = 4096, make_zipf(4096)

    def run():
        sp, sq = SampleStream(p, Rng(1)), SampleStream(p, Rng(2))
        v = closeness_memory(sp, sq, n, 64, 0.5, rng=Rng(3))
        return v, sp.drawn + sq.drawn

    (v1, d1), (v2, d2) = run(), run()
    assert v1 == v2 and d1 == d2 == v1.samples_used
    with pytest.raises(InvalidParameterError):
        closeness_memory(SampleStream(p, Rng(1)), SampleStream(make_uniform(10), Rng(2)), n, 64, 0.5)
