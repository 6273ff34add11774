"""Simulated one-pass blackboard protocols with bit-exact transcripts.

Only answer bits are charged.  Questions, addressing and referee
broadcasts are free.  A referee may ask a player several questions in a
row, but once it moves on to another player it can never come back.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from dtlab import constants, kernels
from dtlab.core_dist import Rng, ceil_log2
from dtlab.errors import (
    FormatError,
    InsufficientSamplesError,
    InvalidParameterError,
    MalformedCodewordError,
    ProtocolError,
    RegimeWarning,
)
from dtlab.flattening import build_flattener, flatten_samples
from dtlab.l2_estimator import BucketCounts, l2_closeness_test
from dtlab.streaming import MemoryLedger, SampleStream, bipartite_threshold
from dtlab.verdict import Decision, TestVerdict

BATCH = 4096
_MAGIC = b"TRNS"
_VERSION = 1


# ---------------------------------------------------------------- codecs


def unary_encode(b: int) -> str:
    if b < 0:
        raise InvalidParameterError(f"unary code needs b >= 0, got {b}")
    return "1" * b + "0"


def unary_decode(bits) -> int:
    s = bits if isinstance(bits, str) else "".join(str(int(x)) for x in bits)
    k = s.find("0")
    if k < 0 or k != len(s) - 1 or s.count("1") != k:
        raise MalformedCodewordError(f"not a unary codeword: {s!r}")
    return k


def unary_bits_many(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated unary codewords for a vector: (lengths, bits as uint8)."""
    values = np.asarray(values, dtype=np.int64)
    lengths = values + 1
    bits = np.ones(int(lengths.sum()), dtype=np.uint8)
    bits[np.cumsum(lengths) - 1] = 0
    return lengths, bits


def binary_bits_many(values: np.ndarray, width: int) -> np.ndarray:
    """MSB-first fixed-width encodings, flattened row after row."""
    values = np.asarray(values, dtype=np.int64).reshape(-1, 1)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values >> shifts) & 1).astype(np.uint8).ravel()


def _bits_from(answer) -> np.ndarray:
    if isinstance(answer, str):
        if set(answer) - {"0", "1"}:
            raise FormatError(f"answer must be a bit string, got {answer!r}")
        return np.frombuffer(answer.encode(), dtype=np.uint8) - ord("0")
    arr = np.asarray(answer, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise FormatError("answer bits must be 0 or 1")
    return arr


def _write_varint(out: bytearray, v: int) -> None:
    while True:
        byte = v & 0x7F
        v >>= 7
        if v:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    v = shift = 0
    while True:
        if pos >= len(data):
            raise FormatError("truncated varint")
        byte = data[pos]
        pos += 1
        v |= (byte & 0x7F) << shift
        shift += 7
        if not byte & 0x80:
            return v, pos


# ------------------------------------------------------------- transcript


class Transcript:
    """Ordered answers of a protocol run; ``total_bits`` is its cost.

    ``on_append(ids, lengths)`` is called after every recorded batch; the
    streaming adapter uses it to charge a memory ledger.
    """

    def __init__(self, on_append: Callable[[np.ndarray, np.ndarray], None] | None = None):
        self._ids: list[np.ndarray] = []
        self._lengths: list[np.ndarray] = []
        self._bits: list[np.ndarray] = []
        self._retired: set[int] = set()
        self.current_player: int | None = None
        self.total_bits = 0
        self.on_append = on_append

    def __len__(self):
        return sum(a.size for a in self._ids)

    def append(self, player_id: int, bits) -> None:
        arr = _bits_from(bits)
        self.extend(np.array([player_id]), np.array([arr.size]), arr)

    def extend(self, ids, lengths, bits) -> None:
        """Record one answer per entry of ``ids``; ``bits`` is their concatenation."""
        ids = np.asarray(ids, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        bits = np.asarray(bits, dtype=np.uint8)
        if ids.shape != lengths.shape or ids.ndim != 1:
            raise InvalidParameterError("ids and lengths must be matching 1-D arrays")
        if ids.size == 0:
            return
        if lengths.min() < 1:
            raise ProtocolError("every answer must carry at least one bit")
        if int(lengths.sum()) != bits.size:
            raise InvalidParameterError("bit buffer does not match the declared lengths")
        self._check_order(ids)
        self._ids.append(ids)
        self._lengths.append(lengths)
        self._bits.append(bits)
        self.total_bits += int(bits.size)
        if self.on_append is not None:
            self.on_append(ids, lengths)

    def _check_order(self, ids: np.ndarray) -> None:
        starts = np.flatnonzero(np.diff(ids, prepend=ids[0] - 1))
        runs = ids[starts]
        first = int(runs[0])
        later = runs[1:] if first == self.current_player else runs
        if np.unique(runs).size != runs.size:
            raise ProtocolError("a player was queried again after the referee moved on")
        if self.current_player is not None and first != self.current_player:
            self._retired.add(self.current_player)
        if any(int(i) in self._retired for i in later.tolist()):
            raise ProtocolError("a retired player was queried again")
        self._retired.update(int(i) for i in runs[:-1].tolist())
        self.current_player = int(runs[-1])

    @property
    def ids(self) -> np.ndarray:
        return np.concatenate(self._ids) if self._ids else np.empty(0, dtype=np.int64)

    @property
    def lengths(self) -> np.ndarray:
        return np.concatenate(self._lengths) if self._lengths else np.empty(0, dtype=np.int64)

    @property
    def bits(self) -> np.ndarray:
        return np.concatenate(self._bits) if self._bits else np.empty(0, dtype=np.uint8)

    @property
    def entries(self) -> list[tuple[int, str]]:
        bits = self.bits
        out, pos = [], 0
        for pid, k in zip(self.ids.tolist(), self.lengths.tolist()):
            out.append((pid, "".join(map(str, bits[pos:pos + k].tolist()))))
            pos += k
        return out

    @property
    def distinct_players(self) -> int:
        ids = self.ids
        return int(np.count_nonzero(np.diff(ids, prepend=ids[:1] - 1))) if ids.size else 0

    def to_bytes(self) -> bytes:
        out = bytearray(_MAGIC)
        out.append(_VERSION)
        ids, lengths, bits = self.ids, self.lengths, self.bits
        _write_varint(out, ids.size)
        pos = 0
        for pid, k in zip(ids.tolist(), lengths.tolist()):
            _write_varint(out, pid)
            _write_varint(out, k)
            out += np.packbits(bits[pos:pos + k]).tobytes()
            pos += k
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transcript":
        if data[:4] != _MAGIC:
            raise FormatError("missing transcript magic")
        if len(data) < 5 or data[4] != _VERSION:
            raise FormatError("unsupported transcript version")
        count, pos = _read_varint(data, 5)
        ids, lengths, chunks = [], [], []
        for _ in range(count):
            pid, pos = _read_varint(data, pos)
            k, pos = _read_varint(data, pos)
            nbytes = (k + 7) // 8
            if pos + nbytes > len(data):
                raise FormatError("truncated answer bits")
            chunks.append(np.unpackbits(np.frombuffer(data, np.uint8, nbytes, pos))[:k])
            pos += nbytes
            ids.append(pid)
            lengths.append(k)
        if pos != len(data):
            raise FormatError("trailing bytes after last entry")
        t = cls()
        if ids:
            t.extend(ids, lengths, np.concatenate(chunks))
        return t


# ---------------------------------------------------------------- players


@dataclass(frozen=True, eq=False)
class Player:
    id: int
    samples_p: np.ndarray
    samples_q: np.ndarray | None = None


def query_player(transcript: Transcript, player: Player, question: Callable[[Player], object]) -> str:
    """Ask ``player`` a question and record its answer bits."""
    bits = _bits_from(question(player))
    transcript.append(player.id, bits)
    return "".join(map(str, bits.tolist()))


class PlayerSource:
    """Lazy supply of players, each holding ``ell`` samples per distribution.

    Player ``i`` (1-based) owns stream positions ``(i-1)*ell .. i*ell - 1``.
    Samples are drawn only as players are reached, so a protocol that
    needs a huge number of players never allocates them up front.
    """

    def __init__(self, stream_p: SampleStream, ell: int, stream_q: SampleStream | None = None,
                 limit: int | None = None):
        if ell < 1:
            raise InvalidParameterError(f"ell must be positive, got {ell}")
        self.stream_p = stream_p
        self.stream_q = stream_q
        self.ell = ell
        self.limit = limit
        self.used = 0

    @property
    def n(self) -> int:
        return self.stream_p.n

    @property
    def two_sided(self) -> bool:
        return self.stream_q is not None

    def peek(self, k: int):
        """(ids, blocks_p, blocks_q) of the next ``k`` players, without consuming them."""
        if self.limit is not None and self.used + k > self.limit:
            raise InsufficientSamplesError(f"player source exhausted after {self.limit} players")
        ids = np.arange(self.used + 1, self.used + k + 1, dtype=np.int64)
        try:
            bp = self.stream_p.lookahead(k * self.ell).reshape(k, self.ell)
            bq = None
            if self.stream_q is not None:
                bq = self.stream_q.lookahead(k * self.ell).reshape(k, self.ell)
        except InsufficientSamplesError as exc:
            raise InsufficientSamplesError(f"player source exhausted: {exc}") from None
        return ids, bp, bq

    def advance(self, k: int) -> None:
        self.stream_p.advance(k * self.ell)
        if self.stream_q is not None:
            self.stream_q.advance(k * self.ell)
        self.used += k

    def take(self, k: int):
        out = self.peek(k)
        out = (out[0], out[1].copy(), None if out[2] is None else out[2].copy())
        self.advance(k)
        return out

    def next_player(self) -> Player:
        ids, bp, bq = self.take(1)
        return Player(int(ids[0]), bp[0], None if bq is None else bq[0])


def _warn(message: str) -> None:
    warnings.warn(message, RegimeWarning, stacklevel=3)


def _check_source(players: PlayerSource, n: int, ell: int, two_sided: bool) -> None:
    if players.n != n:
        raise InvalidParameterError(f"players hold samples over [{players.n}] but n = {n}")
    if players.ell != ell:
        raise InvalidParameterError(f"players hold {players.ell} samples each, protocol expects {ell}")
    if two_sided and not players.two_sided:
        raise InvalidParameterError("closeness needs players holding samples of both p and q")


# ------------------------------------------------------- uniformity testers


def bipartite_sizes(n: int, ell: int, eps: float) -> tuple[int, int]:
    """(m1, m2) for the distributed bipartite tester."""
    e = Fraction(eps)
    m1 = math.ceil(constants.DIST_BIP_C / (eps * eps * ell**1.5) * math.sqrt(n / math.log2(n)))
    m2 = math.ceil(Fraction(constants.DIST_BIP_C_PRIME * n) / (e**4 * ell * ell * m1))
    return m1, m2


def bipartite_comm_bound(n: int, ell: int, eps: float) -> float:
    return constants.COMM_BOUND_CONSTANT / eps**2 * math.sqrt(n / ell * math.log2(n))


def distributed_bipartite_uniformity(
    players: PlayerSource, n: int, ell: int, eps: float, transcript: Transcript | None = None
) -> TestVerdict:
    """Two-phase protocol: m1 players reveal S1, m2 players report their
    S1-collision counts in unary; reject as soon as the running sum reaches
    ell * m2 * T."""
    _check_source(players, n, ell, False)
    transcript = Transcript() if transcript is None else transcript
    L = ceil_log2(n)
    m1, m2 = bipartite_sizes(n, ell, eps)
    in_regime = 1 / eps**6 <= m1 * ell <= n**0.9
    if not in_regime:
        _warn(f"m1 * ell = {m1 * ell} outside [1/eps^6, n^0.9]")

    mult = np.zeros(n + 1, dtype=np.int64)
    done = 0
    while done < m1:
        ids, bp, _ = players.take(min(BATCH, m1 - done))
        transcript.extend(ids, np.full(ids.size, ell * L), binary_bits_many(bp - 1, L))
        mult += np.bincount(bp.ravel(), minlength=n + 1)
        done += ids.size
    phase1 = transcript.total_bits
    threshold = bipartite_threshold(m1 * ell, n, eps)

    def finish(decision, statistic=None, reason=""):
        return TestVerdict(
            decision, players.used * ell, comm_bits=transcript.total_bits,
            statistic=statistic, threshold=float(threshold), in_regime=in_regime, reason=reason,
        )

    if int(mult.max()) > constants.MAX_MULTIPLICITY:
        return finish(Decision.REJECT, reason="multiplicity screen")

    limit = math.ceil(ell * m2 * threshold)
    running = 0
    done = 0
    while done < m2:
        ids, bp, _ = players.peek(min(BATCH, m2 - done))
        b = kernels.gather_rowsum(mult, bp)
        hit = kernels.first_crossing(b, running, limit)
        k = ids.size if hit < 0 else hit + 1
        lengths, bits = unary_bits_many(b[:k])
        players.advance(k)
        transcript.extend(ids[:k], lengths, bits)
        running += int(b[:k].sum())
        done += k
        if hit >= 0:
            return finish(Decision.REJECT, running / (ell * done), reason="early abort")
    v = finish(Decision.ACCEPT, running / (ell * m2))
    assert transcript.total_bits - phase1 == running + m2
    return v


def aggregate_size(n: int, ell: int, eps: float) -> int:
    e = Fraction(eps)
    return math.ceil(Fraction(constants.AGGREGATE_CONSTANT * n) / (ell * ell * e**4))


def aggregate_threshold(n: int, ell: int, eps) -> Fraction:
    """T = C(ell, 2) (1 + eps^2 / 2) / n, exactly."""
    e = Fraction(eps)
    return math.comb(ell, 2) * (1 + e * e / 2) / n


def distributed_aggregate_uniformity(
    players: PlayerSource, n: int, ell: int, eps: float, transcript: Transcript | None = None
) -> TestVerdict:
    """Each of m players reports its internal collision count in fixed width."""
    if ell < 2:
        raise InvalidParameterError("the aggregate tester needs ell >= 2")
    _check_source(players, n, ell, False)
    transcript = Transcript() if transcript is None else transcript
    m = aggregate_size(n, ell, eps)
    width = math.comb(ell, 2).bit_length()
    total = 0
    done = 0
    batch = max(1, min(BATCH, (1 << 22) // ell))
    while done < m:
        ids, bp, _ = players.take(min(batch, m - done))
        c = kernels.row_collisions(bp, n)
        transcript.extend(ids, np.full(ids.size, width), binary_bits_many(c, width))
        total += int(c.sum())
        done += ids.size
    threshold = aggregate_threshold(n, ell, eps)
    z = Fraction(total, m)
    decision = Decision.REJECT if z >= threshold else Decision.ACCEPT
    return TestVerdict(
        decision, m * ell, comm_bits=transcript.total_bits,
        statistic=float(z), threshold=float(threshold),
    )


# ------------------------------------------------------------ closeness


def closeness_cap(n: int, ell: int, eps: float, c: float | None = None) -> float:
    """Communication budget past which the distributed closeness tester aborts."""
    c = constants.CLOSENESS_C if c is None else c
    return c * c * (n * math.log2(n)) ** (2 / 3) / (ell ** (2 / 3) * eps ** (4 / 3))


class _Aborted(Exception):
    pass


def _w_answers(fp: np.ndarray, fq: np.ndarray, idx_bits: int) -> tuple[np.ndarray, np.ndarray]:
    """Encode each machine's W-samples: unary(k), then k records of side bit + index.

    ``fp``/``fq`` hold 1-based W indices (0 = not in W), one row per machine;
    records list the p-hits before the q-hits.
    """
    vals = np.concatenate([fp, fq], axis=1)
    hit = vals > 0
    found = hit.sum(axis=1)
    width = 1 + idx_bits
    lengths = found + 1 + found * width
    start = np.cumsum(lengths) - lengths
    out = np.zeros(int(lengths.sum()), dtype=np.uint8)
    total = int(found.sum())
    if total:
        within = np.arange(total) - np.repeat(np.cumsum(found) - found, found)
        out[np.repeat(start, found) + within] = 1
        tags = np.broadcast_to(np.arange(vals.shape[1]) >= fp.shape[1], vals.shape)[hit]
        recs = np.column_stack([tags.astype(np.uint8),
                                binary_bits_many(vals[hit] - 1, idx_bits).reshape(total, idx_bits)])
        rec_pos = np.repeat(start + found + 1, found) + within * width
        out[rec_pos[:, None] + np.arange(width)] = recs
    return lengths, out


def distributed_closeness(
    players: PlayerSource,
    n: int,
    ell: int,
    eps: float,
    rng: Rng | None = None,
    transcript: Transcript | None = None,
    c: float | None = None,
    null_z: float | None | str = "default",
) -> TestVerdict:
    """Closeness via a random subset W of the flattened domain.

    ``rng`` is the referee's randomness; substream 1 selects W, substream 2
    drives the players' sub-bin choices and substream 3 the second
    flattening.  ``c`` defaults to CLOSENESS_C and ``null_z`` to
    CLOSENESS_NULL_Z; pass ``null_z=None`` for the bare midpoint rule.
    """
    c = constants.CLOSENESS_C if c is None else c
    null_z = constants.CLOSENESS_NULL_Z if null_z == "default" else null_z
    _check_source(players, n, ell, True)
    rng = Rng(0) if rng is None else rng
    transcript = Transcript() if transcript is None else transcript
    L = ceil_log2(n)
    log_n = math.log2(n)
    cap = closeness_cap(n, ell, eps, c)
    in_regime = ell <= n * eps**4 / log_n
    if not in_regime:
        _warn(f"ell = {ell} exceeds n eps^4 / log n")

    def record(ids, lengths, bits):
        """Record answers up to the cap; abort before the first that would cross it."""
        room = cap - transcript.total_bits
        k = int(np.searchsorted(np.cumsum(lengths), room, side="right"))
        if k:
            transcript.extend(ids[:k], lengths[:k], bits[: int(lengths[:k].sum())])
        if k < ids.size:
            raise _Aborted
        return k

    def verdict(decision, statistic=None, threshold=None, aborted=False, reason=""):
        return TestVerdict(
            decision, 2 * players.used * ell, comm_bits=transcript.total_bits,
            statistic=statistic, threshold=threshold, aborted=aborted,
            in_regime=in_regime, reason=reason,
        )

    try:
        # Flattening: players reveal samples of both sides until N of each are known.
        big_n = math.ceil(c * ell * log_n / eps)
        need = big_n
        revealed = []
        while need > 0:
            kp = min(BATCH, -(-need // ell))
            ids, bp, bq = players.peek(kp)
            per = np.minimum(ell, need - ell * np.arange(kp))
            lengths = 2 * per * L
            chunks = [binary_bits_many(np.concatenate([bp[i, :k], bq[i, :k]]) - 1, L)
                      for i, k in enumerate(per.tolist())]
            got = record(ids, lengths, np.concatenate(chunks))
            players.advance(got)
            for i, k in enumerate(per.tolist()):
                revealed.append(bp[i, :k])
                revealed.append(bq[i, :k])
            need -= int(per.sum())
        f = build_flattener(np.concatenate(revealed), n)

        # W: each new-domain element independently with probability r; broadcast is free.
        r = 1.0 / (ell * log_n)
        in_w = np.concatenate([[False], rng.substream(1).random(f.new_n) < r])
        w_size = int(in_w.sum())
        if w_size == 0:
            return verdict(Decision.ACCEPT, reason="empty W")
        w_index = np.zeros(f.new_n + 1, dtype=np.int64)
        w_index[in_w] = np.arange(1, w_size + 1)
        idx_bits = ceil_log2(w_size)

        # Each machine answers unary(k) then k records of side bit + W index.
        machines = math.ceil(c * log_n * w_size ** (2 / 3) / eps ** (4 / 3))
        flat_u = rng.substream(2)
        side_p, side_q = [], []
        done = 0
        while done < machines:
            k = min(BATCH, machines - done)
            ids, bp, bq = players.peek(k)
            fp = w_index[flatten_samples(bp.ravel(), f, flat_u.random(bp.size))].reshape(k, ell)
            fq = w_index[flatten_samples(bq.ravel(), f, flat_u.random(bq.size))].reshape(k, ell)
            lengths, bits = _w_answers(fp, fq, idx_bits)
            got = record(ids, lengths, bits)
            players.advance(got)
            side_p.append(fp[fp > 0])
            side_q.append(fq[fq > 0])
            done += k
    except _Aborted:
        return verdict(Decision.REJECT, aborted=True, reason="communication cap")

    xs = np.concatenate(side_p)
    ys = np.concatenate(side_q)
    m1, m2 = int(xs.size), int(ys.size)
    if not abs(m1 - m2) < c * math.sqrt(m1):
        return verdict(Decision.REJECT, reason="count imbalance")
    if not m1 > w_size ** (2 / 3) * c ** (2 / 3) / eps ** (4 / 3):
        return verdict(Decision.REJECT, reason="too few W samples")

    # Second flattening on W, then a fixed-count l2 test on the rest.
    k2 = int(min(m1, m2) * constants.CLOSENESS_SECOND_FLATTEN_FRACTION)
    if m1 - k2 < 2 or m2 - k2 < 2:
        return verdict(Decision.ACCEPT, reason="too few samples for the final test")
    g = build_flattener(np.concatenate([xs[:k2], ys[:k2]]), w_size)
    u = rng.substream(3)
    x2 = flatten_samples(xs[k2:], g, u.random(m1 - k2))
    y2 = flatten_samples(ys[k2:], g, u.random(m2 - k2))
    counts = BucketCounts(
        g.new_n,
        np.bincount(x2, minlength=g.new_n + 1)[1:],
        np.bincount(y2, minlength=g.new_n + 1)[1:],
        float(m1 - k2),
        poissonized=False,
    )
    tau = eps / math.sqrt(c) / (2 * math.sqrt(g.new_n))
    v = l2_closeness_test(counts, tau, null_z)
    return verdict(v.decision, v.statistic, v.threshold)


# ---------------------------------------------------------------- adapter


def protocol_to_stream(protocol: Callable[..., TestVerdict], n: int, ell: int):
    """Turn a one-pass protocol into a streaming algorithm.

    The returned callable consumes ``ell`` stream samples per player, holds
    only the active player's samples plus the transcript so far, and
    charges both to a MemoryLedger: peak <= |T| + sides * ell * ceil(log2 n).
    """
    L = ceil_log2(n)

    def run(stream_p: SampleStream, *args, stream_q: SampleStream | None = None,
            ledger: MemoryLedger | None = None, **kwargs) -> TestVerdict:
        ledger = MemoryLedger() if ledger is None else ledger
        hold = ell * L * (1 if stream_q is None else 2)

        def charge(ids, lengths):
            # Per player: load its samples, record its answer, drop the samples.
            # Answers are positive, so the batch peak is reached at its last player.
            ledger.charge(hold, "player")
            ledger.charge(int(lengths.sum()), "transcript")
            ledger.release(label="player")

        transcript = Transcript(on_append=charge)
        players = PlayerSource(stream_p, ell, stream_q)
        v = protocol(players, n, ell, *args, transcript=transcript, **kwargs)
        drawn = stream_p.drawn + (0 if stream_q is None else stream_q.drawn)
        return TestVerdict(
            v.decision, drawn, ledger.peak_bits, v.comm_bits,
            statistic=v.statistic, threshold=v.threshold, aborted=v.aborted,
            in_regime=v.in_regime, reason=v.reason,
        )

    return run
