"""Seeded Monte-Carlo trials, error-rate intervals and trade-off grids."""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from functools import lru_cache
from statistics import NormalDist

from dtlab import comm, streaming
from dtlab.core_dist import (
    DiscreteDistribution,
    Rng,
    ceil_log2,
    load_distribution,
    lp_distance,
    make_half_uniform,
    make_paninski_instance,
    make_uniform,
    make_zipf,
)
from dtlab.errors import InvalidParameterError, RegimeWarning
from dtlab.verdict import Decision

TESTERS = (
    "central-bipartite",
    "streaming-uniformity",
    "dist-bipartite",
    "dist-aggregate",
    "closeness-memory",
    "closeness-distributed",
    "adapter-check",
)
INSTANCES = ("uniform", "paninski", "disjoint-halves", "zipf", "custom-file")
CLOSENESS_TESTERS = ("closeness-memory", "closeness-distributed")

_REQUIRED = {
    "streaming-uniformity": ("mem_bits",),
    "dist-bipartite": ("ell",),
    "dist-aggregate": ("ell",),
    "closeness-memory": ("buckets",),
    "closeness-distributed": ("ell",),
    "adapter-check": ("ell",),
}

CSV_HEADER = (
    "tester,n,eps,ell,mem_bits,buckets,trials,seed,instance,accepts,rejects,err_rate,"
    "err_lo,err_hi,mean_samples,mean_peak_bits,mean_comm_bits,max_comm_bits,is_reliable"
).split(",")

RELIABILITY_LIMIT = 1 / 3

# Substream keys under Rng(seed, stream_id=trial).
_INSTANCE, _P, _Q, _REFEREE = 1, 2, 3, 4


@dataclass(frozen=True)
class ExperimentConfig:
    tester: str
    n: int
    eps: float
    trials: int = 100
    seed: int = 0
    instance: str = "uniform"
    ell: int | None = None
    mem_bits: int | None = None
    buckets: int | None = None
    samples: int | None = None
    instance_file: str | None = None
    jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.tester not in TESTERS:
            raise InvalidParameterError(f"unknown tester {self.tester!r}; choose from {', '.join(TESTERS)}")
        if self.instance not in INSTANCES:
            raise InvalidParameterError(f"unknown instance {self.instance!r}; choose from {', '.join(INSTANCES)}")
        if self.n < 2:
            raise InvalidParameterError(f"n must be at least 2, got {self.n}")
        if not 0 < self.eps <= 1:
            raise InvalidParameterError(f"eps must lie in (0, 1], got {self.eps}")
        if self.trials < 1:
            raise InvalidParameterError(f"trials must be at least 1, got {self.trials}")
        if self.jobs < 1:
            raise InvalidParameterError(f"jobs must be at least 1, got {self.jobs}")
        for name in _REQUIRED.get(self.tester, ()):
            value = getattr(self, name)
            if value is None or value < 1:
                raise InvalidParameterError(f"tester {self.tester} needs a positive {name.replace('_', '-')}")
        if self.instance in ("paninski", "disjoint-halves") and self.n % 2:
            raise InvalidParameterError(f"instance {self.instance} needs an even n")
        if self.instance == "custom-file" and not self.instance_file:
            raise InvalidParameterError("instance custom-file needs instance-file")
        return self


@dataclass(frozen=True)
class TrialOutcome:
    decision: Decision
    samples: int
    peak_bits: int | None
    comm_bits: int | None
    correct: bool
    aborted: bool = False
    in_regime: bool = True


@dataclass(frozen=True)
class TrialReport:
    config: ExperimentConfig
    accepts: int
    rejects: int
    errors: int
    err_lo: float
    err_hi: float
    mean_samples: float
    max_samples: int
    mean_peak_bits: float | None
    max_peak_bits: int | None
    mean_comm_bits: float | None
    max_comm_bits: int | None
    aborted: int
    out_of_regime: int

    @property
    def trials(self) -> int:
        return self.accepts + self.rejects

    @property
    def error_rate(self) -> float:
        return self.errors / self.trials

    @property
    def is_reliable(self) -> bool:
        return self.err_hi <= RELIABILITY_LIMIT

    def csv_row(self) -> list[str]:
        c = self.config
        return [
            c.tester, str(c.n), _num(c.eps), _opt(c.ell), _opt(c.mem_bits), _opt(c.buckets),
            str(self.trials), str(c.seed), c.instance, str(self.accepts), str(self.rejects),
            _num(self.error_rate), _num(self.err_lo), _num(self.err_hi), _num(self.mean_samples),
            _opt(self.mean_peak_bits), _opt(self.mean_comm_bits), _opt(self.max_comm_bits),
            "true" if self.is_reliable else "false",
        ]


def _num(x: float) -> str:
    return f"{x:.10g}"


def _opt(x) -> str:
    if x is None:
        return ""
    return str(x) if isinstance(x, int) else _num(x)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise InvalidParameterError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # The endpoints at 0 and 1 are exact; rounding would otherwise leave ~1e-17.
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


# -------------------------------------------------------------- instances


@lru_cache(maxsize=8)
def _uniform(n: int) -> DiscreteDistribution:
    return make_uniform(n)


@lru_cache(maxsize=8)
def _half(n: int, upper: bool) -> DiscreteDistribution:
    return make_half_uniform(n, upper)


@lru_cache(maxsize=8)
def _zipf(n: int) -> DiscreteDistribution:
    return make_zipf(n)


@lru_cache(maxsize=8)
def _custom(path: str) -> DiscreteDistribution:
    return load_distribution(path)


def build_instance(config: ExperimentConfig, rng: Rng) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    """(p, q) for a trial.  Uniformity testers test p against q = uniform.

    Closeness instances: uniform is p = q = U, disjoint-halves pits the
    lower half against the upper half, the rest compare against U.
    """
    n, kind = config.n, config.instance
    u = _uniform(n)
    if kind == "uniform":
        return u, u
    if kind == "paninski":
        return make_paninski_instance(n // 2, config.eps, rng), u
    if kind == "disjoint-halves":
        lower = _half(n, False)
        return lower, (_half(n, True) if config.tester in CLOSENESS_TESTERS else u)
    if kind == "zipf":
        return _zipf(n), u
    p = _custom(config.instance_file)
    if p.n != n:
        raise InvalidParameterError(f"{config.instance_file} holds {p.n} probabilities, n = {n}")
    return p, u


def expected_decision(p: DiscreteDistribution, q: DiscreteDistribution) -> Decision:
    if p is q:
        return Decision.ACCEPT
    # The float distance settles every clearly-far instance without the exact sum.
    if float(abs(p.mass - q.mass).sum()) > 1e-9:
        return Decision.REJECT
    return Decision.ACCEPT if lp_distance(p, q, 1) == 0 else Decision.REJECT


# ----------------------------------------------------------------- trials


def run_one(config: ExperimentConfig, trial: int) -> TrialOutcome:
    """One seeded run; everything random derives from (seed, trial)."""
    base = Rng(config.seed, stream_id=trial)
    p, q = build_instance(config, base.substream(_INSTANCE))
    expected = expected_decision(p, q)
    n, eps, t = config.n, config.eps, config.tester
    sp = streaming.SampleStream(p, base.substream(_P))
    sq = streaming.SampleStream(q, base.substream(_Q))
    referee = base.substream(_REFEREE)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        if t == "central-bipartite":
            n1, n2 = streaming.default_central_sizes(n, eps, config.samples)
            v = streaming.bipartite_collision_uniformity(sp, n, eps, n1, n2)
        elif t == "streaming-uniformity":
            v = streaming.streaming_uniformity(sp, n, config.mem_bits, eps, samples=config.samples)
        elif t == "dist-bipartite":
            v = comm.distributed_bipartite_uniformity(comm.PlayerSource(sp, config.ell), n, config.ell, eps)
        elif t == "dist-aggregate":
            v = comm.distributed_aggregate_uniformity(comm.PlayerSource(sp, config.ell), n, config.ell, eps)
        elif t == "closeness-memory":
            v = streaming.closeness_memory(sp, sq, n, config.buckets, eps, rng=referee)
        elif t == "closeness-distributed":
            v = comm.distributed_closeness(comm.PlayerSource(sp, config.ell, sq), n, config.ell, eps, rng=referee)
        else:
            return _adapter_trial(config, p, base)
    return TrialOutcome(v.decision, v.samples_used, v.peak_memory_bits, v.comm_bits,
                        v.decision is expected, v.aborted, v.in_regime)


def _adapter_trial(config: ExperimentConfig, p: DiscreteDistribution, base: Rng) -> TrialOutcome:
    """Direct vs streamed run of the aggregate protocol on the same seed.

    Correct means identical verdicts and both adapter bounds holding.
    """
    n, ell, eps = config.n, config.ell, config.eps
    direct = comm.distributed_aggregate_uniformity(
        comm.PlayerSource(streaming.SampleStream(p, base.substream(_P)), ell), n, ell, eps
    )
    stream = streaming.SampleStream(p, base.substream(_P))
    runner = comm.protocol_to_stream(comm.distributed_aggregate_uniformity, n, ell)
    via = runner(stream, eps)
    ok = (
        via.decision is direct.decision
        and via.comm_bits == direct.comm_bits
        and via.peak_memory_bits <= via.comm_bits + ell * ceil_log2(n)
        and stream.drawn <= via.comm_bits * ell
    )
    return TrialOutcome(via.decision, via.samples_used, via.peak_memory_bits, via.comm_bits, ok)


def _run_block(args) -> list[TrialOutcome]:
    config, start, stop = args
    return [run_one(config, t) for t in range(start, stop)]


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def _max(values):
    vals = [v for v in values if v is not None]
    return max(vals) if vals else None


def summarize(config: ExperimentConfig, outcomes: list[TrialOutcome]) -> TrialReport:
    accepts = sum(o.decision is Decision.ACCEPT for o in outcomes)
    errors = sum(not o.correct for o in outcomes)
    lo, hi = wilson_interval(errors, len(outcomes))
    return TrialReport(
        config=config,
        accepts=accepts,
        rejects=len(outcomes) - accepts,
        errors=errors,
        err_lo=lo,
        err_hi=hi,
        mean_samples=_mean(o.samples for o in outcomes),
        max_samples=_max(o.samples for o in outcomes),
        mean_peak_bits=_mean(o.peak_bits for o in outcomes),
        max_peak_bits=_max(o.peak_bits for o in outcomes),
        mean_comm_bits=_mean(o.comm_bits for o in outcomes),
        max_comm_bits=_max(o.comm_bits for o in outcomes),
        aborted=sum(o.aborted for o in outcomes),
        out_of_regime=sum(not o.in_regime for o in outcomes),
    )


def collect_outcomes(config: ExperimentConfig) -> list[TrialOutcome]:
    config.validate()
    if config.jobs == 1:
        return _run_block((config, 0, config.trials))
    step = -(-config.trials // (4 * config.jobs))
    blocks = [(config, s, min(s + step, config.trials)) for s in range(0, config.trials, step)]
    with ProcessPoolExecutor(max_workers=config.jobs) as pool:
        return [o for block in pool.map(_run_block, blocks) for o in block]


def run_trials(config: ExperimentConfig) -> TrialReport:
    """Run ``config.trials`` independent trials; the report depends only on the config."""
    return summarize(config, collect_outcomes(config))


# ------------------------------------------------------------------- grid


GRID_AXES = ("n", "eps", "ell", "mem_bits", "buckets", "samples", "trials")


@dataclass(frozen=True)
class GridResult:
    axis1: str
    axis2: str
    rows: list[tuple[object, object, TrialReport]]

    @property
    def reports(self) -> list[TrialReport]:
        return [r for _, _, r in self.rows]


def tradeoff_grid(base: ExperimentConfig, axis1: tuple[str, list], axis2: tuple[str, list]) -> GridResult:
    """One TrialReport per (axis1, axis2) cell, axis1 varying slowest."""
    (name1, values1), (name2, values2) = axis1, axis2
    for name, values in ((name1, values1), (name2, values2)):
        if name not in GRID_AXES:
            raise InvalidParameterError(f"cannot sweep {name!r}; choose from {', '.join(GRID_AXES)}")
        if not values:
            raise InvalidParameterError(f"sweep over {name} is empty")
    rows = []
    for a in values1:
        for b in values2:
            cfg = replace(base, **{name1: a, name2: b})
            rows.append((a, b, run_trials(cfg)))
    return GridResult(name1, name2, rows)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def reference_curves(n: int, eps: float, resources) -> str:
    """Sidecar CSV with the two k*m reference curves over the given resource values."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve", "resource", "samples"])
    for m in resources:
        w.writerow(["n/eps^2", m, _num(n / eps**2 / m)])
    for m in resources:
        w.writerow(["n*log2(n)/eps^4", m, _num(n * math.log2(n) / eps**4 / m)])
    return buf.getvalue()


def config_from_mapping(values: dict) -> ExperimentConfig:
    """Build a config from string or typed values keyed by field name (dashes allowed)."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    kwargs = {}
    for key, raw in values.items():
        name = key.replace("-", "_")
        if name == "master_seed":
            name = "seed"
        if name not in types:
            raise InvalidParameterError(f"unknown config key {key!r}")
        if raw is None:
            continue
        kwargs[name] = coerce_value(name, raw)
    for name in ("tester", "n", "eps"):
        if name not in kwargs:
            raise InvalidParameterError(f"missing required setting {name.replace('_', '-')}")
    return ExperimentConfig(**kwargs).validate()


_INT_FIELDS = {"n", "trials", "seed", "ell", "mem_bits", "buckets", "samples", "jobs"}


def coerce_value(name: str, raw):
    if not isinstance(raw, str):
        return raw
    try:
        if name in _INT_FIELDS:
            return _parse_int(raw)
        if name == "eps":
            return float(Fraction(raw))
    except (ValueError, ZeroDivisionError):
        raise InvalidParameterError(f"bad value for {name}: {raw!r}") from None
    return raw


def _parse_int(text: str) -> int:
    """Integers, also written as powers like ``2^14`` or ``2**14``."""
    t = text.strip().replace("**", "^")
    if "^" in t:
        base, exp = t.split("^", 1)
        return int(base) ** int(exp)
    return int(t)


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise InvalidParameterError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in text.split("=", 1))
            out[key.replace("-", "_")] = value
    return out
