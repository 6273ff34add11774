"""Error-rate sweeps used to freeze the values in dtlab/constants.py.

Each section prints one line per candidate value.  Run a section with
``python3 scripts/calibrate.py <section> [trials]``.
"""

import math
import sys
import time
from unittest import mock

import numpy as np

from dtlab import comm, constants
from dtlab.core_dist import Rng, make_uniform, make_zipf
from dtlab.experiments import ExperimentConfig, run_trials
from dtlab.flattening import build_flattener, flatten_distribution
from dtlab.l2_estimator import l2_closeness_test, simulate_counts
from dtlab.verdict import Decision

N = 1 << 14
EPS = 0.5

ACCEPTANCE = [
    dict(tester="central-bipartite"),
    dict(tester="streaming-uniformity", mem_bits=1 << 13),
    dict(tester="dist-bipartite", ell=4),
    dict(tester="dist-aggregate", ell=2048),
    dict(tester="closeness-memory", buckets=64),
    dict(tester="closeness-distributed", ell=8),
]


def far_instance(tester):
    return "disjoint-halves" if tester.startswith("closeness") else "paninski"


def acceptance(trials):
    for extra in ACCEPTANCE:
        for inst in ("uniform", far_instance(extra["tester"])):
            t0 = time.time()
            r = run_trials(ExperimentConfig(n=N, eps=EPS, trials=trials, seed=2024, instance=inst, **extra))
            print(f"{extra['tester']:22s} {inst:16s} err={r.error_rate:.3f} hi={r.err_hi:.3f} "
                  f"samples={r.mean_samples:.0f} comm={r.max_comm_bits} peak={r.max_peak_bits} "
                  f"{time.time() - t0:.1f}s", flush=True)


def k_bip(trials):
    """Completeness of the central tester as a function of K_BIP."""
    for n in (1 << 10, 1 << 12):
        for k in (40, 400, 1600, 4096):
            with mock.patch.object(constants, "K_BIP", k):
                r = run_trials(ExperimentConfig("central-bipartite", n, EPS, trials, seed=7))
            print(f"n={n} K_BIP={k:5d} uniform err={r.error_rate:.3f} hi={r.err_hi:.3f}", flush=True)


def comm_bound(trials):
    """Largest distributed-bipartite cost in units of (1/eps^2) sqrt((n/l) log2 n)."""
    r = run_trials(ExperimentConfig("dist-bipartite", N, EPS, trials, seed=11, ell=4))
    unit = comm.bipartite_comm_bound(N, 4, EPS) / constants.COMM_BOUND_CONSTANT
    print(f"max comm {r.max_comm_bits} = {r.max_comm_bits / unit:.1f} units; "
          f"mean {r.mean_comm_bits / unit:.1f}")


def l2_constant(trials):
    """Error of the l2 tester on two-bucket worst cases, per sample constant."""
    rng = Rng(3)
    b = math.sqrt(0.5)
    for c in (4, 8, 16, 40):
        for gap in (0.1, 0.3):
            a = np.array([0.5, 0.5])
            far = np.array([0.5 + gap / math.sqrt(2), 0.5 - gap / math.sqrt(2)])
            n_param = c * b / gap**2
            errs = [0, 0]
            for _ in range(trials):
                errs[0] += l2_closeness_test(simulate_counts(a, a, n_param, rng), gap).decision is Decision.REJECT
                errs[1] += l2_closeness_test(simulate_counts(a, far, n_param, rng), gap).decision is Decision.ACCEPT
            print(f"C={c:3d} gap={gap} equal-err={errs[0] / trials:.3f} far-err={errs[1] / trials:.3f}")


def flatten_norm(trials):
    """Fraction of runs with ||p'||_2 <= c / sqrt(m) for m flattening samples."""
    rng = Rng(5)
    for name, p in (("uniform", make_uniform(4096)), ("zipf", make_zipf(4096))):
        for m in (64, 256, 1024):
            norms = []
            for _ in range(trials):
                f = build_flattener(p.sample_cdf(rng, m), p.n)
                norms.append(np.sqrt(np.sum(flatten_distribution(p, f).mass ** 2)) * math.sqrt(m))
            norms = np.array(norms)
            print(f"{name:7s} m={m:5d} q85={np.quantile(norms, 0.85):.3f} max={norms.max():.3f}")


def closeness_null_z(trials):
    """Distributed closeness completeness as a function of the variance guard."""
    for z in (None, 1.5, 2.0, 2.5):
        with mock.patch.object(constants, "CLOSENESS_NULL_Z", z):
            r = run_trials(ExperimentConfig("closeness-distributed", N, EPS, trials, seed=13, ell=8))
        print(f"null_z={z} uniform err={r.error_rate:.3f} hi={r.err_hi:.3f}", flush=True)


SECTIONS = dict(acceptance=acceptance, k_bip=k_bip, comm_bound=comm_bound, l2_constant=l2_constant,
                flatten_norm=flatten_norm, closeness_null_z=closeness_null_z)

if __name__ == "__main__":
    section = sys.argv[1] if len(sys.argv) > 1 else "acceptance"
    SECTIONS[section](int(sys.argv[2]) if len(sys.argv) > 2 else 400)
