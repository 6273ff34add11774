"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--size N] [--repeat R]

Prints one line per kernel: best time per call for each backend and the
speed-up.  Both backends are checked to agree before timing.
"""

import argparse
import timeit

import numpy as np

from dtlab.kernels import KERNEL_NAMES, load_backend


def workloads(size, rng):
    n = 1 << 14
    prob = rng.random(n)
    alias = rng.integers(0, n, size=n)
    mult = rng.integers(0, 4, size=n + 1)
    ell = 16
    blocks = rng.integers(1, n + 1, size=(size // ell, ell))
    splits = rng.integers(1, 4, size=n)
    offsets = np.concatenate([[0], np.cumsum(splits)])
    xs = rng.integers(1, n + 1, size=size)
    return {
        "alias_transform": (rng.random(size), prob, alias),
        "gather_rowsum": (mult, blocks),
        "row_collisions": (blocks, n),
        "first_crossing": (rng.integers(0, 3, size=size), 0, size * 2),
        "flatten_indices": (xs, offsets, splits, rng.random(size)),
        "poly_hash": (xs, 5, 7, 11, 13, 16411, 64),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=1 << 20, help="elements per call")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    py = load_backend("python")
    try:
        cy = load_backend("cython")
    except ImportError:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1

    work = workloads(args.size, np.random.default_rng(0))
    print(f"{'kernel':16s} {'numpy (ms)':>11s} {'cython (ms)':>12s} {'speed-up':>9s}")
    for name in KERNEL_NAMES:
        call_args = work[name]
        a = getattr(py, name)(*call_args)
        b = getattr(cy, name)(*call_args)
        assert np.array_equal(np.asarray(a), np.asarray(b)), name
        times = []
        for backend in (py, cy):
            fn = getattr(backend, name)
            t = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat))
            times.append(t * 1e3)
        print(f"{name:16s} {times[0]:11.2f} {times[1]:12.2f} {times[0] / times[1]:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
