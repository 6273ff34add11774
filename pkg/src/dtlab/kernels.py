"""Hot-loop kernels with a compiled backend and a numpy fallback.

The backend is chosen once at import time.  Set ``DTLAB_PURE_PYTHON=1``
to force the numpy fallback (the benchmark and the equivalence tests use
:func:`load_backend` to get both explicitly).
"""

import importlib
import os

import numpy as np

from dtlab import _kernels_py

KERNEL_NAMES = (
    "alias_transform",
    "gather_rowsum",
    "row_collisions",
    "first_crossing",
    "flatten_indices",
    "poly_hash",
)


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``.

    Raises ImportError if the compiled extension is not built.
    """
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("dtlab._kernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    if os.environ.get("DTLAB_PURE_PYTHON", "") not in ("", "0"):
        return "python", _kernels_py
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", _kernels_py


BACKEND, _impl = _select()


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def alias_transform(u, prob, alias):
    return _impl.alias_transform(_f64(u), _f64(prob), _i64(alias))


def gather_rowsum(a, blocks):
    blocks = _i64(blocks)
    if blocks.ndim == 1:
        blocks = blocks.reshape(1, -1)
    return _impl.gather_rowsum(_i64(a), blocks)


def gather_sum(a, samples):
    """Sum of ``a[s]`` over a 1-D array of samples."""
    return int(gather_rowsum(a, samples)[0]) if len(samples) else 0


def row_collisions(blocks, n):
    return _impl.row_collisions(_i64(blocks), int(n))


def first_crossing(values, start, limit):
    return int(_impl.first_crossing(_i64(values), int(start), int(limit)))


def flatten_indices(x, offsets, splits, u):
    return _impl.flatten_indices(_i64(x), _i64(offsets), _i64(splits), _f64(u))


def poly_hash(x, coefficients, prime, m):
    c3, c2, c1, c0 = (int(c) for c in coefficients)
    return _impl.poly_hash(_i64(x), c3, c2, c1, c0, int(prime), int(m))
