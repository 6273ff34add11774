"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with identical
semantics and bit-identical output.  Elements are 1-based throughout.
"""

import numpy as np


def alias_transform(u, prob, alias):
    """Map uniforms in [0, 1) to samples using a Walker alias table.

    A single uniform supplies both the column (integer part of ``u * n``)
    and the coin (fractional part).
    """
    n = prob.shape[0]
    x = u * n
    i = x.astype(np.int64)
    np.minimum(i, n - 1, out=i)
    f = x - i
    out = np.where(f < prob[i], i, alias[i])
    out += 1
    return out


def gather_rowsum(a, blocks):
    """Row sums of ``a[blocks]`` for a 2-D block of elements."""
    return a[blocks].sum(axis=1, dtype=np.int64)


def row_collisions(blocks, n):
    """Per-row count of colliding pairs, sum over j of C(a_j, 2)."""
    rows, width = blocks.shape
    if width < 2 or rows == 0:
        return np.zeros(rows, dtype=np.int64)
    s = np.sort(blocks, axis=1)
    idx = np.broadcast_to(np.arange(width, dtype=np.int64), s.shape)
    new_run = np.ones(s.shape, dtype=bool)
    new_run[:, 1:] = s[:, 1:] != s[:, :-1]
    starts = np.where(new_run, idx, 0)
    np.maximum.accumulate(starts, axis=1, out=starts)
    return (idx - starts).sum(axis=1, dtype=np.int64)


def first_crossing(values, start, limit):
    """First t with start + values[0..t] >= limit, or -1."""
    if values.shape[0] == 0:
        return -1
    run = np.cumsum(values, dtype=np.int64)
    run += start
    hit = np.flatnonzero(run >= limit)
    return int(hit[0]) if hit.size else -1


def flatten_indices(x, offsets, splits, u):
    """Uniform sub-bin of each element under a flattening layout."""
    s = splits[x - 1]
    sub = (u * s).astype(np.int64)
    np.minimum(sub, s - 1, out=sub)
    return offsets[x - 1] + sub + 1


def poly_hash(x, c3, c2, c1, c0, prime, m):
    """Evaluate c3*x^3 + c2*x^2 + c1*x + c0 mod prime, then reduce mod m (1-based)."""
    xr = x % prime
    acc = np.full(x.shape, c3, dtype=np.int64)
    acc *= xr
    acc += c2
    acc %= prime
    acc *= xr
    acc += c1
    acc %= prime
    acc *= xr
    acc += c0
    acc %= prime
    acc %= m
    acc += 1
    return acc
