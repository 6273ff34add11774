# Compiled twins of the functions in _kernels_py.py.  Outputs must stay
# bit-identical to the numpy versions; tests/test_kernels.py checks this.
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, int32_t

cnp.import_array()


def alias_transform(const double[::1] u, const double[::1] prob, const int64_t[::1] alias):
    cdef Py_ssize_t k, m = u.shape[0]
    cdef int64_t n = prob.shape[0]
    cdef int64_t i
    cdef double x, f
    out = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] o = out
    for k in range(m):
        x = u[k] * n
        i = <int64_t>x
        if i > n - 1:
            i = n - 1
        f = x - <double>i
        if f < prob[i]:
            o[k] = i + 1
        else:
            o[k] = alias[i] + 1
    return out


def gather_rowsum(const int64_t[::1] a, const int64_t[:, ::1] blocks):
    cdef Py_ssize_t r, j, rows = blocks.shape[0], width = blocks.shape[1]
    cdef int64_t acc
    out = np.empty(rows, dtype=np.int64)
    cdef int64_t[::1] o = out
    for r in range(rows):
        acc = 0
        for j in range(width):
            acc += a[blocks[r, j]]
        o[r] = acc
    return out


def row_collisions(const int64_t[:, ::1] blocks, int64_t n):
    cdef Py_ssize_t r, j, rows = blocks.shape[0], width = blocks.shape[1]
    cdef int64_t acc, s
    out = np.zeros(rows, dtype=np.int64)
    cdef int64_t[::1] o = out
    scratch_arr = np.zeros(n + 1, dtype=np.int32)
    cdef int32_t[::1] scratch = scratch_arr
    for r in range(rows):
        acc = 0
        for j in range(width):
            s = blocks[r, j]
            acc += scratch[s]
            scratch[s] += 1
        for j in range(width):
            scratch[blocks[r, j]] = 0
        o[r] = acc
    return out


def first_crossing(const int64_t[::1] values, int64_t start, int64_t limit):
    cdef Py_ssize_t t, m = values.shape[0]
    cdef int64_t run = start
    for t in range(m):
        run += values[t]
        if run >= limit:
            return t
    return -1


def flatten_indices(const int64_t[::1] x, const int64_t[::1] offsets,
                    const int64_t[::1] splits, const double[::1] u):
    cdef Py_ssize_t k, m = x.shape[0]
    cdef int64_t s, sub, e
    out = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] o = out
    for k in range(m):
        e = x[k] - 1
        s = splits[e]
        sub = <int64_t>(u[k] * <double>s)
        if sub > s - 1:
            sub = s - 1
        o[k] = offsets[e] + sub + 1
    return out


def poly_hash(const int64_t[::1] x, int64_t c3, int64_t c2, int64_t c1, int64_t c0,
              int64_t prime, int64_t m):
    cdef Py_ssize_t k, size = x.shape[0]
    cdef int64_t xr, acc
    out = np.empty(size, dtype=np.int64)
    cdef int64_t[::1] o = out
    for k in range(size):
        xr = x[k] % prime
        acc = (c3 * xr + c2) % prime
        acc = (acc * xr + c1) % prime
        acc = (acc * xr + c0) % prime
        o[k] = acc % m + 1
    return out
