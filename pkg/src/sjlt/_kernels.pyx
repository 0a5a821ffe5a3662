# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.  Must agree with ``_pykernels`` call for call."""

import numpy as np

from libc.stdint cimport uint64_t, int64_t, int8_t
from libc.stdlib cimport malloc, free
from libc.string cimport memset

cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil
    int __builtin_parityll(unsigned long long) nogil

BACKEND = "compiled"


cdef inline uint64_t fmix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline uint64_t block(uint64_t k0, uint64_t k1, uint64_t i) noexcept nogil:
    return fmix64(fmix64(fmix64(i ^ k0) ^ k1) + k0)


cdef enum:
    NBUF = 16


cdef struct Cursor:
    uint64_t k0
    uint64_t k1
    uint64_t base        # block index of ring[0]
    int slot             # next unread slot in ring
    uint64_t buf         # unread bits, left-aligned
    int avail            # number of unread bits in buf
    uint64_t ring[NBUF]  # blocks generated ahead, independent chains pipeline well


cdef inline void cursor_fill(Cursor* c, uint64_t base) noexcept nogil:
    cdef int i
    c.base = base
    c.slot = 0
    for i in range(NBUF):
        c.ring[i] = block(c.k0, c.k1, base + <uint64_t>i)


cdef inline uint64_t cursor_next_block(Cursor* c) noexcept nogil:
    if c.slot == NBUF:
        cursor_fill(c, c.base + NBUF)
    c.slot += 1
    return c.ring[c.slot - 1]


cdef inline void cursor_init(Cursor* c, uint64_t k0, uint64_t k1, uint64_t pos) noexcept nogil:
    cdef uint64_t off = pos & 63
    c.k0 = k0
    c.k1 = k1
    cursor_fill(c, pos >> 6)
    c.buf = cursor_next_block(c) << off
    c.avail = 64 - <int>off


cdef inline uint64_t cursor_read(Cursor* c, int w) noexcept nogil:
    # 1 <= w <= 32, MSB-first
    cdef uint64_t v, nb
    cdef int need
    if w <= c.avail:
        v = c.buf >> (64 - w)
        c.buf <<= w
        c.avail -= w
        return v
    need = w - c.avail
    v = (c.buf >> (64 - c.avail)) if c.avail else 0
    nb = cursor_next_block(c)
    v = (v << need) | (nb >> (64 - need))
    c.buf = nb << need
    c.avail = 64 - need
    return v


def prg_blocks(uint64_t k0, uint64_t k1, uint64_t start, Py_ssize_t count):
    out = np.empty(count, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(count):
            o[i] = block(k0, k1, start + <uint64_t>i)
    return out


def read_uints(uint64_t k0, uint64_t k1, uint64_t bitpos, int width, Py_ssize_t count):
    if width < 0 or width > 32:
        raise ValueError("width must be in [0, 32]")
    out = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Cursor c
    cdef Py_ssize_t i
    with nogil:
        cursor_init(&c, k0, k1, bitpos)
        for i in range(count):
            o[i] = <int64_t>cursor_read(&c, width) if width else 0
    return out


cdef int64_t _sample_row(uint64_t k0, uint64_t k1, int64_t n, int w, int64_t k,
                         uint64_t* bits, int64_t nwords,
                         int64_t* idx_out, int8_t* sgn_out) noexcept nogil:
    cdef Cursor c
    cdef int64_t got = 0, T = 0, j = 0, word, t = 0
    cdef uint64_t b, chunk = 0
    cdef int left = 0
    cursor_init(&c, k0, k1, 0)
    memset(bits, 0, nwords * sizeof(uint64_t))
    while got < k:
        if w:
            j = <int64_t>cursor_read(&c, w)
        T += 1
        if not ((bits[j >> 6] >> (j & 63)) & 1):
            bits[j >> 6] |= (<uint64_t>1) << (j & 63)
            got += 1
    for word in range(nwords):
        b = bits[word]
        while b:
            j = word * 64 + __builtin_ctzll(b)
            idx_out[t] = j
            if left == 0:
                left = 32 if k - t >= 32 else <int>(k - t)
                chunk = cursor_read(&c, left)
            left -= 1
            sgn_out[t] = <int8_t>(1 - 2 * <int>((chunk >> left) & 1))
            t += 1
            b &= b - 1
    return T


def sample_rows(uint64_t[:, ::1] keys, int64_t n, int64_t k):
    cdef Py_ssize_t r = keys.shape[0], i
    cdef int w = 0
    while (<int64_t>1 << w) < n:
        w += 1
    indices = np.empty((r, k), dtype=np.int64)
    signs = np.empty((r, k), dtype=np.int8)
    iters = np.empty(r, dtype=np.int64)
    cdef int64_t[:, ::1] iv = indices
    cdef int8_t[:, ::1] sv = signs
    cdef int64_t[::1] tv = iters
    cdef int64_t nwords = (n + 63) // 64
    cdef uint64_t* bits = <uint64_t*>malloc(nwords * sizeof(uint64_t))
    if bits == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(r):
                tv[i] = _sample_row(keys[i, 0], keys[i, 1], n, w, k, bits, nwords,
                                    &iv[i, 0], &sv[i, 0])
    finally:
        free(bits)
    return indices, signs, iters


def sparse_rows_dot(uint64_t[:, ::1] keys, int64_t n, int64_t k, const double[::1] v):
    """Unscaled sums ``sum_t sign_t * v[idx_t]`` for one row per key pair."""
    cdef Py_ssize_t r = keys.shape[0], i, t
    cdef int w = 0
    while (<int64_t>1 << w) < n:
        w += 1
    out = np.empty(r, dtype=np.float64)
    cdef double[::1] o = out
    cdef int64_t nwords = (n + 63) // 64
    cdef uint64_t* bits = <uint64_t*>malloc(nwords * sizeof(uint64_t))
    cdef int64_t* idx = <int64_t*>malloc(k * sizeof(int64_t))
    cdef int8_t* sgn = <int8_t*>malloc(k * sizeof(int8_t))
    cdef double acc
    if bits == NULL or idx == NULL or sgn == NULL:
        free(bits); free(idx); free(sgn)
        raise MemoryError()
    try:
        with nogil:
            for i in range(r):
                _sample_row(keys[i, 0], keys[i, 1], n, w, k, bits, nwords, idx, sgn)
                acc = 0.0
                for t in range(k):
                    acc = acc + sgn[t] * v[idx[t]]
                o[i] = acc
    finally:
        free(bits); free(idx); free(sgn)
    return out


def wht_inplace(double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1], r, h, i, j
    cdef double a, b
    cdef double s = 0.70710678118654752440
    with nogil:
        for r in range(m):
            h = 1
            while h < n:
                i = 0
                while i < n:
                    for j in range(i, i + h):
                        a = x[r, j]
                        b = x[r, j + h]
                        x[r, j] = (a + b) * s
                        x[r, j + h] = (a - b) * s
                    i += 2 * h
                h *= 2


cdef inline uint64_t gf_mul(uint64_t a, uint64_t b, int m, uint64_t poly) noexcept nogil:
    cdef uint64_t r = 0
    cdef uint64_t top = (<uint64_t>1) << m
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return r


def sign_family(int m, uint64_t poly, const uint64_t[::1] coeffs, int b0, int64_t n):
    """``beta_j = (-1)^(b0 xor <a_1, x> xor <a_2, x^3> xor ...)``, ``x = j + 1``."""
    out = np.empty(n, dtype=np.int8)
    cdef int8_t[::1] o = out
    cdef Py_ssize_t j, t, nt = coeffs.shape[0]
    cdef uint64_t x, x2, p, acc
    with nogil:
        for j in range(n):
            x = <uint64_t>(j + 1)
            x2 = gf_mul(x, x, m, poly)
            p = x
            acc = 0
            for t in range(nt):
                acc ^= coeffs[t] & p
                p = gf_mul(p, x2, m, poly)
            o[j] = <int8_t>(1 - 2 * (__builtin_parityll(acc) ^ b0))
    return out


def sparse_apply(const int64_t[:, ::1] indices, const int8_t[:, ::1] signs, const double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], d = indices.shape[0], k = indices.shape[1], r, i, t
    out = np.empty((m, d), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double acc
    with nogil:
        for r in range(m):
            for i in range(d):
                acc = 0.0
                for t in range(k):
                    acc = acc + signs[i, t] * x[r, indices[i, t]]
                o[r, i] = acc
    return out
