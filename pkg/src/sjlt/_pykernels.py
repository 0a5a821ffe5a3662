"""Pure numpy fallback for the compiled kernels.

Every function here returns exactly what its ``_kernels`` counterpart
returns (floating-point sums may differ in the last bits because numpy
reduces pairwise).
"""

import numpy as np

from ._prg import blocks_np

BACKEND = "python"

_SQRT_HALF = 0.70710678118654752440


def prg_blocks(k0, k1, start, count):
    return blocks_np(int(k0), int(k1), int(start), int(count))


def read_uints(k0, k1, bitpos, width, count):
    if width < 0 or width > 32:
        raise ValueError("width must be in [0, 32]")
    if width == 0 or count == 0:
        return np.zeros(count, dtype=np.int64)
    first = bitpos // 64
    stop = bitpos + width * count
    nblocks = (stop + 63) // 64 - first
    raw = prg_blocks(k0, k1, first, nblocks).astype(">u8").view(np.uint8)
    bits = np.unpackbits(raw)
    off = bitpos - 64 * first
    chunk = bits[off:off + width * count].reshape(count, width).astype(np.int64)
    weights = np.int64(1) << np.arange(width - 1, -1, -1, dtype=np.int64)
    return chunk @ weights


def _sample_one(k0, k1, n, w, k):
    seen = np.zeros(n, dtype=bool)
    picked = []
    got = 0
    t = 0  # draws consumed so far
    while True:
        need = k - got
        free = n - got
        expect = need * n / max(free - need + 1, 1)
        m = max(64, int(1.25 * expect) + 16)
        draws = read_uints(k0, k1, t * w, w, m)
        _, first = np.unique(draws, return_index=True)
        first.sort()
        cand = draws[first]
        fresh = ~seen[cand]
        pos, vals = first[fresh], cand[fresh]
        if len(vals) >= need:
            picked.append(vals[:need])
            T = t + int(pos[need - 1]) + 1
            break
        seen[vals] = True
        picked.append(vals)
        got += len(vals)
        t += m
    idx = np.sort(np.concatenate(picked))
    bits = read_uints(k0, k1, T * w, 1, k)
    signs = (1 - 2 * bits).astype(np.int8)
    return idx, signs, T


def sample_rows(keys, n, k):
    keys = np.asarray(keys, dtype=np.uint64)
    r = keys.shape[0]
    w = int(n).bit_length() - 1
    indices = np.empty((r, k), dtype=np.int64)
    signs = np.empty((r, k), dtype=np.int8)
    iters = np.empty(r, dtype=np.int64)
    for i in range(r):
        indices[i], signs[i], iters[i] = _sample_one(int(keys[i, 0]), int(keys[i, 1]), n, w, k)
    return indices, signs, iters


def sparse_rows_dot(keys, n, k, v):
    keys = np.asarray(keys, dtype=np.uint64)
    w = int(n).bit_length() - 1
    out = np.empty(keys.shape[0], dtype=np.float64)
    for i in range(keys.shape[0]):
        idx, sg, _ = _sample_one(int(keys[i, 0]), int(keys[i, 1]), n, w, k)
        out[i] = np.dot(sg.astype(np.float64), v[idx])
    return out


def wht_inplace(x, counter=None):
    m, n = x.shape
    h = 1
    while h < n:
        y = x.reshape(m, n // (2 * h), 2, h)
        a = y[:, :, 0, :].copy()
        b = y[:, :, 1, :]
        y[:, :, 0, :] = (a + b) * _SQRT_HALF
        y[:, :, 1, :] = (a - b) * _SQRT_HALF
        if counter is not None:
            counter[0] += 2 * a.size
        h *= 2


def gf_mul_np(a, b, m, poly):
    """Carry-less multiply then reduce, elementwise over uint64 arrays."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=np.uint64), np.asarray(b, dtype=np.uint64))
    a, b = a.copy(), b.copy()
    r = np.zeros_like(a)
    one = np.uint64(1)
    top = np.uint64(1 << m)
    p = np.uint64(poly)
    for _ in range(m):
        r ^= np.where(b & one, a, np.uint64(0))
        b >>= one
        a <<= one
        a ^= np.where(a & top, p, np.uint64(0))
    return r


def sign_family(m, poly, coeffs, b0, n):
    x = np.arange(1, n + 1, dtype=np.uint64)
    x2 = gf_mul_np(x, x, m, poly)
    p = x
    acc = np.zeros(n, dtype=np.uint64)
    for a in np.asarray(coeffs, dtype=np.uint64):
        acc ^= a & p
        p = gf_mul_np(p, x2, m, poly)
    parity = (np.bitwise_count(acc) & 1).astype(np.int64) ^ int(b0)
    return (1 - 2 * parity).astype(np.int8)


def sparse_apply(indices, signs, x):
    m = x.shape[0]
    d = indices.shape[0]
    out = np.empty((m, d), dtype=np.float64)
    sg = signs.astype(np.float64)
    step = max(1, 4_000_000 // max(indices.size, 1))
    for lo in range(0, m, step):
        out[lo:lo + step] = (x[lo:lo + step][:, indices] * sg).sum(axis=2)
    return out
