"""Keyed 64-bit block permutation shared by both kernel backends.

Block ``i`` of stream ``(seed, stream_id)`` is

    fmix64(fmix64(fmix64(i ^ k0) ^ k1) + k0)

where ``fmix64`` is the SplitMix64 finalizer (a bijection on 64-bit words)
and ``(k0, k1)`` are derived from the seed and stream id.  Every step is a
bijection, so for a fixed key the map ``i -> block`` is a permutation.
Bits are read most-significant-first within each block.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB


def fmix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MUL1) & MASK64
    z = ((z ^ (z >> 27)) * MUL2) & MASK64
    return z ^ (z >> 31)


def stream_keys(seed: int, stream_id: int) -> tuple[int, int]:
    k0 = fmix64(seed + GOLDEN)
    k1 = fmix64(((stream_id ^ k0) + GOLDEN) & MASK64)
    return k0, k1


def child_stream_id(stream_id: int, index: int) -> int:
    return fmix64(stream_id ^ fmix64(index + 1 + GOLDEN))


def block(k0: int, k1: int, i: int) -> int:
    """Reference (scalar) evaluation of one block."""
    return fmix64((fmix64(fmix64(i ^ k0) ^ k1) + k0) & MASK64)


# -- numpy versions ---------------------------------------------------------

_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_M1 = np.uint64(MUL1)
_M2 = np.uint64(MUL2)


def fmix64_np(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _U30)) * _M1
    z = (z ^ (z >> _U27)) * _M2
    return z ^ (z >> _U31)


def blocks_np(k0: int, k1: int, start: int, count: int) -> np.ndarray:
    i = np.arange(count, dtype=np.uint64) + np.uint64(start)
    return fmix64_np(fmix64_np(fmix64_np(i ^ np.uint64(k0)) ^ np.uint64(k1)) + np.uint64(k0))


def child_keys_np(seed: int, stream_id: int, first: int, count: int) -> np.ndarray:
    """Keys ``(k0, k1)`` of children ``first .. first+count-1`` of a stream.

    Returns a ``(count, 2)`` uint64 array; row ``r`` equals
    ``stream_keys(seed, child_stream_id(stream_id, first + r))``.
    """
    k0 = fmix64(seed + GOLDEN)
    idx = np.arange(count, dtype=np.uint64) + np.uint64(first + 1)
    ids = fmix64_np(np.uint64(stream_id) ^ fmix64_np(idx + np.uint64(GOLDEN)))
    k1 = fmix64_np((ids ^ np.uint64(k0)) + np.uint64(GOLDEN))
    out = np.empty((count, 2), dtype=np.uint64)
    out[:, 0] = k0
    out[:, 1] = k1
    return out
