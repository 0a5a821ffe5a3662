"""Uniform k-subsets of ``{0, ..., n-1}`` by rejection, with bit counts.

The loop is kept exactly as stated: draw ``log2(n)`` bits for an index,
keep it if new, repeat until ``k`` indices are held.  ``T`` (the number of
draws) is a sum of independent geometric variables with success
probabilities ``1, (n-1)/n, ..., (n-k+1)/n``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .randbits import BitSource, log2_exact


@dataclass(frozen=True, eq=False)
class RowPattern:
    n: int
    k: int
    indices: np.ndarray  # sorted, distinct
    iterations: int
    bits_used: int


def _check(n, k):
    log2_exact(n)
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")


def sample_subset(n: int, k: int, src: BitSource) -> RowPattern:
    """One k-subset drawn from ``src``; consumes ``T * log2(n)`` bits."""
    _check(n, k)
    w = log2_exact(n)
    seen = np.zeros(n, dtype=bool)
    picked = 0
    T = 0
    while picked < k:
        j = src.draw_uint(w)
        T += 1
        if not seen[j]:
            seen[j] = True
            picked += 1
    return RowPattern(n, k, np.flatnonzero(seen), T, T * w)


def sample_rows(n: int, k: int, keys: np.ndarray):
    """Kernel path: one row per key pair, each on its own stream.

    Returns ``(indices, signs, iterations)``; row ``i`` used
    ``iterations[i] * log2(n) + k`` bits of its stream (subset, then signs).
    """
    _check(n, k)
    return _backend.kernels.sample_rows(np.ascontiguousarray(keys, dtype=np.uint64), n, k)


def expected_iterations_exact(n: int, k: int) -> float:
    """``E T = sum_{j<k} n / (n - j)``."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    return math.fsum(n / (n - j) for j in range(k))


def variance_iterations_exact(n: int, k: int) -> float:
    """``Var T = sum_{j<k} (j/n) / ((n-j)/n)^2``."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    return math.fsum(j * n / (n - j) ** 2 for j in range(k))


def iteration_stats(n: int, k: int, trials: int, src: BitSource) -> tuple[float, float]:
    """Sample mean and (unbiased) variance of ``T`` over ``trials`` rows."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    _, _, iters = sample_rows(n, k, src.spawn(trials))
    t = iters.astype(np.float64)
    return float(t.mean()), float(t.var(ddof=1))
