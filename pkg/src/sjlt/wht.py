"""Normalized fast Walsh-Hadamard transform.

Iterative in-place butterflies with stride ``h = 1, 2, 4, ...``; each stage
scales by ``1/sqrt(2)`` so the result is ``H_n x`` with ``H_n`` orthogonal and
all entries ``+-1/sqrt(n)``.  Lengths must be powers of two; padding is the
caller's job (``transform.pad_pow2``).
"""

import numpy as np

from . import _backend, _pykernels
from .randbits import log2_exact


def _as_rows(xs) -> np.ndarray:
    a = np.array(xs, dtype=np.float64, order="C", copy=True)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError("expected a vector or a 2-D batch of vectors")
    if a.shape[0] and a.shape[1] == 0:
        raise ValueError("vector length must be a power of 2, got 0")
    if a.shape[0]:
        log2_exact(a.shape[1])
    if not np.all(np.isfinite(a)):
        raise ValueError("input contains NaN or Inf")
    return a


def wht_apply(x) -> np.ndarray:
    """``H_n @ x`` for one vector of power-of-two length."""
    a = _as_rows(x)
    _backend.kernels.wht_inplace(a)
    return a[0]


def wht_apply_batch(xs) -> np.ndarray:
    """Row-wise :func:`wht_apply` over a ``(count, n)`` batch.

    A list of vectors of unequal lengths is rejected.
    """
    if isinstance(xs, (list, tuple)):
        if len(xs) == 0:
            return np.empty((0, 0))
        if len({len(v) for v in xs}) > 1:
            raise ValueError("all vectors in a batch must have the same length")
    a = _as_rows(xs)
    if a.shape[0]:
        _backend.kernels.wht_inplace(a)
    return a


def wht_inplace(a: np.ndarray) -> None:
    """Transform the rows of a C-contiguous float64 array in place (no checks)."""
    _backend.kernels.wht_inplace(a)


def hadamard_matrix(n: int) -> np.ndarray:
    """Explicit ``H_n`` built from the block recursion (test oracle, O(n^2))."""
    log2_exact(n)
    H = np.ones((1, 1))
    while H.shape[0] < n:
        H = np.block([[H, H], [H, -H]]) / np.sqrt(2.0)
    return H


def butterfly_op_count(n: int) -> int:
    """Additions/subtractions the fallback schedule performs on one length-``n`` vector."""
    log2_exact(n)
    counter = [0]
    _pykernels.wht_inplace(np.zeros((1, n)), counter=counter)
    return counter[0]
