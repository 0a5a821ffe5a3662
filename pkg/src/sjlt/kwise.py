"""l-wise independent +-1 families from short seeds.

For ``n`` a power of two, column ``j`` is labelled by the field element
``x_j = j + 1`` of GF(2^m), ``m = log2(n) + 1``.  A seed is ``l/2`` field
elements ``a_1 .. a_{l/2}`` plus one bit ``b0``, and

    beta_j = (-1) ** (b0 ^ <a_1, x_j> ^ <a_2, x_j^3> ^ ... ^ <a_{l/2}, x_j^(l-1)>)

with ``<.,.>`` the GF(2) inner product of bit patterns.  Any ``l`` of the
vectors ``(x, x^3, ..., x^(l-1))`` over distinct nonzero ``x`` are linearly
independent (dual-BCH argument), which makes the family exactly l-wise
independent over the ``2 ** ((log2(n) + 1) * l/2 + 1)`` seeds.

Seed bits are drawn in the order ``a_1, ..., a_{l/2}, b0``, each ``a_t``
most-significant-bit first.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .randbits import BitSource, log2_exact

# One irreducible (in fact primitive) polynomial per degree, bit i = coeff of x^i.
IRREDUCIBLE = {
    1: 0x3, 2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x83, 8: 0x11D,
    9: 0x211, 10: 0x409, 11: 0x805, 12: 0x1053, 13: 0x201B, 14: 0x4443,
    15: 0x8003, 16: 0x1100B, 17: 0x20009, 18: 0x40081, 19: 0x80027,
    20: 0x100009, 21: 0x200005, 22: 0x400003, 23: 0x800021, 24: 0x1000087,
    25: 0x2000009, 26: 0x4000047, 27: 0x8000027, 28: 0x10000009,
    29: 0x20000005, 30: 0x40800007, 31: 0x80000009, 32: 0x100400007,
}

ENUMERATION_BUDGET_BITS = 24


class GF2m:
    """Arithmetic in GF(2^m) modulo ``IRREDUCIBLE[m]``; elements are ints."""

    def __init__(self, m: int):
        if m not in IRREDUCIBLE:
            raise ValueError(f"no field table entry for m={m}")
        self.m = m
        self.poly = IRREDUCIBLE[m]
        self.order = 1 << m

    def __repr__(self):
        return f"GF2m({self.m})"

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(self._check(value), self)

    def _check(self, a: int) -> int:
        if not 0 <= a < self.order:
            raise ValueError(f"{a} is not an element of GF(2^{self.m})")
        return a

    def add(self, a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        r = 0
        top = self.order
        while b:
            if b & 1:
                r ^= a
            b >>= 1
            a <<= 1
            if a & top:
                a ^= self.poly
        return r

    def pow(self, a: int, e: int) -> int:
        result = 1
        while e:
            if e & 1:
                result = self.mul(result, a)
            a = self.mul(a, a)
            e >>= 1
        return result

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return self.pow(a, self.order - 2)


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: GF2m

    def _coerce(self, other):
        if isinstance(other, FieldElement):
            if other.field.m != self.field.m:
                raise ValueError("elements of different fields")
            return other.value
        return self.field._check(other)

    def __add__(self, other):
        return FieldElement(self.value ^ self._coerce(other), self.field)

    __radd__ = __add__
    __sub__ = __add__

    def __mul__(self, other):
        return FieldElement(self.field.mul(self.value, self._coerce(other)), self.field)

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        return FieldElement(self.field.pow(self.value, e), self.field)

    def inverse(self):
        return FieldElement(self.field.inv(self.value), self.field)


def required_independence(n: int, delta: float) -> int:
    """``l = 2 * ceil(ln(n / delta))``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    return 2 * math.ceil(math.log(n / delta))


def seed_bits(n: int, l: int) -> int:
    """Bits needed for an l-wise family of length ``n`` (``n`` when ``l > n``)."""
    _validate(n, l)
    if l > n:
        return n
    return (log2_exact(n) + 1) * (l // 2) + 1


def _validate(n, l):
    log2_exact(n)
    if l < 2 or l % 2:
        raise ValueError(f"l must be an even integer >= 2, got {l}")


@dataclass(frozen=True, eq=False)
class SignFamily:
    n: int
    l: int
    signs: np.ndarray
    seed_bits_used: int
    mode: str  # "kwise" or "full"
    coeffs: tuple = ()
    b0: int = 0


def build_sign_family(n: int, l: int, src: BitSource) -> SignFamily:
    _validate(n, l)
    if l > n:
        bits = src.draw_bits(n)
        signs = (1 - 2 * bits.astype(np.int8)).astype(np.int8)
        return SignFamily(n, l, signs, n, "full")
    m = log2_exact(n) + 1
    if m > 32:
        raise ValueError("n too large for the field table (n <= 2**31)")
    start = src.bits_consumed
    coeffs = src.draw_uints(m, l // 2).astype(np.uint64)
    b0 = int(src.draw_bits(1)[0])
    used = src.bits_consumed - start
    signs = _backend.kernels.sign_family(m, IRREDUCIBLE[m], coeffs, b0, n)
    return SignFamily(n, l, signs, used, "kwise", tuple(int(a) for a in coeffs), b0)


def signs_for_seed(n: int, l: int, seed: int) -> np.ndarray:
    """Family for one explicit seed integer (the seed bit string read MSB-first).

    Scalar field arithmetic only; independent of the kernel path.
    """
    _validate(n, l)
    nbits = seed_bits(n, l)
    if not 0 <= seed < (1 << nbits):
        raise ValueError("seed out of range")
    if l > n:
        bits = [(seed >> (n - 1 - j)) & 1 for j in range(n)]
        return np.array([1 - 2 * b for b in bits], dtype=np.int8)
    m = log2_exact(n) + 1
    F = GF2m(m)
    half = l // 2
    mask = (1 << m) - 1
    coeffs = [(seed >> (1 + m * (half - 1 - t))) & mask for t in range(half)]
    b0 = seed & 1
    out = np.empty(n, dtype=np.int8)
    for j in range(n):
        x = j + 1
        acc = 0
        for t in range(half):
            acc ^= coeffs[t] & F.pow(x, 2 * t + 1)
        out[j] = 1 - 2 * ((bin(acc).count("1") & 1) ^ b0)
    return out


def _seed_table(n: int, l: int) -> np.ndarray:
    """0/1 sign bits for every seed, shape ``(2**seed_bits, n)``.

    Vectorised over seeds; per-column powers come from scalar field ops.
    """
    nbits = seed_bits(n, l)
    seeds = np.arange(1 << nbits, dtype=np.uint64)
    if l > n:
        shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)
        return ((seeds[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    m = log2_exact(n) + 1
    F = GF2m(m)
    half = l // 2
    mask = np.uint64((1 << m) - 1)
    coeffs = [(seeds >> np.uint64(1 + m * (half - 1 - t))) & mask for t in range(half)]
    b0 = (seeds & np.uint64(1)).astype(np.uint8)
    table = np.empty((seeds.size, n), dtype=np.uint8)
    for j in range(n):
        acc = np.zeros_like(seeds)
        for t in range(half):
            acc ^= coeffs[t] & np.uint64(F.pow(j + 1, 2 * t + 1))
        table[:, j] = (np.bitwise_count(acc) & 1).astype(np.uint8) ^ b0
    return table


def verify_kwise_exact(n: int, l: int, order: int | None = None) -> bool:
    """Exhaustively check that every ``order`` coordinates (default ``l``) are
    jointly uniform over the full seed space."""
    nbits = seed_bits(n, l)
    if nbits > ENUMERATION_BUDGET_BITS:
        raise ValueError(f"seed space 2^{nbits} exceeds the enumeration budget 2^{ENUMERATION_BUDGET_BITS}")
    order = l if order is None else order
    if not 1 <= order <= n:
        raise ValueError("order must lie in [1, n]")
    table = _seed_table(n, l)
    nseeds = table.shape[0]
    if nseeds % (1 << order):
        return False
    expected = nseeds >> order
    tableT = np.ascontiguousarray(table.T.astype(np.int64))  # (n, seeds)
    combos = itertools.combinations(range(n), order)
    batch = max(1, 4_000_000 // nseeds)
    while True:
        chunk = np.array(list(itertools.islice(combos, batch)), dtype=np.int64)
        if chunk.size == 0:
            return True
        pats = np.zeros((chunk.shape[0], nseeds), dtype=np.int64)
        for i in range(order):
            pats |= tableT[chunk[:, i]] << i
        pats += (np.arange(chunk.shape[0], dtype=np.int64) << order)[:, None]
        counts = np.bincount(pats.ravel(), minlength=chunk.shape[0] << order)
        if not np.all(counts == expected):
            return False
