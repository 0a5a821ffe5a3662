"""Metered, seedable source of unbiased random bits.

A :class:`BitSource` reads a counter-mode stream (see ``_prg``) and counts
every bit it hands out.  The count is what the rest of the package reports
as "random bits used"; the generator itself is a PRG stand-in for true
coin tosses and makes no unbiasedness claim of its own.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._prg import MASK64, child_keys_np, child_stream_id, stream_keys


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def log2_exact(n: int) -> int:
    """``log2(n)`` for a power of two; ``ValueError`` otherwise."""
    if not isinstance(n, (int, np.integer)) or not _is_pow2(int(n)):
        raise ValueError(f"n must be a power of 2, got {n!r}")
    return int(n).bit_length() - 1


class BitSource:
    """Deterministic bit stream keyed by ``(seed, stream_id)``.

    Single-owner; hand independent streams to workers with :meth:`split`.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0):
        if not 0 <= seed <= MASK64 or not 0 <= stream_id <= MASK64:
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.k0, self.k1 = stream_keys(self.seed, self.stream_id)
        self.bits_consumed = 0
        self._children = 0

    def __repr__(self):
        return (f"BitSource(seed={self.seed}, stream_id={self.stream_id}, "
                f"bits_consumed={self.bits_consumed})")

    def draw_bits(self, count: int) -> np.ndarray:
        """Next ``count`` bits as a uint8 array of 0/1."""
        if count < 0:
            raise ValueError("count must be >= 0")
        out = self.peek_uints(1, count).astype(np.uint8)
        self.bits_consumed += count
        return out

    def draw_uint(self, width: int) -> int:
        """Next ``width`` bits read most-significant-first as an integer."""
        if width <= 32:
            v = int(self.peek_uints(width, 1)[0])
        else:
            v = 0
            for b in self.peek_uints(1, width):
                v = (v << 1) | int(b)
        self.bits_consumed += width
        return v

    def draw_uints(self, width: int, count: int) -> np.ndarray:
        out = self.peek_uints(width, count)
        self.bits_consumed += width * count
        return out

    def draw_index_pow2(self, n: int) -> int:
        """Uniform index in ``[0, n)`` from exactly ``log2(n)`` bits."""
        return self.draw_uint(log2_exact(n))

    def peek_uints(self, width: int, count: int) -> np.ndarray:
        """Like :meth:`draw_uints` but without consuming anything."""
        return _backend.kernels.read_uints(self.k0, self.k1, self.bits_consumed, width, count)

    def advance(self, bits: int) -> None:
        if bits < 0:
            raise ValueError("cannot rewind a BitSource")
        self.bits_consumed += bits

    def split(self, index: int) -> "BitSource":
        """Independent child stream number ``index`` (same seed)."""
        return BitSource(self.seed, child_stream_id(self.stream_id, index))

    def spawn(self, count: int) -> np.ndarray:
        """Keys of the next ``count`` unused children, as a ``(count, 2)`` array.

        The kernels consume these directly; child ``first + r`` here is the
        same stream as ``self.split(first + r)``.
        """
        keys = child_keys_np(self.seed, self.stream_id, self._children, count)
        self._children += count
        return keys

    def spawn_sources(self, count: int) -> list["BitSource"]:
        first = self._children
        self._children += count
        return [self.split(first + i) for i in range(count)]

    def numpy_rng(self) -> np.random.Generator:
        """A numpy generator seeded from 64 metered bits (for test vectors, not embeddings)."""
        return np.random.default_rng(self.draw_uint(64))


@dataclass
class BitReport:
    """Bits drawn per component; ``idealized`` holds the closed-form counts
    (seed length, ``d*k + sum T * log2 n``) for comparison."""

    per_component: dict = field(default_factory=dict)
    idealized: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.per_component.values())

    def add(self, component: str, bits: int) -> None:
        self.per_component[component] = self.per_component.get(component, 0) + int(bits)

    def to_dict(self) -> dict:
        return {"per_component": dict(self.per_component), "total": self.total,
                "idealized": dict(self.idealized)}

    @property
    def matches_idealized(self) -> bool:
        return all(self.per_component.get(c) == v for c, v in self.idealized.items())


def draw_bits(src: BitSource, count: int) -> np.ndarray:
    return src.draw_bits(count)


def draw_index_pow2(src: BitSource, n: int) -> int:
    return src.draw_index_pow2(n)
