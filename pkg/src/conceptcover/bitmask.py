"""Bit-packed 2-D binary rasters and the set operations built on them.

A :class:`Bitmask` stores one binary plane row-major, rows padded to whole
bytes, most-significant bit first within each byte. Padding bits are always
zero, so popcounts over the packed plane count pixels exactly. Masks are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ShapeMismatchError, UndefinedScoreError


class MaskSetOpsResult(NamedTuple):
    """Fused |intersection| / |union| pixel counts for one mask pair."""

    intersection_count: int
    union_count: int


@lru_cache(maxsize=512)
def _plane_mask(width: int, height: int) -> int:
    """Int with every in-bounds bit set and every padding bit clear."""
    row_bits = ((width + 7) // 8) * 8
    row = ((1 << width) - 1) << (row_bits - width)
    plane = 0
    for _ in range(height):
        plane = (plane << row_bits) | row
    return plane


class Bitmask:
    """Immutable packed binary raster of ``width x height`` pixels."""

    __slots__ = ("_width", "_height", "_bits")

    def __init__(self, width: int, height: int, packed: bytes | None = None):
        if width <= 0 or height <= 0:
            raise ValueError(f"dimensions must be positive, got {width}x{height}")
        self._width = width
        self._height = height
        if packed is None:
            self._bits = 0
        else:
            expected = self.row_bytes * height
            if len(packed) != expected:
                raise ValueError(
                    f"packed plane must be {expected} bytes for {width}x{height}, "
                    f"got {len(packed)}"
                )
            # Normalize: padding bits are zero by invariant.
            self._bits = int.from_bytes(packed, "big") & _plane_mask(width, height)

    @classmethod
    def _from_int(cls, width: int, height: int, bits: int) -> "Bitmask":
        """Internal fast path: bits must already have clear padding."""
        mask = cls(width, height)
        mask._bits = bits
        return mask

    @classmethod
    def zeros(cls, width: int, height: int) -> "Bitmask":
        return cls(width, height)

    @classmethod
    def full(cls, width: int, height: int) -> "Bitmask":
        return cls._from_int(width, height, _plane_mask(width, height))

    @classmethod
    def from_array(cls, arr) -> "Bitmask":
        """Build from a 2-D array; nonzero entries become set pixels."""
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
        height, width = arr.shape
        packed = np.packbits(arr.astype(bool), axis=1).tobytes()
        return cls(width, height, packed)

    @classmethod
    def from_pixels(cls, width: int, height: int,
                    pixels: Iterable[tuple[int, int]]) -> "Bitmask":
        """Build from (row, col) coordinates."""
        mask = cls(width, height)
        row_bits = mask.row_bytes * 8
        bits = 0
        for row, col in pixels:
            if not (0 <= row < height and 0 <= col < width):
                raise ValueError(f"pixel ({row}, {col}) outside {width}x{height}")
            bits |= 1 << ((height - 1 - row) * row_bits + (row_bits - 1 - col))
        mask._bits = bits
        return mask

    @property
    def width(self) -> int:
        return self._width

    @property
    def height(self) -> int:
        return self._height

    @property
    def row_bytes(self) -> int:
        return (self._width + 7) // 8

    @property
    def packed(self) -> bytes:
        """Row-major packed plane, rows padded to whole bytes, MSB first."""
        return self._bits.to_bytes(self.row_bytes * self._height, "big")

    @property
    def popcount(self) -> int:
        return self._bits.bit_count()

    @property
    def is_empty(self) -> bool:
        return self._bits == 0

    def to_array(self) -> np.ndarray:
        """Unpack into a fresh (height, width) boolean array."""
        packed = np.frombuffer(self.packed, dtype=np.uint8)
        rows = packed.reshape(self._height, self.row_bytes)
        return np.unpackbits(rows, axis=1, count=self._width).astype(bool)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Bitmask):
            return NotImplemented
        return (self._width == other._width and self._height == other._height
                and self._bits == other._bits)

    def __hash__(self) -> int:
        return hash((self._width, self._height, self._bits))

    def __or__(self, other: "Bitmask") -> "Bitmask":
        _check_same_shape(self, other)
        return Bitmask._from_int(self._width, self._height, self._bits | other._bits)

    def __and__(self, other: "Bitmask") -> "Bitmask":
        _check_same_shape(self, other)
        return Bitmask._from_int(self._width, self._height, self._bits & other._bits)

    def __repr__(self) -> str:
        return f"Bitmask({self._width}x{self._height}, {self.popcount} set)"


def _check_same_shape(a: Bitmask, b: Bitmask) -> None:
    if a.width != b.width or a.height != b.height:
        raise ShapeMismatchError(
            f"mask shapes differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def union(a: Bitmask, b: Bitmask) -> Bitmask:
    """Pixelwise OR of two same-shape masks."""
    return a | b


def intersection(a: Bitmask, b: Bitmask) -> Bitmask:
    """Pixelwise AND of two same-shape masks."""
    return a & b


def counts(m: Bitmask, d: Bitmask) -> MaskSetOpsResult:
    """|m & d| and |m | d| in one pass over the packed planes."""
    _check_same_shape(m, d)
    inter = (m._bits & d._bits).bit_count()
    return MaskSetOpsResult(inter, m.popcount + d.popcount - inter)


def jaccard(m: Bitmask, d: Bitmask) -> float:
    """|m & d| / |m | d|; undefined (error) when both masks are empty."""
    inter, uni = counts(m, d)
    if uni == 0:
        raise UndefinedScoreError("Jaccard of two empty masks is undefined")
    return inter / uni
