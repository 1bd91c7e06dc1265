"""Bit-packed binary hypervector kernel.

Hypervectors are fixed-width binary vectors stored as packed uint8 words
(8 logical bits per byte, little bit order, padding bits forced to zero).
All similarity work reduces to XOR + popcount on the packed words;
per-coordinate arithmetic (bundling, centroid updates) runs on unpacked
integer/float views.

Operations provided:
    random_hv   - i.i.d. fair-coin bits from a seeded stream
    xor         - binding (self-inverse, associative, commutative)
    flip_bits   - invert exactly k distinct positions (level-chain step)
    hamming     - popcount of the XOR
    cosine      - similarity between a binary vector and an accumulator
    accumulate  - acc += weight * bits (bundling / centroid updates)
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Hypervector",
    "AccumulatorVector",
    "RandomSource",
    "random_hv",
    "xor",
    "flip_bits",
    "hamming",
    "popcount",
    "cosine",
    "accumulate",
]

_BYTE_POPCOUNT = np.bitwise_count if hasattr(np, "bitwise_count") else None
if _BYTE_POPCOUNT is None:  # numpy < 2.0
    _LUT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

    def _BYTE_POPCOUNT(a):
        return _LUT[a]


def _packed_width(dim: int) -> int:
    return (dim + 7) // 8


def _tail_mask(dim: int) -> int:
    """Mask keeping only the valid bits of the final packed byte."""
    rem = dim % 8
    return 0xFF if rem == 0 else (1 << rem) - 1


class Hypervector:
    """A dim-bit binary vector packed into uint8 words.

    Bit i lives at byte i // 8, position i % 8 (little bit order, matching
    np.unpackbits(..., bitorder="little")). Bits past dim in the last byte
    are always zero, so popcount over the raw bytes is exact.
    """

    __slots__ = ("packed", "dim")

    def __init__(self, packed: np.ndarray, dim: int):
        if dim < 1:
            raise ValueError(f"hypervector dim must be >= 1, got {dim}")
        if packed.dtype != np.uint8 or packed.shape != (_packed_width(dim),):
            raise ValueError(
                f"packed buffer must be uint8 of shape ({_packed_width(dim)},), "
                f"got {packed.dtype} {packed.shape}"
            )
        self.packed = packed
        self.dim = dim

    @classmethod
    def from_bits(cls, bits) -> "Hypervector":
        """Build from an iterable/array of 0/1 values."""
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
        arr = arr.astype(np.uint8)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("bits must be a non-empty 1-D sequence")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("bits must be 0 or 1")
        return cls(np.packbits(arr, bitorder="little"), int(arr.size))

    @classmethod
    def zeros(cls, dim: int) -> "Hypervector":
        return cls(np.zeros(_packed_width(dim), dtype=np.uint8), dim)

    def to_bits(self) -> np.ndarray:
        """Unpack to a uint8 array of 0/1 values, length dim."""
        return np.unpackbits(self.packed, count=self.dim, bitorder="little")

    def copy(self) -> "Hypervector":
        return Hypervector(self.packed.copy(), self.dim)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hypervector):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self.packed, other.packed))

    def __repr__(self) -> str:
        return f"Hypervector(dim={self.dim}, ones={popcount(self)})"


class AccumulatorVector:
    """Per-coordinate signed accumulator (float64).

    Holds pre-binarization encoding sums and class representatives.
    float64 keeps integer arithmetic exact far beyond any dataset size
    while still admitting fractional learning rates.
    """

    __slots__ = ("values", "dim")

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("accumulator values must be a non-empty 1-D array")
        self.values = values
        self.dim = int(values.size)

    @classmethod
    def zeros(cls, dim: int) -> "AccumulatorVector":
        return cls(np.zeros(dim, dtype=np.float64))

    def copy(self) -> "AccumulatorVector":
        return AccumulatorVector(self.values.copy())

    def __repr__(self) -> str:
        return f"AccumulatorVector(dim={self.dim})"


class RandomSource:
    """Seeded deterministic bit-stream source.

    A master 64-bit seed plus an optional tuple of integer tags selects one
    PCG64 stream via numpy's SeedSequence. Derived streams (see derive())
    are independent of each other, so consumers can partition one master
    seed into documented sub-streams without cross-talk.
    """

    __slots__ = ("seed", "key", "generator")

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence([self.seed, *self.key])
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def derive(self, *tags: int) -> "RandomSource":
        """A fresh independent stream keyed by (seed, *key, *tags)."""
        return RandomSource(self.seed, self.key + tags)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, key={self.key})"


def random_hv(dim: int, rng: RandomSource) -> Hypervector:
    """Draw a hypervector with i.i.d. fair-coin bits from rng's stream."""
    if dim < 1:
        raise ValueError(f"hypervector dim must be >= 1, got {dim}")
    packed = rng.generator.integers(0, 256, size=_packed_width(dim), dtype=np.uint8)
    packed[-1] &= _tail_mask(dim)
    return Hypervector(packed, dim)


def _check_dims(a, b) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} != {b.dim}")


def xor(a: Hypervector, b: Hypervector) -> Hypervector:
    """Bitwise XOR (binding). Self-inverse: xor(x, x) is all-zero."""
    _check_dims(a, b)
    return Hypervector(np.bitwise_xor(a.packed, b.packed), a.dim)


def flip_bits(hv: Hypervector, count: int, rng: RandomSource) -> Hypervector:
    """Invert exactly `count` distinct positions chosen uniformly from rng.

    Positions are sampled without replacement, so hamming(hv, result) == count
    holds exactly. count == dim yields the bitwise complement.
    """
    if count < 0 or count > hv.dim:
        raise ValueError(f"flip count {count} outside [0, {hv.dim}]")
    out = hv.packed.copy()
    if count:
        positions = rng.generator.choice(hv.dim, size=count, replace=False)
        np.bitwise_xor.at(
            out,
            positions // 8,
            np.left_shift(np.uint8(1), (positions % 8).astype(np.uint8)),
        )
    return Hypervector(out, hv.dim)


def popcount(hv: Hypervector) -> int:
    """Number of set bits."""
    return int(_BYTE_POPCOUNT(hv.packed).sum())


def hamming(a: Hypervector, b: Hypervector) -> int:
    """Number of positions where a and b differ."""
    _check_dims(a, b)
    return int(_BYTE_POPCOUNT(np.bitwise_xor(a.packed, b.packed)).sum())


def cosine(h: Hypervector, c: AccumulatorVector) -> float:
    """Cosine similarity between binary h and accumulator c.

    dot(h, c) / (sqrt(popcount(h)) * ||c||). Either operand all-zero is
    degenerate and yields 0.0 rather than an error, so inference over
    pathological encodings never aborts.
    """
    _check_dims(h, c)
    ones = popcount(h)
    c_norm = float(np.linalg.norm(c.values))
    if ones == 0 or c_norm == 0.0:
        return 0.0
    dot = float(c.values[h.to_bits().view(np.bool_)].sum())
    return float(dot / (np.sqrt(ones) * c_norm))


def accumulate(acc: AccumulatorVector, h: Hypervector, weight: float) -> AccumulatorVector:
    """acc.values += weight * h bits, in place; returns acc."""
    _check_dims(acc, h)
    if weight != 0.0:
        acc.values[h.to_bits().view(np.bool_)] += weight
    return acc
