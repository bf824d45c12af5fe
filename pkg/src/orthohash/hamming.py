"""Bit-packed binary codes and the Hamming/cosine identities.

Codes over {-1, +1}^K are stored as ``ceil(K/64)`` unsigned 64-bit words,
bit ``k`` living in word ``k // 64`` at position ``k % 64`` (LSB first).
A set bit means +1. Unused high bits of the last word are always zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WORD_BITS = 64


def n_words(bits: int) -> int:
    return (bits + WORD_BITS - 1) // WORD_BITS


@dataclass(frozen=True, eq=False)
class PackedCode:
    """A single K-bit hash code packed into 64-bit words."""

    bits: int
    words: np.ndarray

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        if words.shape != (n_words(self.bits),):
            raise ValueError(f"expected {n_words(self.bits)} words for {self.bits} bits, got shape {words.shape}")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    def __eq__(self, other):
        if not isinstance(other, PackedCode):
            return NotImplemented
        return self.bits == other.bits and np.array_equal(self.words, other.words)

    def __hash__(self):
        return hash((self.bits, self.words.tobytes()))

    def signs(self) -> np.ndarray:
        return unpack_codes(self.words[None, :], self.bits)[0]


def _check_signs(signs: np.ndarray) -> None:
    if not np.all((signs == 1) | (signs == -1)):
        raise ValueError("sign vectors must contain only -1 and +1")


def pack_codes(signs) -> np.ndarray:
    """Pack an (N, K) array of +-1 values into an (N, ceil(K/64)) uint64 array."""
    signs = np.asarray(signs)
    if signs.ndim != 2:
        raise ValueError("pack_codes expects a 2-D array")
    _check_signs(signs)
    n, k = signs.shape
    w = n_words(k)
    bits = np.zeros((n, w * WORD_BITS), dtype=np.uint8)
    bits[:, :k] = signs > 0
    packed = np.packbits(bits, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64).reshape(n, w)


def unpack_codes(words: np.ndarray, bits: int) -> np.ndarray:
    """Inverse of :func:`pack_codes`; returns an int8 (N, K) array of +-1."""
    words = np.ascontiguousarray(words, dtype="<u8")
    raw = words.view(np.uint8).reshape(words.shape[0], -1)
    flags = np.unpackbits(raw, axis=1, bitorder="little")[:, :bits]
    return np.where(flags == 1, 1, -1).astype(np.int8)


def pack_code(signs) -> PackedCode:
    signs = np.asarray(signs)
    if signs.ndim != 1:
        raise ValueError("pack_code expects a 1-D sign vector")
    return PackedCode(signs.shape[0], pack_codes(signs[None, :])[0])


def sign_binarize(v) -> np.ndarray:
    """Element-wise sign with ties at zero mapped to +1."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot binarize non-finite values")
    return np.where(v >= 0, 1, -1).astype(np.int8)


def popcount_distances(query: np.ndarray, database: np.ndarray) -> np.ndarray:
    """Hamming distances between one packed query (W,) and packed rows (N, W)."""
    x = np.bitwise_xor(database, query[None, :])
    return np.bitwise_count(x).sum(axis=1, dtype=np.int64)


def pairwise_distances(words: np.ndarray) -> np.ndarray:
    """Full (N, N) Hamming distance matrix of packed rows."""
    x = np.bitwise_xor(words[:, None, :], words[None, :, :])
    return np.bitwise_count(x).sum(axis=2, dtype=np.int64)


def hamming_distance(a: PackedCode, b: PackedCode) -> int:
    if a.bits != b.bits:
        raise ValueError(f"code length mismatch: {a.bits} vs {b.bits}")
    return int(np.bitwise_count(a.words ^ b.words).sum(dtype=np.int64))


def cosine_from_hamming(d: int, bits: int) -> float:
    """Cosine of the angle between two sign vectors at Hamming distance d."""
    if bits < 1:
        raise ValueError("bits must be positive")
    if not 0 <= d <= bits:
        raise ValueError(f"distance {d} outside [0, {bits}]")
    return 1.0 - 2.0 * d / bits


def quantization_angles(v: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Row-wise angle in degrees between continuous codes and their sign codes."""
    v = np.asarray(v, dtype=np.float64)
    signs = np.asarray(signs, dtype=np.float64)
    if v.shape != signs.shape:
        raise ValueError(f"shape mismatch: {v.shape} vs {signs.shape}")
    norms = np.linalg.norm(v, axis=-1)
    if np.any(norms == 0):
        raise ValueError("quantization angle undefined for a zero vector")
    k = v.shape[-1]
    cos = np.sum(v * signs, axis=-1) / (norms * np.sqrt(k))
    return np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))


def quantization_angle(v, b: PackedCode) -> float:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (b.bits,):
        raise ValueError(f"length mismatch: {v.shape[0]} vs {b.bits}")
    return float(quantization_angles(v, b.signs()))


def collision_probability(theta: float) -> float:
    """Probability that a random hyperplane puts two vectors at angle theta on the same side."""
    if not 0.0 <= theta <= np.pi:
        raise ValueError("theta must lie in [0, pi]")
    return 1.0 - theta / np.pi
