"""Bloom filter with double hashing over the two halves of a SHA-224 digest."""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

DEFAULT_K = 5
BITS_PER_ELEMENT = 10
HEADER = struct.Struct(">III")  # m, k, n


def _indices(element: bytes, m: int, k: int) -> list[int]:
    d = hashlib.sha224(element).digest()
    h1 = int.from_bytes(d[:14], "big")
    h2 = int.from_bytes(d[14:], "big")
    return [(h1 + i * h2) % m for i in range(k)]


@dataclass
class BloomFilter:
    m: int
    k: int = DEFAULT_K
    n: int = 0
    bits: bytearray = field(default=None, repr=False)

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise ValueError("Bloom filter needs m >= 1 and k >= 1")
        nbytes = (self.m + 7) // 8
        if self.bits is None:
            self.bits = bytearray(nbytes)
        elif len(self.bits) != nbytes:
            raise ValueError(f"bit payload must be {nbytes} bytes for m={self.m}")
        else:
            self.bits = bytearray(self.bits)

    def add(self, element: bytes) -> "BloomFilter":
        for i in _indices(bytes(element), self.m, self.k):
            self.bits[i >> 3] |= 0x80 >> (i & 7)
        self.n += 1
        return self

    def __contains__(self, element: bytes) -> bool:
        bits = self.bits
        return all(bits[i >> 3] & (0x80 >> (i & 7)) for i in _indices(bytes(element), self.m, self.k))

    contains = __contains__

    def popcount(self) -> int:
        return sum(bin(b).count("1") for b in self.bits)

    def copy(self) -> "BloomFilter":
        return BloomFilter(self.m, self.k, self.n, bytearray(self.bits))

    def union(self, other: "BloomFilter") -> "BloomFilter":
        if (self.m, self.k) != (other.m, other.k):
            raise ValueError("union needs filters of equal shape")
        bits = bytearray(a | b for a, b in zip(self.bits, other.bits))
        return BloomFilter(self.m, self.k, self.n + other.n, bits)

    def payload(self) -> bytes:
        return bytes(self.bits)

    def to_bytes(self) -> bytes:
        return HEADER.pack(self.m, self.k, self.n) + bytes(self.bits)

    @classmethod
    def from_bytes(cls, data: bytes) -> "BloomFilter":
        if len(data) < HEADER.size:
            raise ValueError("truncated Bloom filter header")
        m, k, n = HEADER.unpack_from(data)
        body = data[HEADER.size:]
        if len(body) != (m + 7) // 8:
            raise ValueError("Bloom filter payload length does not match m")
        return cls(m, k, n, bytearray(body))


def new_filter(expected_n: int, k: int = DEFAULT_K) -> BloomFilter:
    """Filter sized at ten bits per expected element."""
    if expected_n < 1:
        raise ValueError("expected_n must be at least 1")
    return BloomFilter(BITS_PER_ELEMENT * expected_n, k)


def build_filter(elements) -> BloomFilter | None:
    """Filter over a collection, or None for an empty collection."""
    elements = list(elements)
    if not elements:
        return None
    f = new_filter(len(elements))
    for e in elements:
        f.add(e)
    return f


def insert(f: BloomFilter, element: bytes) -> BloomFilter:
    return f.copy().add(element)


def contains(f: BloomFilter, element: bytes) -> bool:
    return element in f


def predict_fp(m: int, k: int, n: int) -> float:
    """(1 - (1 - 1/m)^(k n))^k"""
    if m < 1:
        raise ValueError("m must be positive")
    return (-math.expm1(k * n * math.log1p(-1.0 / m))) ** k if m > 1 else float(n > 0)
