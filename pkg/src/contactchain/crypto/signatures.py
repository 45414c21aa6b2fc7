"""Short signatures with aggregation over the symmetric pairing group.

sign:      sigma = x * H(m)
verify:    e(sigma, P) == e(H(m), Y)
aggregate: sigma_agg = sum(sigma_i), checked against prod e(H(m_i), Y_i)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import group
from .group import GENERATOR, ORDER


@dataclass(frozen=True)
class GroupParams:
    order: int = ORDER
    modulus: int = group.P_MOD
    generator: tuple = GENERATOR

    def pair(self, a, b):
        return group.pairing(a, b)

    def hash_to_group(self, msg: bytes):
        return group.hash_to_point(msg)


DEFAULT_PARAMS = GroupParams()


@dataclass(frozen=True)
class PublicKey:
    point: tuple

    def __post_init__(self):
        if self.point is None:
            raise ValueError("public key cannot be the identity")

    def to_bytes(self) -> bytes:
        return group.compress(self.point)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PublicKey":
        return cls(group.decompress(bytes(data)))

    def __repr__(self) -> str:
        return f"PublicKey({self.to_bytes()[:6].hex()}..)"


@dataclass(frozen=True)
class PrivateKey:
    scalar: int = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.scalar < ORDER:
            raise ValueError("private scalar out of range")

    def to_bytes(self) -> bytes:
        return group.encode_scalar(self.scalar)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PrivateKey":
        return cls(group.decode_scalar(bytes(data)))

    def public_key(self, params: GroupParams = DEFAULT_PARAMS) -> PublicKey:
        return PublicKey(group.mul(self.scalar, params.generator))


@dataclass(frozen=True)
class Signature:
    point: tuple | None

    def to_bytes(self) -> bytes:
        return group.encode_point(self.point)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Signature":
        return cls(group.decode_point(bytes(data)))


@dataclass(frozen=True)
class AggregateSignature:
    point: tuple | None
    count: int

    def to_bytes(self) -> bytes:
        return group.encode_point(self.point)

    @classmethod
    def from_bytes(cls, data: bytes, count: int) -> "AggregateSignature":
        return cls(group.decode_point(bytes(data)), count)

    def extend(self, sig: Signature) -> "AggregateSignature":
        return AggregateSignature(group.add(self.point, sig.point), self.count + 1)


def keygen(params: GroupParams = DEFAULT_PARAMS, seed: int | bytes = 0) -> tuple[PrivateKey, PublicKey]:
    """Deterministic key pair from a seed (integer or bytes)."""
    if isinstance(seed, int):
        seed = seed.to_bytes((seed.bit_length() + 8) // 8, "big", signed=True)
    d = hashlib.sha224(b"KG0" + seed).digest() + hashlib.sha224(b"KG1" + seed).digest()
    x = int.from_bytes(d, "big") % (params.order - 1) + 1
    sk = PrivateKey(x)
    return sk, sk.public_key(params)


def sign(sk: PrivateKey, msg: bytes, params: GroupParams = DEFAULT_PARAMS) -> Signature:
    if not msg:
        raise ValueError("cannot sign an empty message")
    return Signature(group.mul(sk.scalar, params.hash_to_group(msg)))


def _as_pk(pk) -> PublicKey:
    return pk if isinstance(pk, PublicKey) else PublicKey.from_bytes(pk)


def _as_sig(sig) -> Signature:
    return sig if isinstance(sig, Signature) else Signature.from_bytes(sig)


def verify(pk: PublicKey | bytes, msg: bytes, sig: Signature | bytes,
           params: GroupParams = DEFAULT_PARAMS) -> bool:
    try:
        pk = _as_pk(pk)
        sig = _as_sig(sig)
    except (ValueError, TypeError):
        return False
    if sig.point is None or not msg:
        return False
    lhs = params.pair(sig.point, params.generator)
    rhs = params.pair(params.hash_to_group(msg), pk.point)
    return lhs == rhs


def aggregate(sigs: Iterable[Signature]) -> AggregateSignature:
    sigs = list(sigs)
    if not sigs:
        raise ValueError("nothing to aggregate")
    acc = sigs[0].point
    for s in sigs[1:]:
        acc = group.add(acc, s.point)
    return AggregateSignature(acc, len(sigs))


def aggregate_verify(pubkeys: Sequence[PublicKey], msgs: Sequence[bytes], agg: AggregateSignature,
                     params: GroupParams = DEFAULT_PARAMS) -> bool:
    """One pairing for the aggregate plus one per (key, message) pair."""
    if not (len(pubkeys) == len(msgs) == agg.count):
        raise ValueError(
            f"length mismatch: {len(pubkeys)} keys, {len(msgs)} messages, aggregate of {agg.count}")
    if agg.count == 0 or any(not m for m in msgs):
        return False
    lhs = params.pair(agg.point, params.generator)
    rhs = group.GT_ONE
    for pk, m in zip(pubkeys, msgs):
        rhs = group.f2_mul(rhs, params.pair(params.hash_to_group(m), pk.point))
    return lhs == rhs
